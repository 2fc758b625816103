#pragma once

#include <stdexcept>
#include <string>

namespace vinf {

// Error taxonomy mirrored by the C API status codes (vinf.h).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Peer-level failures: disconnects, short reads, handshake trouble.
struct TransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// SPMD contract breaches: tag mismatches, unexpected message shape.
struct ProtocolError : TransportError {
    using TransportError::TransportError;
};

}  // namespace vinf
