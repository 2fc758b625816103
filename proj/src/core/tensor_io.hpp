#pragma once

#include <string>

#include "core/tensor.hpp"

namespace vinf {

// On-disk tensor dump. Little-endian throughout:
//   bytes 0..3   magic "VINF"
//   bytes 4..7   format version, u32 = 1
//   bytes 8..23  F, H, W, C as u32
//   bytes 24..   F*H*W*C raw IEEE-754 binary32 values, row-major
// The format is a contract: a dump written here must be byte-identical across
// runs, transports, and worker counts for the same logical result.

constexpr uint32_t kDumpVersion = 1;

void write_tensor_dump(const std::string& path, const Tensor& t);
Tensor read_tensor_dump(const std::string& path);

}  // namespace vinf
