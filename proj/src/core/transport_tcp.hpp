#pragma once

#include <memory>
#include <string>
#include <vector>

#include "core/transport.hpp"

namespace vinf {

// Socket plumbing shared by the worker mesh and the coordinator.
std::pair<std::string, uint16_t> split_host_port(const std::string& addr);
int tcp_listen(const std::string& host, uint16_t port, uint16_t* bound_port);
int tcp_connect_retry(const std::string& host, uint16_t port, double timeout_seconds);
void write_all(int fd, const void* data, size_t len);
void read_exact(int fd, void* data, size_t len);
void send_envelope_fd(int fd, const Envelope& env);
Envelope recv_envelope_fd(int fd);

// Full-mesh backend: one TCP stream per worker pair, message = the envelope
// wire layout verbatim. Per-pair FIFO comes from the stream itself.
class TcpTransport : public Transport {
public:
    // peer_fds[j] is the socket to worker j; peer_fds[rank] is ignored.
    TcpTransport(uint32_t rank, uint32_t world, std::vector<int> peer_fds);
    ~TcpTransport() override;
    TcpTransport(const TcpTransport&) = delete;
    TcpTransport& operator=(const TcpTransport&) = delete;

protected:
    void do_send(Envelope&& env) override;
    Envelope do_recv(uint32_t src) override;

private:
    std::vector<int> fds_;
};

// Worker-side bootstrap. Opens a local listener, registers with the
// coordinator (hello carries protocol version, the run-config digest, and the
// listener port), receives id + roster, then meshes: connect to lower ids,
// accept from higher ones. The coordinator socket stays open for returning
// results.
struct WorkerLink {
    uint32_t id = 0;
    uint32_t world = 0;
    int coordinator_fd = -1;
    std::unique_ptr<TcpTransport> transport;
};
WorkerLink tcp_worker_connect(const std::string& coord_host, uint16_t coord_port,
                              uint64_t config_digest);

// Coordinator side: accept `world` workers, check version + digest, assign
// ids in connection order, then broadcast the roster. Returns per-id sockets.
std::vector<int> tcp_coordinator_accept(int listen_fd, uint32_t world, uint64_t config_digest);

}  // namespace vinf
