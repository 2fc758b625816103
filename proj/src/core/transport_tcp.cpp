#include "core/transport_tcp.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <thread>

namespace vinf {

namespace {

std::string errno_text(const std::string& what) {
    return what + ": " + std::strerror(errno);
}

void set_nodelay(int fd) {
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

sockaddr_in make_addr(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw TransportError("cannot parse address: " + host);
    }
    return addr;
}

void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 24));
}

uint32_t get_u32le(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

}  // namespace

std::pair<std::string, uint16_t> split_host_port(const std::string& addr) {
    const size_t colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= addr.size()) {
        throw ConfigError("listen address must be host:port, got '" + addr + "'");
    }
    unsigned long port = 0;
    try {
        port = std::stoul(addr.substr(colon + 1));
    } catch (...) {
        throw ConfigError("bad port in listen address '" + addr + "'");
    }
    if (port > 65535) throw ConfigError("port out of range in '" + addr + "'");
    return {addr.substr(0, colon), uint16_t(port)};
}

int tcp_listen(const std::string& host, uint16_t port, uint16_t* bound_port) {
    const int fd = socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw TransportError(errno_text("socket"));
    int one = 1;
    setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(host, port);
    if (bind(fd, (sockaddr*)&addr, sizeof(addr)) != 0) {
        const std::string msg = errno_text("bind " + host + ":" + std::to_string(port));
        close(fd);
        throw TransportError(msg);
    }
    if (listen(fd, 64) != 0) {
        const std::string msg = errno_text("listen");
        close(fd);
        throw TransportError(msg);
    }
    if (bound_port) {
        sockaddr_in actual{};
        socklen_t len = sizeof(actual);
        if (getsockname(fd, (sockaddr*)&actual, &len) != 0) {
            const std::string msg = errno_text("getsockname");
            close(fd);
            throw TransportError(msg);
        }
        *bound_port = ntohs(actual.sin_port);
    }
    return fd;
}

int tcp_connect_retry(const std::string& host, uint16_t port, double timeout_seconds) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    for (;;) {
        const int fd = socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw TransportError(errno_text("socket"));
        sockaddr_in addr = make_addr(host, port);
        if (connect(fd, (sockaddr*)&addr, sizeof(addr)) == 0) {
            set_nodelay(fd);
            return fd;
        }
        close(fd);
        if (std::chrono::steady_clock::now() >= deadline) {
            throw TransportError("cannot connect to " + host + ":" + std::to_string(port));
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
}

void write_all(int fd, const void* data, size_t len) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    while (len > 0) {
        const ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("send"));
        }
        p += n;
        len -= size_t(n);
    }
}

void read_exact(int fd, void* data, size_t len) {
    uint8_t* p = static_cast<uint8_t*>(data);
    while (len > 0) {
        const ssize_t n = ::recv(fd, p, len, 0);
        if (n == 0) throw TransportError("peer disconnected");
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("recv"));
        }
        p += n;
        len -= size_t(n);
    }
}

void send_envelope_fd(int fd, const Envelope& env) {
    const auto header = encode_header(env);
    write_all(fd, header.data(), header.size());
    if (!env.payload.empty()) write_all(fd, env.payload.data(), env.payload.size());
}

Envelope recv_envelope_fd(int fd) {
    uint8_t header[kEnvelopeHeaderSize];
    read_exact(fd, header, sizeof(header));
    uint64_t payload_len = 0;
    Envelope env = decode_header(header, sizeof(header), &payload_len);
    env.payload.resize(payload_len);
    if (payload_len > 0) read_exact(fd, env.payload.data(), payload_len);
    return env;
}

TcpTransport::TcpTransport(uint32_t rank, uint32_t world, std::vector<int> peer_fds)
    : Transport(rank, world), fds_(std::move(peer_fds)) {
    if (fds_.size() != world) throw TransportError("peer socket list does not match world size");
}

TcpTransport::~TcpTransport() {
    for (uint32_t j = 0; j < fds_.size(); ++j) {
        if (j != rank() && fds_[j] >= 0) close(fds_[j]);
    }
}

void TcpTransport::do_send(Envelope&& env) {
    send_envelope_fd(fds_[env.dst], env);
}

Envelope TcpTransport::do_recv(uint32_t src) {
    return recv_envelope_fd(fds_[src]);
}

namespace {

constexpr double kConnectTimeout = 20.0;

// Bounded accept so a crashed peer fails the run instead of hanging it.
int accept_with_timeout(int listen_fd, double timeout_seconds) {
    pollfd pfd{};
    pfd.fd = listen_fd;
    pfd.events = POLLIN;
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
    for (;;) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
            deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) throw TransportError("timed out waiting for a peer to connect");
        const int rc = poll(&pfd, 1, int(left.count()));
        if (rc < 0) {
            if (errno == EINTR) continue;
            throw TransportError(errno_text("poll"));
        }
        if (rc == 0) continue;
        const int fd = accept(listen_fd, nullptr, nullptr);
        if (fd < 0) throw TransportError(errno_text("accept"));
        return fd;
    }
}

Envelope make_control(uint32_t src, uint32_t dst, uint64_t digest, std::vector<uint8_t> payload) {
    Envelope env;
    env.type = MsgType::Control;
    env.tag = digest;  // control messages carry the run digest as their tag
    env.src = src;
    env.dst = dst;
    env.payload = std::move(payload);
    return env;
}

void check_control(const Envelope& env, uint64_t digest, const char* what) {
    if (env.type != MsgType::Control) {
        throw ProtocolError(std::string(what) + ": expected control message");
    }
    if (env.tag != digest) {
        char buf[128];
        snprintf(buf, sizeof(buf), "%s: config digest mismatch (ours 0x%016llx, peer 0x%016llx)",
                 what, (unsigned long long)digest, (unsigned long long)env.tag);
        throw ProtocolError(buf);
    }
}

}  // namespace

WorkerLink tcp_worker_connect(const std::string& coord_host, uint16_t coord_port,
                              uint64_t config_digest) {
    WorkerLink link;

    uint16_t my_port = 0;
    const int listen_fd = tcp_listen("127.0.0.1", 0, &my_port);

    link.coordinator_fd = tcp_connect_retry(coord_host, coord_port, kConnectTimeout);

    // hello: version, digest, p2p listener port
    std::vector<uint8_t> hello;
    put_u32le(hello, kProtocolVersion);
    for (int i = 0; i < 8; ++i) hello.push_back(uint8_t(config_digest >> (8 * i)));
    put_u32le(hello, my_port);
    send_envelope_fd(link.coordinator_fd, make_control(0, 0, config_digest, std::move(hello)));

    // roster: version, digest, assigned id, world, then world listener ports
    Envelope roster = recv_envelope_fd(link.coordinator_fd);
    check_control(roster, config_digest, "coordinator handshake");
    if (roster.payload.size() < 20) throw ProtocolError("short roster payload");
    const uint32_t version = get_u32le(roster.payload.data());
    if (version != kProtocolVersion) {
        throw ProtocolError("protocol version mismatch: ours " + std::to_string(kProtocolVersion) +
                            ", coordinator " + std::to_string(version));
    }
    link.id = get_u32le(roster.payload.data() + 12);
    link.world = get_u32le(roster.payload.data() + 16);
    if (roster.payload.size() != 20 + size_t(link.world) * 4) {
        throw ProtocolError("roster payload does not match world size");
    }
    std::vector<uint16_t> ports(link.world);
    for (uint32_t j = 0; j < link.world; ++j) {
        ports[j] = uint16_t(get_u32le(roster.payload.data() + 20 + 4 * j));
    }

    // Mesh: dial everyone below us, announcing who we are; accept the rest.
    std::vector<int> fds(link.world, -1);
    for (uint32_t j = 0; j < link.id; ++j) {
        fds[j] = tcp_connect_retry("127.0.0.1", ports[j], kConnectTimeout);
        std::vector<uint8_t> who;
        put_u32le(who, link.id);
        send_envelope_fd(fds[j], make_control(link.id, j, config_digest, std::move(who)));
    }
    for (uint32_t remaining = link.world - 1 - link.id; remaining > 0; --remaining) {
        const int fd = accept_with_timeout(listen_fd, kConnectTimeout);
        set_nodelay(fd);
        Envelope who = recv_envelope_fd(fd);
        check_control(who, config_digest, "mesh handshake");
        if (who.payload.size() != 4) throw ProtocolError("bad mesh hello payload");
        const uint32_t peer = get_u32le(who.payload.data());
        if (peer <= link.id || peer >= link.world || fds[peer] != -1) {
            throw ProtocolError("unexpected mesh peer id " + std::to_string(peer));
        }
        fds[peer] = fd;
    }
    close(listen_fd);

    link.transport = std::make_unique<TcpTransport>(link.id, link.world, std::move(fds));
    return link;
}

std::vector<int> tcp_coordinator_accept(int listen_fd, uint32_t world, uint64_t config_digest) {
    std::vector<int> fds(world, -1);
    std::vector<uint16_t> ports(world, 0);
    try {
        for (uint32_t i = 0; i < world; ++i) {
            const int fd = accept_with_timeout(listen_fd, kConnectTimeout);
            set_nodelay(fd);
            fds[i] = fd;  // ids assigned in connection order
            Envelope hello = recv_envelope_fd(fd);
            check_control(hello, config_digest, "worker handshake");
            if (hello.payload.size() != 16) throw ProtocolError("bad hello payload");
            const uint32_t version = get_u32le(hello.payload.data());
            if (version != kProtocolVersion) {
                throw ProtocolError("protocol version mismatch: ours " +
                                    std::to_string(kProtocolVersion) + ", worker " +
                                    std::to_string(version));
            }
            ports[i] = uint16_t(get_u32le(hello.payload.data() + 12));
        }
        for (uint32_t i = 0; i < world; ++i) {
            std::vector<uint8_t> roster;
            put_u32le(roster, kProtocolVersion);
            for (int b = 0; b < 8; ++b) roster.push_back(uint8_t(config_digest >> (8 * b)));
            put_u32le(roster, i);
            put_u32le(roster, world);
            for (uint32_t j = 0; j < world; ++j) put_u32le(roster, ports[j]);
            send_envelope_fd(fds[i], make_control(0, i, config_digest, std::move(roster)));
        }
    } catch (...) {
        for (int fd : fds) {
            if (fd >= 0) close(fd);
        }
        throw;
    }
    return fds;
}

}  // namespace vinf
