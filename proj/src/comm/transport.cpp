#include "comm/transport.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <thread>

namespace bnnkit {

// ---- channel transport ------------------------------------------------------

struct ChannelFabric::Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::pair<int, Frame>> q;
};

ChannelFabric::ChannelFabric(int world) : world_(world) {
    if (world < 1) fail(ErrorKind::Config, "transport: world size must be >= 1");
    for (int i = 0; i < world; ++i) boxes_.push_back(std::make_shared<Mailbox>());
}

ChannelFabric::~ChannelFabric() = default;

namespace {

class ChannelTransportImpl : public Transport {
public:
    ChannelTransportImpl(int rank, int world,
                         std::vector<std::shared_ptr<ChannelFabric::Mailbox>> boxes)
        : rank_(rank), world_(world), boxes_(std::move(boxes)) {}

    int rank() const override { return rank_; }
    int world() const override { return world_; }

    void send(int to, const Frame& f) override {
        if (to < 0 || to >= world_)
            fail(ErrorKind::Transport, "send to rank " + std::to_string(to) + " out of range");
        auto& box = *boxes_[static_cast<size_t>(to)];
        {
            std::lock_guard<std::mutex> lock(box.mu);
            box.q.emplace_back(rank_, f);
        }
        box.cv.notify_all();
    }

    bool recv_match(int from, FrameKind kind, Frame& out, int* from_out,
                    int timeout_ms) override {
        auto& box = *boxes_[static_cast<size_t>(rank_)];
        auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
        std::unique_lock<std::mutex> lock(box.mu);
        for (;;) {
            for (auto it = box.q.begin(); it != box.q.end(); ++it) {
                if ((from < 0 || it->first == from) && it->second.kind == kind) {
                    if (from_out) *from_out = it->first;
                    out = std::move(it->second);
                    box.q.erase(it);
                    return true;
                }
            }
            if (box.cv.wait_until(lock, deadline) == std::cv_status::timeout) {
                // one last scan in case of a spurious-timeout race
                for (auto it = box.q.begin(); it != box.q.end(); ++it) {
                    if ((from < 0 || it->first == from) && it->second.kind == kind) {
                        if (from_out) *from_out = it->first;
                        out = std::move(it->second);
                        box.q.erase(it);
                        return true;
                    }
                }
                return false;
            }
        }
    }

private:
    int rank_, world_;
    std::vector<std::shared_ptr<ChannelFabric::Mailbox>> boxes_;
};

} // namespace

std::unique_ptr<Transport> ChannelFabric::transport(int rank) {
    if (rank < 0 || rank >= world_)
        fail(ErrorKind::Config, "transport: rank " + std::to_string(rank) + " out of range");
    return std::make_unique<ChannelTransportImpl>(rank, world_, boxes_);
}

// ---- tcp transport ----------------------------------------------------------

namespace {

void set_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

[[noreturn]] void transport_fail(int rank, const std::string& msg) {
    fail(ErrorKind::Transport, "rank " + std::to_string(rank) + ": " + msg);
}

} // namespace

struct TcpTransport::Peer {
    int fd = -1;
    std::vector<uint8_t> outbuf;
    std::vector<uint8_t> inbuf;
};

TcpTransport::TcpTransport(int rank, int world, const std::string& host, int base_port,
                           int connect_timeout_ms)
    : rank_(rank), world_(world) {
    peers_.resize(static_cast<size_t>(world));
    for (auto& p : peers_) p = std::make_unique<Peer>();
    if (world == 1) return;

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) transport_fail(rank_, "socket() failed");
    int one = 1;
    setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(static_cast<uint16_t>(base_port + rank));
    if (bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
        transport_fail(rank_, "bind to port " + std::to_string(base_port + rank) + " failed");
    if (listen(listen_fd_, world) < 0) transport_fail(rank_, "listen failed");

    auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(connect_timeout_ms);

    // dial every lower rank, retrying until its listener is up
    for (int to = 0; to < rank_; ++to) {
        int fd = -1;
        for (;;) {
            fd = ::socket(AF_INET, SOCK_STREAM, 0);
            sockaddr_in peer{};
            peer.sin_family = AF_INET;
            peer.sin_port = htons(static_cast<uint16_t>(base_port + to));
            inet_pton(AF_INET, host.c_str(), &peer.sin_addr);
            if (connect(fd, reinterpret_cast<sockaddr*>(&peer), sizeof peer) == 0) break;
            ::close(fd);
            if (std::chrono::steady_clock::now() > deadline)
                transport_fail(rank_, "could not reach rank " + std::to_string(to));
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        uint32_t hello = static_cast<uint32_t>(rank_);
        if (::send(fd, &hello, sizeof hello, 0) != sizeof hello)
            transport_fail(rank_, "handshake send failed");
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        set_nonblocking(fd);
        peers_[static_cast<size_t>(to)]->fd = fd;
    }
    // accept every higher rank
    for (int need = world_ - 1 - rank_; need > 0; --need) {
        if (std::chrono::steady_clock::now() > deadline)
            transport_fail(rank_, "timed out waiting for higher ranks");
        int fd = accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) transport_fail(rank_, "accept failed");
        uint32_t hello = 0;
        if (::recv(fd, &hello, sizeof hello, MSG_WAITALL) != sizeof hello)
            transport_fail(rank_, "handshake recv failed");
        if (hello >= static_cast<uint32_t>(world_)) transport_fail(rank_, "bad handshake rank");
        setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        set_nonblocking(fd);
        peers_[hello]->fd = fd;
    }
}

TcpTransport::~TcpTransport() {
    for (auto& p : peers_)
        if (p && p->fd >= 0) ::close(p->fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpTransport::send(int to, const Frame& f) {
    if (to == rank_) {
        inbox_.emplace_back(rank_, f);
        return;
    }
    if (to < 0 || to >= world_ || peers_[static_cast<size_t>(to)]->fd < 0)
        transport_fail(rank_, "no connection to rank " + std::to_string(to));
    auto wire = frame_to_wire(f);
    auto& out = peers_[static_cast<size_t>(to)]->outbuf;
    out.insert(out.end(), wire.begin(), wire.end());
    pump(0);
}

void TcpTransport::pump(int timeout_ms) {
    std::vector<pollfd> fds;
    std::vector<int> ranks;
    for (int r = 0; r < world_; ++r) {
        Peer& p = *peers_[static_cast<size_t>(r)];
        if (p.fd < 0) continue;
        short events = POLLIN;
        if (!p.outbuf.empty()) events |= POLLOUT;
        fds.push_back({p.fd, events, 0});
        ranks.push_back(r);
    }
    if (fds.empty()) return;
    int rc = ::poll(fds.data(), fds.size(), timeout_ms);
    if (rc < 0) transport_fail(rank_, "poll failed");
    for (size_t i = 0; i < fds.size(); ++i) {
        Peer& p = *peers_[static_cast<size_t>(ranks[i])];
        if (fds[i].revents & (POLLERR | POLLHUP))
            transport_fail(rank_, "connection to rank " + std::to_string(ranks[i]) + " dropped");
        if (fds[i].revents & POLLOUT) {
            ssize_t n = ::send(p.fd, p.outbuf.data(), p.outbuf.size(), MSG_NOSIGNAL);
            if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK)
                transport_fail(rank_, "send to rank " + std::to_string(ranks[i]) + " failed");
            if (n > 0) p.outbuf.erase(p.outbuf.begin(), p.outbuf.begin() + n);
        }
        if (fds[i].revents & POLLIN) {
            uint8_t buf[1 << 16];
            for (;;) {
                ssize_t n = ::recv(p.fd, buf, sizeof buf, 0);
                if (n > 0) {
                    p.inbuf.insert(p.inbuf.end(), buf, buf + n);
                    if (static_cast<size_t>(n) < sizeof buf) break;
                    continue;
                }
                if (n == 0)
                    transport_fail(rank_, "rank " + std::to_string(ranks[i]) + " disconnected");
                if (errno == EAGAIN || errno == EWOULDBLOCK) break;
                transport_fail(rank_, "recv from rank " + std::to_string(ranks[i]) + " failed");
            }
            // peel complete frames
            for (;;) {
                if (p.inbuf.size() < 4) break;
                uint32_t len;
                std::memcpy(&len, p.inbuf.data(), 4);
                len = detail::to_le(len);
                if (p.inbuf.size() < 4 + len) break;
                Frame f;
                f.kind = static_cast<FrameKind>(p.inbuf[4]);
                f.payload.assign(p.inbuf.begin() + 5, p.inbuf.begin() + 4 + len);
                p.inbuf.erase(p.inbuf.begin(), p.inbuf.begin() + 4 + len);
                inbox_.emplace_back(ranks[i], std::move(f));
            }
        }
    }
}

bool TcpTransport::recv_match(int from, FrameKind kind, Frame& out, int* from_out,
                              int timeout_ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    for (;;) {
        for (auto it = inbox_.begin(); it != inbox_.end(); ++it) {
            if ((from < 0 || it->first == from) && it->second.kind == kind) {
                if (from_out) *from_out = it->first;
                out = std::move(it->second);
                inbox_.erase(it);
                return true;
            }
        }
        auto now = std::chrono::steady_clock::now();
        if (now >= deadline) return false;
        int wait = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count());
        pump(std::min(wait, 50));
    }
}

} // namespace bnnkit
