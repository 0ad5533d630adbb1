#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>

#include "comm/frame.hpp"

namespace bnnkit {

// Message passing between ranks. recv_match blocks until a frame matching
// (from, kind) arrives; other frames stay queued. Both transports speak the
// same encoded frames.
class Transport {
public:
    virtual ~Transport() = default;
    virtual int rank() const = 0;
    virtual int world() const = 0;
    virtual void send(int to, const Frame& f) = 0;
    // from = -1 accepts any sender; returns false on timeout
    virtual bool recv_match(int from, FrameKind kind, Frame& out, int* from_out,
                            int timeout_ms) = 0;
};

// In-process fabric: one mailbox per rank, threads as ranks.
class ChannelFabric {
public:
    explicit ChannelFabric(int world);
    ~ChannelFabric();

    std::unique_ptr<Transport> transport(int rank);

private:
    struct Mailbox;
    std::vector<std::shared_ptr<Mailbox>> boxes_;
    int world_;
    friend class ChannelTransport;
};

// Full-mesh TCP on localhost (or a configured host): rank i listens on
// base_port + i, higher ranks dial lower ranks. Nonblocking sockets with an
// outbound queue per peer; progress is pumped inside send/recv, so
// simultaneous large sends cannot deadlock.
class TcpTransport : public Transport {
public:
    TcpTransport(int rank, int world, const std::string& host, int base_port,
                 int connect_timeout_ms = 10000);
    ~TcpTransport() override;

    int rank() const override { return rank_; }
    int world() const override { return world_; }
    void send(int to, const Frame& f) override;
    bool recv_match(int from, FrameKind kind, Frame& out, int* from_out,
                    int timeout_ms) override;

private:
    void pump(int timeout_ms);
    struct Peer;
    int rank_, world_;
    std::vector<std::unique_ptr<Peer>> peers_; // index = rank, self slot unused
    std::deque<std::pair<int, Frame>> inbox_;
    int listen_fd_ = -1;
};

} // namespace bnnkit
