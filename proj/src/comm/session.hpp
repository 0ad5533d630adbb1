#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <unordered_map>

#include "comm/transport.hpp"
#include "core/tensor.hpp"

namespace bnnkit {

enum class ReduceOp { Sum, Average };

struct CommOptions {
    int64_t fusion_capacity_bytes = 64ll << 20; // 64 MB
    int cycle_ms = 5;
    int coord_timeout_ms = 60000;
};

struct CommStats {
    struct OpStats {
        uint64_t calls = 0;
        uint64_t bytes = 0;
        double seconds = 0;
        double avg_bytes() const { return calls ? static_cast<double>(bytes) / calls : 0.0; }
    };
    OpStats allreduce, broadcast, barrier;
    std::map<std::string, uint64_t> per_tensor_calls;

    void reset() { *this = CommStats{}; }
};

void write_comm_stats_csv(const CommStats& s, const std::string& path);

// Greedy packing of (id, bytes) schedule entries into contiguous groups of at
// most `capacity` bytes. Entries with different dtypes never share a group.
std::vector<uint32_t> fuse_schedule(const std::vector<std::pair<uint64_t, int64_t>>& entries,
                                    const std::vector<uint8_t>& dtypes, int64_t capacity);

// One rank's handle on the collective engine. Rank 0 doubles as the
// coordinator: it collects readiness bitmaps at each cycle tick, assigns
// stable execution indices on first full negotiation (the response cache),
// packs ready entries into fusion groups, and broadcasts the schedule. Data
// moves rank-to-rank around the ring, never through the coordinator.
class CommSession {
public:
    CommSession(Transport& transport, CommOptions opts = {});
    ~CommSession();

    int rank() const { return t_->rank(); }
    int world() const { return t_->world(); }

    // queues a reduction; the result lands in `out` once wait_all returns
    template <class T>
    void submit(const std::string& name, const TensorT<T>& in, TensorT<T>& out, ReduceOp op);
    void wait_all();

    template <class T>
    TensorT<T> allreduce(const std::string& name, const TensorT<T>& in, ReduceOp op) {
        TensorT<T> out(in.shape);
        submit(name, in, out, op);
        wait_all();
        return out;
    }

    template <class T>
    void broadcast(const std::string& name, TensorT<T>& data, int root);
    void barrier();

    const CommStats& stats() const { return stats_; }
    void reset_stats() { stats_.reset(); }

    // the replicated response cache: name -> execution index
    const std::unordered_map<std::string, uint64_t>& cache() const { return name_to_id_; }

    // names in the order this rank executed them (order-safety checks)
    const std::vector<std::string>& executed_order() const { return executed_names_; }

private:
    struct Request {
        std::string name;
        const uint8_t* in;
        uint8_t* out;
        uint64_t count;
        uint8_t dtype; // 0 f32, 1 f64
        ReduceOp op;
        bool done = false;
        CommStats::OpStats* bucket;
    };

    void submit_raw(const std::string& name, const void* in, void* out, uint64_t count,
                    uint8_t dtype, ReduceOp op, CommStats::OpStats& bucket);
    void announce_pending();
    void handle_schedule(const Schedule& s);
    void execute_group(const std::vector<uint64_t>& ids);
    void coordinator_loop_step(std::chrono::steady_clock::time_point& next_tick);
    void ingest_ready(const ReadyBitmap& r);
    Schedule build_tick();
    bool all_done() const;
    Request* find_pending(uint64_t id);

    Transport* t_;
    CommOptions opts_;
    CommStats stats_;

    std::vector<Request> pending_;
    std::unordered_map<std::string, uint64_t> name_to_id_;
    std::vector<std::string> id_to_name_;
    std::vector<std::string> executed_names_;
    uint64_t group_seq_ = 0;
    std::vector<std::string> stall_diags_;

    // coordinator state (rank 0 only)
    struct NameInfo {
        uint64_t count = 0;
        uint8_t dtype = 0;
        std::set<int> ranks;
        std::chrono::steady_clock::time_point first;
    };
    std::map<std::string, NameInfo> pending_new_;
    std::unordered_map<uint64_t, std::set<int>> ready_;
    std::unordered_map<uint64_t, std::chrono::steady_clock::time_point> ready_first_;
    std::vector<uint64_t> id_counts_;
    std::vector<uint8_t> id_dtypes_;
};

// Runs `body(session, rank)` on `world` threads over an in-process fabric;
// joins all threads and rethrows the first failure.
void run_ranks(int world, CommOptions opts,
               const std::function<void(CommSession&, int)>& body);

} // namespace bnnkit
