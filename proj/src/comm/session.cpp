#include "comm/session.hpp"

#include <chrono>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace bnnkit {

using Clock = std::chrono::steady_clock;

namespace {

size_t dtype_size(uint8_t dtype) { return dtype == 0 ? sizeof(float) : sizeof(double); }

template <class T>
void add_elems(uint8_t* acc, const uint8_t* inc, uint64_t count) {
    T* a = reinterpret_cast<T*>(acc);
    const T* b = reinterpret_cast<const T*>(inc);
    for (uint64_t i = 0; i < count; ++i) a[i] += b[i];
}

template <class T>
void scale_elems(uint8_t* p, uint64_t count, double factor) {
    T* a = reinterpret_cast<T*>(p);
    for (uint64_t i = 0; i < count; ++i) a[i] = static_cast<T>(a[i] * factor);
}

std::string join_ranks(const std::vector<uint32_t>& ranks) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < ranks.size(); ++i) os << (i ? ", " : "") << ranks[i];
    os << "]";
    return os.str();
}

} // namespace

void write_comm_stats_csv(const CommStats& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::NotFound, "cannot open '" + path + "'");
    out << "op,count,avg_bytes,cum_seconds\n";
    out << "allreduce," << s.allreduce.calls << "," << s.allreduce.avg_bytes() << ","
        << s.allreduce.seconds << "\n";
    out << "broadcast," << s.broadcast.calls << "," << s.broadcast.avg_bytes() << ","
        << s.broadcast.seconds << "\n";
    out << "barrier," << s.barrier.calls << "," << s.barrier.avg_bytes() << ","
        << s.barrier.seconds << "\n";
}

std::vector<uint32_t> fuse_schedule(const std::vector<std::pair<uint64_t, int64_t>>& entries,
                                    const std::vector<uint8_t>& dtypes, int64_t capacity) {
    std::vector<uint32_t> groups;
    int64_t cur_bytes = 0;
    uint32_t cur_n = 0;
    uint8_t cur_dtype = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        int64_t bytes = entries[i].second;
        if (bytes > capacity)
            fail(ErrorKind::Config,
                 "collective of " + std::to_string(bytes) + " bytes exceeds the fusion capacity " +
                     std::to_string(capacity) + "; raise --fusion-mb");
        if (cur_n > 0 && (cur_bytes + bytes > capacity || dtypes[i] != cur_dtype)) {
            groups.push_back(cur_n);
            cur_n = 0;
            cur_bytes = 0;
        }
        ++cur_n;
        cur_bytes += bytes;
        cur_dtype = dtypes[i];
    }
    if (cur_n > 0) groups.push_back(cur_n);
    return groups;
}

CommSession::CommSession(Transport& transport, CommOptions opts) : t_(&transport), opts_(opts) {
    if (opts_.cycle_ms < 0) fail(ErrorKind::Config, "cycle time must be >= 0");
    if (opts_.fusion_capacity_bytes <= 0) fail(ErrorKind::Config, "fusion capacity must be > 0");
}

CommSession::~CommSession() = default;

void CommSession::submit_raw(const std::string& name, const void* in, void* out, uint64_t count,
                             uint8_t dtype, ReduceOp op, CommStats::OpStats& bucket) {
    for (const auto& r : pending_)
        if (!r.done && r.name == name)
            fail(ErrorKind::Usage, "collective '" + name + "' already in flight");
    Request r;
    r.name = name;
    r.in = static_cast<const uint8_t*>(in);
    r.out = static_cast<uint8_t*>(out);
    r.count = count;
    r.dtype = dtype;
    r.op = op;
    r.bucket = &bucket;
    pending_.push_back(std::move(r));
    bucket.calls += 1;
    bucket.bytes += count * dtype_size(dtype);
    stats_.per_tensor_calls[name] += 1;
}

template <class T>
void CommSession::submit(const std::string& name, const TensorT<T>& in, TensorT<T>& out,
                         ReduceOp op) {
    if (out.size() != in.size()) out = TensorT<T>(in.shape);
    submit_raw(name, in.ptr(), out.ptr(), static_cast<uint64_t>(in.size()),
               std::is_same_v<T, float> ? 0 : 1, op, stats_.allreduce);
}

template void CommSession::submit<float>(const std::string&, const TensorT<float>&,
                                         TensorT<float>&, ReduceOp);
template void CommSession::submit<double>(const std::string&, const TensorT<double>&,
                                          TensorT<double>&, ReduceOp);

bool CommSession::all_done() const {
    for (const auto& r : pending_)
        if (!r.done) return false;
    return true;
}

CommSession::Request* CommSession::find_pending(uint64_t id) {
    if (id >= id_to_name_.size()) return nullptr;
    const std::string& name = id_to_name_[id];
    for (auto& r : pending_)
        if (!r.done && r.name == name) return &r;
    return nullptr;
}

void CommSession::announce_pending() {
    ReadyBitmap rb;
    rb.sender = static_cast<uint32_t>(rank());
    for (const auto& r : pending_) {
        if (r.done) continue;
        auto it = name_to_id_.find(r.name);
        if (it != name_to_id_.end()) rb.ready_cached.push_back(it->second);
        else rb.announce.push_back({r.name, r.count, r.dtype});
    }
    if (rank() == 0) ingest_ready(rb);
    else t_->send(0, encode_ready(rb));
}

void CommSession::ingest_ready(const ReadyBitmap& rb) {
    auto now = Clock::now();
    for (const auto& a : rb.announce) {
        auto cached = name_to_id_.find(a.name);
        if (cached != name_to_id_.end()) {
            auto [it, fresh] = ready_.try_emplace(cached->second);
            it->second.insert(static_cast<int>(rb.sender));
            if (fresh) ready_first_[cached->second] = now;
            continue;
        }
        auto [it, fresh] = pending_new_.try_emplace(a.name);
        NameInfo& info = it->second;
        if (fresh) {
            info.count = a.elem_count;
            info.dtype = a.dtype;
            info.first = now;
        } else if (info.count != a.elem_count || info.dtype != a.dtype) {
            fail(ErrorKind::Protocol, "collective '" + a.name + "': rank " +
                                          std::to_string(rb.sender) +
                                          " announced a different shape or dtype");
        }
        info.ranks.insert(static_cast<int>(rb.sender));
    }
    for (uint64_t id : rb.ready_cached) {
        auto [it, fresh] = ready_.try_emplace(id);
        it->second.insert(static_cast<int>(rb.sender));
        if (fresh) ready_first_[id] = now;
    }
}

Schedule CommSession::build_tick() {
    Schedule s;
    const int w = world();
    // first-complete order across ticks; ties inside one tick resolve by name
    // (std::map iteration is name-ordered)
    for (auto it = pending_new_.begin(); it != pending_new_.end();) {
        if (static_cast<int>(it->second.ranks.size()) == w) {
            uint64_t id = id_counts_.size();
            id_counts_.push_back(it->second.count);
            id_dtypes_.push_back(it->second.dtype);
            s.assignments.emplace_back(it->first, id);
            s.execute.push_back(id);
            it = pending_new_.erase(it);
        } else {
            ++it;
        }
    }
    for (auto it = ready_.begin(); it != ready_.end();) {
        if (static_cast<int>(it->second.size()) == w) {
            s.execute.push_back(it->first);
            ready_first_.erase(it->first);
            it = ready_.erase(it);
        } else {
            ++it;
        }
    }
    std::sort(s.execute.begin(), s.execute.end());

    std::vector<std::pair<uint64_t, int64_t>> entries;
    std::vector<uint8_t> dtypes;
    for (uint64_t id : s.execute) {
        entries.emplace_back(id, static_cast<int64_t>(id_counts_[id] * dtype_size(id_dtypes_[id])));
        dtypes.push_back(id_dtypes_[id]);
    }
    s.group_sizes = fuse_schedule(entries, dtypes, opts_.fusion_capacity_bytes);

    auto now = Clock::now();
    auto expired = [&](Clock::time_point t0) {
        return std::chrono::duration_cast<std::chrono::milliseconds>(now - t0).count() >
               opts_.coord_timeout_ms;
    };
    for (auto it = pending_new_.begin(); it != pending_new_.end();) {
        if (expired(it->second.first)) {
            StallReport st;
            st.name = it->first;
            for (int r = 0; r < w; ++r)
                if (!it->second.ranks.count(r)) st.missing_ranks.push_back(static_cast<uint32_t>(r));
            s.stalls.push_back(std::move(st));
            it = pending_new_.erase(it);
        } else {
            ++it;
        }
    }
    for (auto it = ready_.begin(); it != ready_.end();) {
        if (expired(ready_first_[it->first])) {
            StallReport st;
            st.name = it->first < id_to_name_.size() ? id_to_name_[it->first]
                                                     : "#" + std::to_string(it->first);
            for (int r = 0; r < w; ++r)
                if (!it->second.count(r)) st.missing_ranks.push_back(static_cast<uint32_t>(r));
            s.stalls.push_back(std::move(st));
            ready_first_.erase(it->first);
            it = ready_.erase(it);
        } else {
            ++it;
        }
    }
    return s;
}

void CommSession::execute_group(const std::vector<uint64_t>& ids) {
    const int w = world();
    std::vector<Request*> members;
    uint64_t total = 0;
    uint8_t dtype = 0;
    for (uint64_t id : ids) {
        Request* r = find_pending(id);
        if (!r)
            fail(ErrorKind::Protocol,
                 "scheduled collective #" + std::to_string(id) + " is not pending on rank " +
                     std::to_string(rank()));
        members.push_back(r);
        dtype = r->dtype;
        total += r->count;
    }
    const size_t esz = dtype_size(dtype);
    std::vector<uint8_t> fused(total * esz);
    uint64_t at = 0;
    for (Request* r : members) {
        std::memcpy(fused.data() + at * esz, r->in, r->count * esz);
        at += r->count;
    }

    if (w > 1) {
        // balanced chunking by element
        std::vector<uint64_t> chunk_begin(static_cast<size_t>(w) + 1, 0);
        uint64_t base = total / w, rem = total % w;
        for (int c = 0; c < w; ++c)
            chunk_begin[static_cast<size_t>(c) + 1] =
                chunk_begin[static_cast<size_t>(c)] + base + (static_cast<uint64_t>(c) < rem ? 1 : 0);
        const int right = (rank() + 1) % w;
        const int left = (rank() + w - 1) % w;
        const int ring_timeout = opts_.coord_timeout_ms * 2 + 5000;
        auto chunk_of = [&](int c) {
            return std::pair<uint64_t, uint64_t>{chunk_begin[static_cast<size_t>(c)],
                                                 chunk_begin[static_cast<size_t>(c) + 1]};
        };
        auto send_chunk = [&](int c, uint32_t step) {
            auto [b, e] = chunk_of(c);
            DataChunk dc;
            dc.sender = static_cast<uint32_t>(rank());
            dc.group_seq = group_seq_;
            dc.step = step;
            dc.chunk_index = static_cast<uint32_t>(c);
            dc.bytes.assign(fused.data() + b * esz, fused.data() + e * esz);
            t_->send(right, encode_chunk(dc));
        };
        auto recv_chunk = [&](int c, uint32_t step) -> DataChunk {
            Frame f;
            if (!t_->recv_match(left, FrameKind::DataChunk, f, nullptr, ring_timeout))
                fail(ErrorKind::Transport,
                     "rank " + std::to_string(rank()) + ": ring neighbor " +
                         std::to_string(left) + " went silent");
            DataChunk dc = decode_chunk(f);
            if (dc.group_seq != group_seq_ || dc.step != step ||
                dc.chunk_index != static_cast<uint32_t>(c))
                fail(ErrorKind::Protocol, "rank " + std::to_string(rank()) +
                                              ": out-of-order ring chunk for group " +
                                              std::to_string(dc.group_seq));
            return dc;
        };
        // scatter-reduce
        for (int step = 0; step < w - 1; ++step) {
            int send_c = ((rank() - step) % w + w) % w;
            int recv_c = ((rank() - step - 1) % w + w) % w;
            send_chunk(send_c, static_cast<uint32_t>(step));
            DataChunk dc = recv_chunk(recv_c, static_cast<uint32_t>(step));
            auto [b, e] = chunk_of(recv_c);
            if (dc.bytes.size() != (e - b) * esz)
                fail(ErrorKind::Protocol, "ring chunk length mismatch");
            if (dtype == 0) add_elems<float>(fused.data() + b * esz, dc.bytes.data(), e - b);
            else add_elems<double>(fused.data() + b * esz, dc.bytes.data(), e - b);
        }
        // allgather
        for (int step = 0; step < w - 1; ++step) {
            int send_c = ((rank() + 1 - step) % w + w) % w;
            int recv_c = ((rank() - step) % w + w) % w;
            send_chunk(send_c, static_cast<uint32_t>(w - 1 + step));
            DataChunk dc = recv_chunk(recv_c, static_cast<uint32_t>(w - 1 + step));
            auto [b, e] = chunk_of(recv_c);
            std::memcpy(fused.data() + b * esz, dc.bytes.data(), dc.bytes.size());
        }
    }

    at = 0;
    for (Request* r : members) {
        std::memcpy(r->out, fused.data() + at * esz, r->count * esz);
        if (r->op == ReduceOp::Average && w > 1) {
            if (dtype == 0) scale_elems<float>(r->out, r->count, 1.0 / w);
            else scale_elems<double>(r->out, r->count, 1.0 / w);
        }
        r->done = true;
        executed_names_.push_back(r->name);
        at += r->count;
    }
    ++group_seq_;
}

void CommSession::handle_schedule(const Schedule& s) {
    for (const auto& [name, id] : s.assignments) {
        name_to_id_[name] = id;
        if (id_to_name_.size() <= id) id_to_name_.resize(id + 1);
        id_to_name_[id] = name;
    }
    size_t at = 0;
    for (uint32_t gsize : s.group_sizes) {
        std::vector<uint64_t> ids(s.execute.begin() + at, s.execute.begin() + at + gsize);
        execute_group(ids);
        at += gsize;
    }
    for (const auto& st : s.stalls) {
        for (auto& r : pending_) {
            if (r.done || r.name != st.name) continue;
            r.done = true;
            stall_diags_.push_back("collective '" + st.name + "' never completed within " +
                                   std::to_string(opts_.coord_timeout_ms) +
                                   " ms: missing ranks " + join_ranks(st.missing_ranks));
        }
    }
}

void CommSession::coordinator_loop_step(Clock::time_point& next_tick) {
    auto now = Clock::now();
    if (now < next_tick) {
        int remaining = static_cast<int>(
            std::chrono::duration_cast<std::chrono::milliseconds>(next_tick - now).count());
        Frame f;
        int from = -1;
        if (t_->recv_match(-1, FrameKind::ReadyBitmap, f, &from, std::max(remaining, 1))) {
            ingest_ready(decode_ready(f));
            return;
        }
    }
    // drain anything that arrived right at the tick boundary
    Frame f;
    while (t_->recv_match(-1, FrameKind::ReadyBitmap, f, nullptr, 0)) ingest_ready(decode_ready(f));
    Schedule s = build_tick();
    if (!s.assignments.empty() || !s.execute.empty() || !s.stalls.empty()) {
        Frame frame = encode_schedule(s);
        for (int r = 1; r < world(); ++r) t_->send(r, frame);
        handle_schedule(s);
    }
    next_tick = Clock::now() + std::chrono::milliseconds(opts_.cycle_ms);
}

void CommSession::wait_all() {
    if (all_done()) {
        pending_.clear();
        return;
    }
    auto t0 = Clock::now();
    CommStats::OpStats* bucket = pending_.front().bucket;

    if (world() == 1) {
        for (auto& r : pending_) {
            if (r.done) continue;
            auto it = name_to_id_.find(r.name);
            if (it == name_to_id_.end()) {
                uint64_t id = id_to_name_.size();
                name_to_id_[r.name] = id;
                id_to_name_.push_back(r.name);
            }
            std::memcpy(r.out, r.in, r.count * dtype_size(r.dtype));
            r.done = true;
            executed_names_.push_back(r.name);
        }
    } else {
        announce_pending();
        auto next_tick = Clock::now() + std::chrono::milliseconds(opts_.cycle_ms);
        const int schedule_timeout = opts_.coord_timeout_ms * 2 + 10000;
        while (!all_done()) {
            if (rank() == 0) {
                coordinator_loop_step(next_tick);
            } else {
                Frame f;
                if (!t_->recv_match(0, FrameKind::Schedule, f, nullptr, schedule_timeout))
                    fail(ErrorKind::Stall,
                         "rank " + std::to_string(rank()) + ": no schedule from coordinator");
                handle_schedule(decode_schedule(f));
            }
        }
    }
    pending_.clear();
    bucket->seconds += std::chrono::duration<double>(Clock::now() - t0).count();
    if (!stall_diags_.empty()) {
        std::string msg = stall_diags_.front();
        stall_diags_.clear();
        fail(ErrorKind::Stall, msg);
    }
}

template <class T>
void CommSession::broadcast(const std::string& name, TensorT<T>& data, int root) {
    TensorT<T> contribution = rank() == root ? data : TensorT<T>(data.shape);
    submit_raw("__bcast/" + name, contribution.ptr(), data.ptr(),
               static_cast<uint64_t>(data.size()), std::is_same_v<T, float> ? 0 : 1,
               ReduceOp::Sum, stats_.broadcast);
    wait_all();
}

template void CommSession::broadcast<float>(const std::string&, TensorT<float>&, int);
template void CommSession::broadcast<double>(const std::string&, TensorT<double>&, int);

void CommSession::barrier() {
    static_assert(sizeof(float) == 4);
    float zero = 0, out = 0;
    submit_raw("__barrier", &zero, &out, 1, 0, ReduceOp::Sum, stats_.barrier);
    wait_all();
}

void run_ranks(int world, CommOptions opts,
               const std::function<void(CommSession&, int)>& body) {
    ChannelFabric fabric(world);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(world));
    for (int r = 0; r < world; ++r) {
        threads.emplace_back([&, r] {
            try {
                auto transport = fabric.transport(r);
                CommSession session(*transport, opts);
                body(session, r);
            } catch (...) {
                errors[static_cast<size_t>(r)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

} // namespace bnnkit
