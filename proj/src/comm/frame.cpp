#include "comm/frame.hpp"

namespace bnnkit {

Frame encode_ready(const ReadyBitmap& r) {
    ByteWriter w;
    w.put<uint32_t>(r.sender);
    w.put<uint32_t>(static_cast<uint32_t>(r.announce.size()));
    for (const auto& a : r.announce) {
        w.put_string(a.name);
        w.put<uint64_t>(a.elem_count);
        w.put<uint8_t>(a.dtype);
    }
    w.put<uint32_t>(static_cast<uint32_t>(r.ready_cached.size()));
    for (uint64_t id : r.ready_cached) w.put<uint64_t>(id);
    return {FrameKind::ReadyBitmap, std::move(w.bytes())};
}

ReadyBitmap decode_ready(const Frame& f) {
    ByteReader r(f.payload.data(), f.payload.size(), "ready frame");
    ReadyBitmap out;
    out.sender = r.get<uint32_t>();
    uint32_t n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        NewRequest req;
        req.name = r.get_string();
        req.elem_count = r.get<uint64_t>();
        req.dtype = r.get<uint8_t>();
        out.announce.push_back(std::move(req));
    }
    n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) out.ready_cached.push_back(r.get<uint64_t>());
    return out;
}

Frame encode_schedule(const Schedule& s) {
    ByteWriter w;
    w.put<uint32_t>(static_cast<uint32_t>(s.assignments.size()));
    for (const auto& [name, id] : s.assignments) {
        w.put_string(name);
        w.put<uint64_t>(id);
    }
    w.put<uint32_t>(static_cast<uint32_t>(s.execute.size()));
    for (uint64_t id : s.execute) w.put<uint64_t>(id);
    w.put<uint32_t>(static_cast<uint32_t>(s.group_sizes.size()));
    for (uint32_t g : s.group_sizes) w.put<uint32_t>(g);
    w.put<uint32_t>(static_cast<uint32_t>(s.stalls.size()));
    for (const auto& st : s.stalls) {
        w.put_string(st.name);
        w.put<uint32_t>(static_cast<uint32_t>(st.missing_ranks.size()));
        for (uint32_t m : st.missing_ranks) w.put<uint32_t>(m);
    }
    return {FrameKind::Schedule, std::move(w.bytes())};
}

Schedule decode_schedule(const Frame& f) {
    ByteReader r(f.payload.data(), f.payload.size(), "schedule frame");
    Schedule out;
    uint32_t n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        std::string name = r.get_string();
        uint64_t id = r.get<uint64_t>();
        out.assignments.emplace_back(std::move(name), id);
    }
    n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) out.execute.push_back(r.get<uint64_t>());
    n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) out.group_sizes.push_back(r.get<uint32_t>());
    n = r.get<uint32_t>();
    for (uint32_t i = 0; i < n; ++i) {
        StallReport st;
        st.name = r.get_string();
        uint32_t m = r.get<uint32_t>();
        for (uint32_t j = 0; j < m; ++j) st.missing_ranks.push_back(r.get<uint32_t>());
        out.stalls.push_back(std::move(st));
    }
    return out;
}

Frame encode_chunk(const DataChunk& c) {
    ByteWriter w;
    w.put<uint32_t>(c.sender);
    w.put<uint64_t>(c.group_seq);
    w.put<uint32_t>(c.step);
    w.put<uint32_t>(c.chunk_index);
    w.put<uint64_t>(static_cast<uint64_t>(c.bytes.size()));
    w.put_bytes(c.bytes.data(), c.bytes.size());
    return {FrameKind::DataChunk, std::move(w.bytes())};
}

DataChunk decode_chunk(const Frame& f) {
    ByteReader r(f.payload.data(), f.payload.size(), "data frame");
    DataChunk out;
    out.sender = r.get<uint32_t>();
    out.group_seq = r.get<uint64_t>();
    out.step = r.get<uint32_t>();
    out.chunk_index = r.get<uint32_t>();
    uint64_t n = r.get<uint64_t>();
    out.bytes.resize(n);
    r.get_bytes(out.bytes.data(), n);
    return out;
}

Frame encode_stats_blob(uint32_t sender, const std::vector<uint8_t>& blob) {
    ByteWriter w;
    w.put<uint32_t>(sender);
    w.put<uint64_t>(static_cast<uint64_t>(blob.size()));
    w.put_bytes(blob.data(), blob.size());
    return {FrameKind::Stats, std::move(w.bytes())};
}

std::pair<uint32_t, std::vector<uint8_t>> decode_stats_blob(const Frame& f) {
    ByteReader r(f.payload.data(), f.payload.size(), "stats frame");
    uint32_t sender = r.get<uint32_t>();
    uint64_t n = r.get<uint64_t>();
    std::vector<uint8_t> blob(n);
    r.get_bytes(blob.data(), n);
    return {sender, std::move(blob)};
}

std::vector<uint8_t> frame_to_wire(const Frame& f) {
    ByteWriter w;
    w.put<uint32_t>(static_cast<uint32_t>(1 + f.payload.size()));
    w.put<uint8_t>(static_cast<uint8_t>(f.kind));
    w.put_bytes(f.payload.data(), f.payload.size());
    return std::move(w.bytes());
}

} // namespace bnnkit
