#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "io/binary.hpp"

namespace bnnkit {

// Wire format shared by both transports: u32 payload length, u8 kind, payload
// bytes, all little-endian.
enum class FrameKind : uint8_t {
    ReadyBitmap = 1, // rank -> coordinator: pending collectives
    Schedule = 2,    // coordinator -> ranks: assignments, execution order, stalls
    DataChunk = 3,   // ring neighbor traffic
    Stats = 4,       // worker metrics gathered to rank 0
};

struct Frame {
    FrameKind kind;
    std::vector<uint8_t> payload;
};

// payload structures ---------------------------------------------------------

struct NewRequest {
    std::string name;
    uint64_t elem_count = 0;
    uint8_t dtype = 0; // 0 f32, 1 f64
};

struct ReadyBitmap {
    uint32_t sender = 0;
    std::vector<NewRequest> announce;   // names the coordinator has not cached
    std::vector<uint64_t> ready_cached; // cache ids pending on this rank
};

struct StallReport {
    std::string name;
    std::vector<uint32_t> missing_ranks;
};

struct Schedule {
    std::vector<std::pair<std::string, uint64_t>> assignments; // name -> new cache id
    std::vector<uint64_t> execute;                             // cache ids, execution order
    std::vector<uint32_t> group_sizes;                         // fusion partition of `execute`
    std::vector<StallReport> stalls;
};

struct DataChunk {
    uint32_t sender = 0;
    uint64_t group_seq = 0;
    uint32_t step = 0;
    uint32_t chunk_index = 0;
    std::vector<uint8_t> bytes;
};

Frame encode_ready(const ReadyBitmap& r);
ReadyBitmap decode_ready(const Frame& f);
Frame encode_schedule(const Schedule& s);
Schedule decode_schedule(const Frame& f);
Frame encode_chunk(const DataChunk& c);
DataChunk decode_chunk(const Frame& f);
Frame encode_stats_blob(uint32_t sender, const std::vector<uint8_t>& blob);
std::pair<uint32_t, std::vector<uint8_t>> decode_stats_blob(const Frame& f);

std::vector<uint8_t> frame_to_wire(const Frame& f);

} // namespace bnnkit
