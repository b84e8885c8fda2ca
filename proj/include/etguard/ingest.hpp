#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace etguard::ingest {

constexpr int kHeadPackets = 50;
constexpr int kBucketWidth = 24;
constexpr int kNumBuckets = 64;     // valid bucket ids 0..63
constexpr int kPaddingBucket = 64;  // sentinel for padded positions
constexpr double kDurationCap = 3600.0;
constexpr double kGapCap = 60.0;

enum class Protocol { TCP, UDP };

struct PacketRecord {
    double timestamp = 0.0; // seconds since epoch
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    Protocol protocol = Protocol::TCP;
    int length = 0; // transport payload bytes
};

struct FlowKey {
    std::string src_ip;
    std::string dst_ip;
    int src_port = 0;
    int dst_port = 0;
    Protocol protocol = Protocol::TCP;

    bool operator==(const FlowKey&) const = default;
    auto operator<=>(const FlowKey&) const = default;
};

struct FlowSequence {
    FlowKey key;
    std::vector<PacketRecord> packets; // chronological, ties keep input order
    std::optional<int> label;          // 0 benign, 1 malicious
};

struct RawSequence {
    std::vector<int> lengths; // head packets only, at most kHeadPackets
    double duration = 0.0;    // t_last - t_first over the retained packets
    double mean_interval = 0.0;
};

struct NormalizedSequence {
    std::vector<int> buckets;      // exactly kHeadPackets entries, padded with sentinel
    std::vector<uint8_t> mask;     // 1 at real positions, 0 at padding
    double d_norm = 0.0;
    double t_m_norm = 0.0;
};

enum class LogFormat { JSONL, PCAP };

// A skipped input record: the 1-based line (JSONL) or byte offset (PCAP) plus
// a reason.
struct SkippedRecord {
    int64_t location = 0;
    std::string reason;
};

struct ParseReport {
    std::vector<PacketRecord> packets;
    std::vector<SkippedRecord> skipped; // malformed records
    int64_t other_protocol = 0;         // well-formed but not TCP/UDP
    int64_t fragments = 0;              // PCAP: IPv4 fragments
    int64_t truncated = 0;              // PCAP: capture too short for headers
};

// JSONL: one object per line, keys ts, src, dst, sport, dport, proto
// ("tcp"|"udp"), len. PCAP: classic savefile, magic 0xa1b2c3d4 either byte
// order, Ethernet link type, IPv4 only; length is the transport payload size.
// Throws std::runtime_error when the stream itself is unusable (bad magic,
// non-Ethernet link type).
ParseReport parse_packet_log(std::istream& in, LogFormat format);

// One flow per distinct directional five-tuple, emitted in order of first
// appearance; packets within a flow stable-sorted by timestamp.
std::vector<FlowSequence> assemble_flows(const std::vector<PacketRecord>& packets);

// Head-truncates to kHeadPackets before measuring duration, so lengths,
// duration and mean interval all describe the same window. Throws on an
// empty flow.
RawSequence derive_raw_sequence(const FlowSequence& flow);

NormalizedSequence normalize_sequence(const RawSequence& raw);

int length_bucket(int length);

} // namespace etguard::ingest
