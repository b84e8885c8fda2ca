#include "etguard/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <stdexcept>

#include <json.hpp>

namespace etguard::ingest {

namespace {

using nlohmann::json;

bool valid_port(const json& v) {
    return v.is_number_integer() && v.get<int64_t>() >= 0 && v.get<int64_t>() <= 65535;
}

// Returns an error string, or empty on success.
std::string packet_from_json(const json& j, PacketRecord& out, bool& other_proto) {
    other_proto = false;
    if (!j.is_object()) return "not an object";
    for (const char* key : {"ts", "src", "dst", "sport", "dport", "proto", "len"})
        if (!j.contains(key)) return std::string("missing key ") + key;
    if (!j["ts"].is_number()) return "ts not a number";
    const double ts = j["ts"].get<double>();
    if (!std::isfinite(ts) || ts < 0.0) return "ts out of range";
    if (!j["src"].is_string() || !j["dst"].is_string()) return "src/dst not strings";
    if (!valid_port(j["sport"]) || !valid_port(j["dport"])) return "port out of range";
    if (!j["proto"].is_string()) return "proto not a string";
    if (!j["len"].is_number_integer()) return "len not an integer";
    const int64_t len = j["len"].get<int64_t>();
    if (len < 0 || len > 65535) return "len out of range";

    const std::string proto = j["proto"].get<std::string>();
    if (proto == "tcp") {
        out.protocol = Protocol::TCP;
    } else if (proto == "udp") {
        out.protocol = Protocol::UDP;
    } else {
        other_proto = true;
        return {};
    }
    out.timestamp = ts;
    out.src_ip = j["src"].get<std::string>();
    out.dst_ip = j["dst"].get<std::string>();
    out.src_port = static_cast<int>(j["sport"].get<int64_t>());
    out.dst_port = static_cast<int>(j["dport"].get<int64_t>());
    out.length = static_cast<int>(len);
    return {};
}

ParseReport parse_jsonl(std::istream& in) {
    ParseReport rep;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            rep.skipped.push_back({lineno, "invalid json"});
            continue;
        }
        PacketRecord pkt;
        bool other = false;
        const std::string err = packet_from_json(j, pkt, other);
        if (!err.empty()) {
            rep.skipped.push_back({lineno, err});
        } else if (other) {
            ++rep.other_protocol;
        } else {
            rep.packets.push_back(std::move(pkt));
        }
    }
    return rep;
}

uint32_t rd32le(const uint8_t* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint32_t rd32be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

uint16_t net16(const uint8_t* p) {
    return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

ParseReport parse_pcap(std::istream& in) {
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
    if (buf.size() < 24) throw std::runtime_error("pcap: header truncated");
    const uint32_t magic_le = rd32le(buf.data());
    bool file_le;
    if (magic_le == 0xa1b2c3d4u) {
        file_le = true; // written little-endian
    } else if (magic_le == 0xd4c3b2a1u) {
        file_le = false;
    } else {
        throw std::runtime_error("pcap: bad magic");
    }
    auto rdu32 = [&](size_t off) { return file_le ? rd32le(buf.data() + off) : rd32be(buf.data() + off); };
    const uint32_t linktype = rdu32(20);
    if (linktype != 1) throw std::runtime_error("pcap: only ethernet link type supported");

    ParseReport rep;
    size_t off = 24;
    while (off + 16 <= buf.size()) {
        const int64_t rec_off = static_cast<int64_t>(off);
        const uint32_t ts_sec = rdu32(off);
        const uint32_t ts_usec = rdu32(off + 4);
        const uint32_t incl = rdu32(off + 8);
        off += 16;
        if (off + incl > buf.size()) {
            rep.skipped.push_back({rec_off, "record extends past end of file"});
            break;
        }
        const uint8_t* pkt = buf.data() + off;
        off += incl;

        if (incl < 14) {
            ++rep.truncated;
            continue;
        }
        const uint16_t ethertype = net16(pkt + 12);
        if (ethertype != 0x0800) {
            ++rep.other_protocol;
            continue;
        }
        const uint8_t* ip = pkt + 14;
        const size_t ip_avail = incl - 14;
        if (ip_avail < 20) {
            ++rep.truncated;
            continue;
        }
        const int version = ip[0] >> 4;
        const size_t ihl = static_cast<size_t>(ip[0] & 0x0f) * 4;
        if (version != 4 || ihl < 20) {
            rep.skipped.push_back({rec_off, "bad ipv4 header"});
            continue;
        }
        if (ip_avail < ihl) {
            ++rep.truncated;
            continue;
        }
        const uint16_t frag = net16(ip + 6);
        if ((frag & 0x2000) != 0 || (frag & 0x1fff) != 0) { // MF set or nonzero offset
            ++rep.fragments;
            continue;
        }
        const uint8_t proto = ip[9];
        if (proto != 6 && proto != 17) {
            ++rep.other_protocol;
            continue;
        }
        const uint16_t total_len = net16(ip + 2);
        if (total_len < ihl) {
            rep.skipped.push_back({rec_off, "ip total length below header length"});
            continue;
        }
        const uint8_t* tr = ip + ihl;
        const size_t tr_avail = ip_avail - ihl;
        size_t tr_hdr;
        if (proto == 6) {
            if (tr_avail < 20) {
                ++rep.truncated;
                continue;
            }
            tr_hdr = static_cast<size_t>((tr[12] >> 4)) * 4;
            if (tr_hdr < 20 || tr_avail < tr_hdr) {
                ++rep.truncated;
                continue;
            }
        } else {
            if (tr_avail < 8) {
                ++rep.truncated;
                continue;
            }
            tr_hdr = 8;
        }
        const int64_t payload = static_cast<int64_t>(total_len) - static_cast<int64_t>(ihl) -
                                static_cast<int64_t>(tr_hdr);
        if (payload < 0) {
            rep.skipped.push_back({rec_off, "transport header exceeds ip length"});
            continue;
        }

        PacketRecord out;
        out.timestamp = static_cast<double>(ts_sec) + static_cast<double>(ts_usec) * 1e-6;
        char addr[16];
        std::snprintf(addr, sizeof addr, "%u.%u.%u.%u", ip[12], ip[13], ip[14], ip[15]);
        out.src_ip = addr;
        std::snprintf(addr, sizeof addr, "%u.%u.%u.%u", ip[16], ip[17], ip[18], ip[19]);
        out.dst_ip = addr;
        out.src_port = net16(tr);
        out.dst_port = net16(tr + 2);
        out.protocol = proto == 6 ? Protocol::TCP : Protocol::UDP;
        out.length = static_cast<int>(std::min<int64_t>(payload, 65535));
        rep.packets.push_back(std::move(out));
    }
    if (off != buf.size() && off + 16 > buf.size() && off < buf.size())
        rep.skipped.push_back({static_cast<int64_t>(off), "trailing partial record header"});
    return rep;
}

} // namespace

ParseReport parse_packet_log(std::istream& in, LogFormat format) {
    if (!in) throw std::runtime_error("parse_packet_log: unreadable source");
    return format == LogFormat::JSONL ? parse_jsonl(in) : parse_pcap(in);
}

std::vector<FlowSequence> assemble_flows(const std::vector<PacketRecord>& packets) {
    std::vector<FlowSequence> flows;
    std::map<FlowKey, size_t> index;
    for (const PacketRecord& p : packets) {
        FlowKey key{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol};
        auto [it, fresh] = index.try_emplace(key, flows.size());
        if (fresh) flows.push_back(FlowSequence{std::move(key), {}, std::nullopt});
        flows[it->second].packets.push_back(p);
    }
    for (FlowSequence& f : flows)
        std::stable_sort(f.packets.begin(), f.packets.end(),
                         [](const PacketRecord& a, const PacketRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
    return flows;
}

RawSequence derive_raw_sequence(const FlowSequence& flow) {
    if (flow.packets.empty()) throw std::invalid_argument("derive_raw_sequence: empty flow");
    const size_t n = std::min<size_t>(flow.packets.size(), kHeadPackets);
    RawSequence raw;
    raw.lengths.reserve(n);
    for (size_t i = 0; i < n; ++i) raw.lengths.push_back(flow.packets[i].length);
    if (n > 1) {
        raw.duration = flow.packets[n - 1].timestamp - flow.packets[0].timestamp;
        raw.mean_interval = raw.duration / static_cast<double>(n - 1);
    }
    return raw;
}

int length_bucket(int length) {
    return std::min(kNumBuckets - 1, length / kBucketWidth);
}

NormalizedSequence normalize_sequence(const RawSequence& raw) {
    NormalizedSequence out;
    out.buckets.assign(kHeadPackets, kPaddingBucket);
    out.mask.assign(kHeadPackets, 0);
    const size_t n = std::min<size_t>(raw.lengths.size(), kHeadPackets);
    for (size_t i = 0; i < n; ++i) {
        out.buckets[i] = length_bucket(raw.lengths[i]);
        out.mask[i] = 1;
    }
    out.d_norm = std::log1p(std::max(0.0, raw.duration)) / std::log1p(kDurationCap);
    out.t_m_norm = std::log1p(std::max(0.0, raw.mean_interval)) / std::log1p(kGapCap);
    return out;
}

} // namespace etguard::ingest
