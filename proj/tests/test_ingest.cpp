#include <doctest.h>

#include <cmath>
#include <array>
#include <sstream>

#include "etguard/ingest.hpp"
#include "etguard/rng.hpp"

using namespace etguard;
using namespace etguard::ingest;

namespace {

ParseReport parse_str(const std::string& text, LogFormat fmt) {
    std::istringstream in(text);
    return parse_packet_log(in, fmt);
}

// pcap fixture builders
void u16le(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back(v >> 8);
}
void u32le(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void u16be(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(v >> 8);
    b.push_back(v & 0xff);
}
void u32be(std::vector<uint8_t>& b, uint32_t v) {
    for (int i = 3; i >= 0; --i) b.push_back((v >> (8 * i)) & 0xff);
}

std::vector<uint8_t> pcap_header_le() {
    std::vector<uint8_t> b;
    u32le(b, 0xa1b2c3d4u);
    u16le(b, 2);
    u16le(b, 4);
    u32le(b, 0);
    u32le(b, 0);
    u32le(b, 65535);
    u32le(b, 1); // ethernet
    return b;
}

struct FrameOpts {
    uint8_t ip_proto = 6; // 6 tcp, 17 udp
    uint16_t ethertype = 0x0800;
    uint16_t frag = 0;
    int payload = 0;
    uint16_t sport = 443, dport = 50000;
    std::array<uint8_t, 4> src{10, 0, 0, 1}, dst{10, 0, 0, 2};
};

std::vector<uint8_t> build_frame(const FrameOpts& o) {
    std::vector<uint8_t> f(12, 0); // macs
    u16be(f, o.ethertype);
    if (o.ethertype != 0x0800) return f;
    const int trh = o.ip_proto == 6 ? 20 : (o.ip_proto == 17 ? 8 : 0);
    const uint16_t total = static_cast<uint16_t>(20 + trh + o.payload);
    f.push_back(0x45);
    f.push_back(0);
    u16be(f, total);
    u16be(f, 0x1234); // id
    u16be(f, o.frag);
    f.push_back(64); // ttl
    f.push_back(o.ip_proto);
    u16be(f, 0); // checksum
    for (uint8_t v : o.src) f.push_back(v);
    for (uint8_t v : o.dst) f.push_back(v);
    if (o.ip_proto == 6) {
        u16be(f, o.sport);
        u16be(f, o.dport);
        u32be(f, 1);
        u32be(f, 1);
        f.push_back(5 << 4); // data offset
        f.push_back(0x18);
        u16be(f, 1024);
        u16be(f, 0);
        u16be(f, 0);
    } else if (o.ip_proto == 17) {
        u16be(f, o.sport);
        u16be(f, o.dport);
        u16be(f, static_cast<uint16_t>(8 + o.payload));
        u16be(f, 0);
    }
    for (int i = 0; i < o.payload; ++i) f.push_back(0xab);
    return f;
}

void append_record(std::vector<uint8_t>& b, uint32_t sec, uint32_t usec,
                   const std::vector<uint8_t>& frame, int trim = 0) {
    u32le(b, sec);
    u32le(b, usec);
    const uint32_t incl = static_cast<uint32_t>(frame.size()) - trim;
    u32le(b, incl);
    u32le(b, static_cast<uint32_t>(frame.size()));
    b.insert(b.end(), frame.begin(), frame.end() - trim);
}

std::string bytes_to_str(const std::vector<uint8_t>& b) {
    return std::string(reinterpret_cast<const char*>(b.data()), b.size());
}

std::string jsonl_line(double ts, const std::string& src, const std::string& dst, int sport,
                       int dport, const std::string& proto, int len) {
    std::ostringstream os;
    os << "{\"ts\":" << ts << ",\"src\":\"" << src << "\",\"dst\":\"" << dst
       << "\",\"sport\":" << sport << ",\"dport\":" << dport << ",\"proto\":\"" << proto
       << "\",\"len\":" << len << "}\n";
    return os.str();
}

} // namespace

TEST_CASE("jsonl parse happy path and order") {
    CHECK(parse_str("", LogFormat::JSONL).packets.empty());

    std::string text = jsonl_line(1.5, "1.1.1.1", "2.2.2.2", 1000, 443, "tcp", 120) +
                       jsonl_line(1.25, "3.3.3.3", "2.2.2.2", 1001, 443, "udp", 90) +
                       jsonl_line(2.0, "1.1.1.1", "2.2.2.2", 1000, 443, "tcp", 64);
    const ParseReport rep = parse_str(text, LogFormat::JSONL);
    REQUIRE(rep.packets.size() == 3);
    CHECK(rep.skipped.empty());
    CHECK(rep.packets[0].timestamp == 1.5);
    CHECK(rep.packets[1].protocol == Protocol::UDP);
    CHECK(rep.packets[1].src_ip == "3.3.3.3");
    CHECK(rep.packets[2].length == 64);
    CHECK(rep.packets[0].src_port == 1000);
    CHECK(rep.packets[0].dst_port == 443);
}

TEST_CASE("jsonl malformed lines are reported with line numbers") {
    std::string text = jsonl_line(1, "a", "b", 1, 2, "tcp", 10) + "this is not json\n" +
                       jsonl_line(2, "a", "b", 1, 2, "tcp", 11) +
                       "{\"ts\":3,\"src\":\"a\"}\n" +
                       jsonl_line(4, "a", "b", 1, 2, "tcp", 12);
    const ParseReport rep = parse_str(text, LogFormat::JSONL);
    CHECK(rep.packets.size() == 3);
    REQUIRE(rep.skipped.size() == 2);
    CHECK(rep.skipped[0].location == 2);
    CHECK(rep.skipped[0].reason == "invalid json");
    CHECK(rep.skipped[1].location == 4);

    // field validation
    const ParseReport bad = parse_str(
        jsonl_line(-1, "a", "b", 1, 2, "tcp", 10) + jsonl_line(1, "a", "b", 70000, 2, "tcp", 10) +
            jsonl_line(1, "a", "b", 1, 2, "tcp", 70000),
        LogFormat::JSONL);
    CHECK(bad.packets.empty());
    CHECK(bad.skipped.size() == 3);
}

TEST_CASE("jsonl other protocols counted, blank lines ignored") {
    std::string text = jsonl_line(1, "a", "b", 0, 0, "icmp", 10) + "\n   \n" +
                       jsonl_line(2, "a", "b", 1, 2, "tcp", 10);
    const ParseReport rep = parse_str(text, LogFormat::JSONL);
    CHECK(rep.packets.size() == 1);
    CHECK(rep.other_protocol == 1);
    CHECK(rep.skipped.empty());
}

TEST_CASE("pcap parses ipv4 tcp and udp payload lengths") {
    std::vector<uint8_t> file = pcap_header_le();
    FrameOpts tcp;
    tcp.payload = 100;
    append_record(file, 10, 500000, build_frame(tcp));
    FrameOpts udp;
    udp.ip_proto = 17;
    udp.payload = 33;
    udp.sport = 53;
    append_record(file, 11, 0, build_frame(udp));

    const ParseReport rep = parse_str(bytes_to_str(file), LogFormat::PCAP);
    REQUIRE(rep.packets.size() == 2);
    CHECK(rep.packets[0].timestamp == doctest::Approx(10.5).epsilon(1e-9));
    CHECK(rep.packets[0].length == 100);
    CHECK(rep.packets[0].protocol == Protocol::TCP);
    CHECK(rep.packets[0].src_ip == "10.0.0.1");
    CHECK(rep.packets[0].dst_ip == "10.0.0.2");
    CHECK(rep.packets[0].src_port == 443);
    CHECK(rep.packets[0].dst_port == 50000);
    CHECK(rep.packets[1].length == 33);
    CHECK(rep.packets[1].protocol == Protocol::UDP);
    CHECK(rep.packets[1].src_port == 53);
}

TEST_CASE("pcap skips non ip, fragments, other transport, truncated") {
    std::vector<uint8_t> file = pcap_header_le();
    FrameOpts arp;
    arp.ethertype = 0x0806;
    append_record(file, 1, 0, build_frame(arp));
    FrameOpts frag;
    frag.frag = 0x2000; // more-fragments
    frag.payload = 10;
    append_record(file, 2, 0, build_frame(frag));
    FrameOpts offs;
    offs.frag = 0x00b9; // nonzero offset
    offs.payload = 10;
    append_record(file, 3, 0, build_frame(offs));
    FrameOpts icmp;
    icmp.ip_proto = 1;
    append_record(file, 4, 0, build_frame(icmp));
    FrameOpts cut;
    cut.payload = 40;
    append_record(file, 5, 0, build_frame(cut), 70); // tcp header incomplete
    FrameOpts ok;
    ok.payload = 7;
    append_record(file, 6, 0, build_frame(ok));

    const ParseReport rep = parse_str(bytes_to_str(file), LogFormat::PCAP);
    CHECK(rep.packets.size() == 1);
    CHECK(rep.packets[0].length == 7);
    CHECK(rep.other_protocol == 2); // arp + icmp
    CHECK(rep.fragments == 2);
    CHECK(rep.truncated == 1);
}

TEST_CASE("pcap byte swapped magic accepted, bad magic rejected") {
    // big-endian writer: every header field byte-swapped
    std::vector<uint8_t> file;
    u32be(file, 0xa1b2c3d4u);
    u16be(file, 2);
    u16be(file, 4);
    u32be(file, 0);
    u32be(file, 0);
    u32be(file, 65535);
    u32be(file, 1);
    FrameOpts o;
    o.payload = 5;
    const std::vector<uint8_t> frame = build_frame(o);
    u32be(file, 100);
    u32be(file, 250000);
    u32be(file, static_cast<uint32_t>(frame.size()));
    u32be(file, static_cast<uint32_t>(frame.size()));
    file.insert(file.end(), frame.begin(), frame.end());

    const ParseReport rep = parse_str(bytes_to_str(file), LogFormat::PCAP);
    REQUIRE(rep.packets.size() == 1);
    CHECK(rep.packets[0].timestamp == doctest::Approx(100.25).epsilon(1e-9));
    CHECK(rep.packets[0].length == 5);

    std::vector<uint8_t> bad = pcap_header_le();
    bad[0] = 0xde;
    std::istringstream bin(bytes_to_str(bad));
    CHECK_THROWS_AS(parse_packet_log(bin, LogFormat::PCAP), std::runtime_error);

    // non-ethernet link type
    std::vector<uint8_t> lt = pcap_header_le();
    lt[20] = 101; // raw ip
    std::istringstream lin(bytes_to_str(lt));
    CHECK_THROWS_AS(parse_packet_log(lin, LogFormat::PCAP), std::runtime_error);
}

namespace {

PacketRecord mk(double ts, const std::string& src, int sport, int len = 100,
                Protocol proto = Protocol::TCP) {
    PacketRecord p;
    p.timestamp = ts;
    p.src_ip = src;
    p.dst_ip = "9.9.9.9";
    p.src_port = sport;
    p.dst_port = 443;
    p.protocol = proto;
    p.length = len;
    return p;
}

// Independent grouping oracle: for each key in first-appearance order, gather
// (timestamp, input index) pairs and sort them; index order breaks ties.
std::vector<FlowSequence> oracle_flows(const std::vector<PacketRecord>& packets) {
    std::vector<FlowKey> keys;
    for (const PacketRecord& p : packets) {
        FlowKey k{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol};
        bool seen = false;
        for (const FlowKey& e : keys) seen = seen || e == k;
        if (!seen) keys.push_back(k);
    }
    std::vector<FlowSequence> out;
    for (const FlowKey& k : keys) {
        std::vector<std::pair<double, size_t>> order;
        for (size_t i = 0; i < packets.size(); ++i) {
            const PacketRecord& p = packets[i];
            if (FlowKey{p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.protocol} == k)
                order.emplace_back(p.timestamp, i);
        }
        std::sort(order.begin(), order.end());
        FlowSequence f;
        f.key = k;
        for (const auto& [ts, idx] : order) f.packets.push_back(packets[idx]);
        out.push_back(std::move(f));
    }
    return out;
}

bool same_packet(const PacketRecord& a, const PacketRecord& b) {
    return a.timestamp == b.timestamp && a.src_ip == b.src_ip && a.dst_ip == b.dst_ip &&
           a.src_port == b.src_port && a.dst_port == b.dst_port && a.protocol == b.protocol &&
           a.length == b.length;
}

} // namespace

TEST_CASE("assemble flows basic grouping and ordering") {
    CHECK(assemble_flows({}).empty());

    const std::vector<PacketRecord> pkts = {mk(1, "a", 1), mk(2, "b", 2), mk(3, "a", 1),
                                            mk(4, "b", 2), mk(5, "a", 1)};
    const auto flows = assemble_flows(pkts);
    REQUIRE(flows.size() == 2);
    CHECK(flows[0].key.src_ip == "a");
    CHECK(flows[0].packets.size() == 3);
    CHECK(flows[1].packets.size() == 2);

    const auto sorted = assemble_flows({mk(5.0, "a", 1, 10), mk(3.0, "a", 1, 20)});
    REQUIRE(sorted.size() == 1);
    CHECK(sorted[0].packets[0].timestamp == 3.0);
    CHECK(sorted[0].packets[1].timestamp == 5.0);
    CHECK(sorted[0].packets[1].length == 10);
}

TEST_CASE("assemble flows ties keep input order") {
    const std::vector<PacketRecord> pkts = {mk(1.0, "a", 1, 10), mk(1.0, "a", 1, 20),
                                            mk(1.0, "a", 1, 30)};
    const auto flows = assemble_flows(pkts);
    REQUIRE(flows.size() == 1);
    CHECK(flows[0].packets[0].length == 10);
    CHECK(flows[0].packets[1].length == 20);
    CHECK(flows[0].packets[2].length == 30);
}

TEST_CASE("assemble flows matches brute force oracle on random input") {
    RngState rng(4242);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<PacketRecord> pkts;
        const int n = 50 + static_cast<int>(rng.uniform_int(450));
        for (int i = 0; i < n; ++i) {
            const int key = static_cast<int>(rng.uniform_int(20));
            PacketRecord p = mk(static_cast<double>(rng.uniform_int(40)) * 0.25,
                                "h" + std::to_string(key % 5), 1000 + key,
                                static_cast<int>(rng.uniform_int(1500)),
                                key % 2 == 0 ? Protocol::TCP : Protocol::UDP);
            pkts.push_back(p);
        }
        const auto got = assemble_flows(pkts);
        const auto want = oracle_flows(pkts);
        REQUIRE(got.size() == want.size());
        size_t total = 0;
        for (size_t f = 0; f < got.size(); ++f) {
            CHECK(got[f].key == want[f].key);
            REQUIRE(got[f].packets.size() == want[f].packets.size());
            for (size_t i = 0; i < got[f].packets.size(); ++i)
                CHECK(same_packet(got[f].packets[i], want[f].packets[i]));
            total += got[f].packets.size();
        }
        CHECK(total == pkts.size());
    }
}

TEST_CASE("raw sequence derivation") {
    FlowSequence f;
    f.packets = {mk(0, "a", 1, 100), mk(1, "a", 1, 200), mk(3, "a", 1, 300)};
    const RawSequence raw = derive_raw_sequence(f);
    CHECK(raw.lengths == std::vector<int>{100, 200, 300});
    CHECK(raw.duration == 3.0);
    CHECK(raw.mean_interval == 1.5);

    FlowSequence one;
    one.packets = {mk(7, "a", 1, 55)};
    const RawSequence r1 = derive_raw_sequence(one);
    CHECK(r1.lengths.size() == 1);
    CHECK(r1.duration == 0.0);
    CHECK(r1.mean_interval == 0.0);

    FlowSequence empty;
    CHECK_THROWS_AS(derive_raw_sequence(empty), std::invalid_argument);
}

TEST_CASE("raw sequence truncates to head packets before timing") {
    FlowSequence f;
    for (int i = 0; i < 60; ++i) f.packets.push_back(mk(i * 0.5, "a", 1, i));
    const RawSequence raw = derive_raw_sequence(f);
    CHECK(raw.lengths.size() == 50);
    CHECK(raw.lengths.back() == 49);
    CHECK(raw.duration == doctest::Approx(24.5).epsilon(1e-12)); // packets 0..49
    CHECK(raw.mean_interval == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("raw sequence is permutation invariant for distinct timestamps") {
    std::vector<PacketRecord> pkts;
    for (int i = 0; i < 10; ++i) pkts.push_back(mk(i * 1.0, "a", 1, 100 + i));
    RngState rng(17);
    std::vector<PacketRecord> shuffled = pkts;
    rng.shuffle(shuffled);
    const RawSequence a = derive_raw_sequence(assemble_flows(pkts)[0]);
    const RawSequence b = derive_raw_sequence(assemble_flows(shuffled)[0]);
    CHECK(a.lengths == b.lengths);
    CHECK(a.duration == b.duration);
    CHECK(a.mean_interval == b.mean_interval);
}

TEST_CASE("length buckets") {
    CHECK(length_bucket(0) == 0);
    CHECK(length_bucket(23) == 0);
    CHECK(length_bucket(24) == 1);
    CHECK(length_bucket(1500) == 62);
    CHECK(length_bucket(1511) == 62);
    CHECK(length_bucket(1512) == 63);
    CHECK(length_bucket(100000) == 63);
}

TEST_CASE("normalize sequence padding and scaling") {
    RawSequence raw;
    raw.lengths = {0, 1500, 100000};
    raw.duration = 3.0;
    raw.mean_interval = 1.5;
    const NormalizedSequence n = normalize_sequence(raw);
    REQUIRE(n.buckets.size() == 50);
    REQUIRE(n.mask.size() == 50);
    CHECK(n.buckets[0] == 0);
    CHECK(n.buckets[1] == 62);
    CHECK(n.buckets[2] == 63);
    for (int i = 3; i < 50; ++i) {
        CHECK(n.buckets[i] == kPaddingBucket);
        CHECK(n.mask[i] == 0);
    }
    CHECK(n.mask[0] == 1);
    CHECK(n.mask[2] == 1);
    CHECK(n.d_norm == doctest::Approx(std::log1p(3.0) / std::log1p(3600.0)).epsilon(1e-14));
    CHECK(n.t_m_norm == doctest::Approx(std::log1p(1.5) / std::log1p(60.0)).epsilon(1e-14));

    RawSequence zero;
    zero.lengths = {10};
    const NormalizedSequence nz = normalize_sequence(zero);
    CHECK(nz.d_norm == 0.0);
    CHECK(nz.t_m_norm == 0.0);

    RawSequence huge;
    huge.lengths.assign(50, 65535);
    huge.duration = 1e9;
    huge.mean_interval = 1e9;
    const NormalizedSequence nh = normalize_sequence(huge);
    CHECK(std::isfinite(nh.d_norm));
    CHECK(std::isfinite(nh.t_m_norm));
}
