#include "etguard/replay_buffer.hpp"

#include <stdexcept>

#include "etguard/wire.hpp"

namespace etguard::replay {

ReplayBuffer::ReplayBuffer(int64_t capacity) : capacity_(capacity) {
    if (capacity < 0) throw std::invalid_argument("ReplayBuffer: negative capacity");
}

bool ReplayBuffer::offer(BufferEntry entry, RngState& rng) {
    bool kept = false;
    if (static_cast<int64_t>(entries_.size()) < capacity_) {
        entries_.push_back(std::move(entry));
        kept = true;
    } else {
        const uint64_t j = rng.uniform_int(static_cast<uint64_t>(seen_) + 1);
        if (j < static_cast<uint64_t>(capacity_)) {
            entries_[static_cast<size_t>(j)] = std::move(entry);
            kept = true;
        }
    }
    ++seen_;
    return kept;
}

std::pair<std::vector<BufferEntry>, std::vector<BufferEntry>> ReplayBuffer::sample_two_batches(
    int64_t k, RngState& rng) const {
    if (k < 0) throw std::invalid_argument("ReplayBuffer: negative batch size");
    std::pair<std::vector<BufferEntry>, std::vector<BufferEntry>> out;
    if (entries_.empty() || k == 0) return out;
    auto draw = [&](std::vector<BufferEntry>& batch) {
        batch.reserve(static_cast<size_t>(k));
        for (int64_t i = 0; i < k; ++i)
            batch.push_back(entries_[static_cast<size_t>(rng.uniform_int(entries_.size()))]);
    };
    draw(out.first);
    draw(out.second);
    return out;
}

void ReplayBuffer::serialize(std::ostream& out) const {
    wire::write_u64(out, static_cast<uint64_t>(capacity_));
    wire::write_u64(out, static_cast<uint64_t>(seen_));
    wire::write_u64(out, entries_.size());
    for (const BufferEntry& e : entries_) {
        wire::write_u64(out, e.x.size());
        wire::write_f64_block(out, e.x);
        wire::write_u64(out, static_cast<uint64_t>(e.y));
        wire::write_u64(out, e.z.size());
        wire::write_f64_block(out, e.z);
    }
}

ReplayBuffer ReplayBuffer::deserialize(std::istream& in) {
    const uint64_t capacity = wire::read_u64(in);
    if (capacity > (1u << 26)) throw std::runtime_error("ReplayBuffer: implausible capacity");
    ReplayBuffer buf(static_cast<int64_t>(capacity));
    buf.seen_ = static_cast<int64_t>(wire::read_u64(in));
    const uint64_t count = wire::read_u64(in);
    if (count > capacity) throw std::runtime_error("ReplayBuffer: entry count exceeds capacity");
    if (static_cast<int64_t>(count) > buf.seen_)
        throw std::runtime_error("ReplayBuffer: entry count exceeds stream count");
    for (uint64_t i = 0; i < count; ++i) {
        BufferEntry e;
        const uint64_t xn = wire::read_u64(in);
        if (xn > (1u << 16)) throw std::runtime_error("ReplayBuffer: implausible feature width");
        e.x.resize(xn);
        wire::read_f64_block(in, e.x);
        const uint64_t y = wire::read_u64(in);
        if (y > 1) throw std::runtime_error("ReplayBuffer: bad label");
        e.y = static_cast<int>(y);
        const uint64_t zn = wire::read_u64(in);
        if (zn > (1u << 16)) throw std::runtime_error("ReplayBuffer: implausible logit width");
        e.z.resize(zn);
        wire::read_f64_block(in, e.z);
        buf.entries_.push_back(std::move(e));
    }
    return buf;
}

} // namespace etguard::replay
