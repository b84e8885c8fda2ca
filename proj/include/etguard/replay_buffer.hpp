#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "etguard/rng.hpp"

namespace etguard::replay {

struct BufferEntry {
    std::vector<double> x; // detector input features
    int y = 0;             // 0 benign, 1 malicious
    std::vector<double> z; // detector logits recorded at insertion time

    bool operator==(const BufferEntry&) const = default;
};

// Fixed-capacity reservoir over the offered stream: every item ever offered
// has inclusion probability capacity/seen once the stream exceeds capacity.
class ReplayBuffer {
public:
    explicit ReplayBuffer(int64_t capacity);

    int64_t capacity() const { return capacity_; }
    int64_t size() const { return static_cast<int64_t>(entries_.size()); }
    int64_t seen() const { return seen_; }
    bool empty() const { return entries_.empty(); }
    const BufferEntry& entry(int64_t i) const { return entries_.at(static_cast<size_t>(i)); }

    // Reservoir step; always advances the stream counter. Returns whether the
    // entry was kept.
    bool offer(BufferEntry entry, RngState& rng);

    // Two independent with-replacement batches of size k (first fully drawn,
    // then the second). An empty buffer yields two empty batches without
    // touching the rng.
    std::pair<std::vector<BufferEntry>, std::vector<BufferEntry>> sample_two_batches(
        int64_t k, RngState& rng) const;

    void serialize(std::ostream& out) const;
    static ReplayBuffer deserialize(std::istream& in);

    bool operator==(const ReplayBuffer&) const = default;

private:
    int64_t capacity_ = 0;
    int64_t seen_ = 0;
    std::vector<BufferEntry> entries_;
};

} // namespace etguard::replay
