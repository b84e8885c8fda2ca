#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace etguard {

// Seedable generator with a fixed algorithm: mt19937_64 underneath, with all
// distribution transforms implemented here (the std:: distribution classes are
// implementation-defined, which would break cross-platform reproducibility).
// Same seed => same stream everywhere.
class RngState {
public:
    explicit RngState(uint64_t seed);

    uint64_t next_u64();

    // [0, 1), 53-bit resolution
    double uniform();
    double uniform_range(double lo, double hi);

    // [0, n), unbiased via rejection; n must be >= 1
    uint64_t uniform_int(uint64_t n);

    // standard normal via Box-Muller (second value cached)
    double normal();
    double normal(double mean, double stddev);

    // mean > 0
    double exponential(double mean);

    // geometric count >= 1 with the given mean (>= 1), inverse-CDF sampled
    uint64_t geometric_count(double mean);

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Textual state, portable across platforms (engine state is
    // standard-defined; the Box-Muller spare is carried as raw bits).
    std::string serialize() const;
    static RngState deserialize(const std::string& text);

private:
    RngState() = default;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace etguard
