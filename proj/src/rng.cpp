#include "etguard/rng.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace etguard {

RngState::RngState(uint64_t seed) : engine_(seed) {}

uint64_t RngState::next_u64() {
    return engine_();
}

double RngState::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::uniform_range(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

uint64_t RngState::uniform_int(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_int: n must be >= 1");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngState::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // u1 in (0, 1] keeps the log finite
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

double RngState::normal(double mean, double stddev) {
    return mean + stddev * normal();
}

double RngState::exponential(double mean) {
    if (mean <= 0.0) throw std::invalid_argument("exponential: mean must be > 0");
    const double u = uniform(); // in [0,1); 1-u in (0,1]
    return -mean * std::log(1.0 - u);
}

uint64_t RngState::geometric_count(double mean) {
    if (mean < 1.0) throw std::invalid_argument("geometric_count: mean must be >= 1");
    const double p = 1.0 / mean;
    if (p >= 1.0) return 1;
    const double u = uniform();
    const double k = 1.0 + std::floor(std::log(1.0 - u) / std::log(1.0 - p));
    if (k < 1.0) return 1;
    if (k > 1e5) return 100000;
    return static_cast<uint64_t>(k);
}

std::string RngState::serialize() const {
    std::ostringstream oss;
    oss << engine_;
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(spare_));
    std::memcpy(&bits, &spare_, sizeof(bits));
    oss << " | " << (have_spare_ ? 1 : 0) << " " << bits;
    return oss.str();
}

RngState RngState::deserialize(const std::string& text) {
    const auto sep = text.rfind(" | ");
    if (sep == std::string::npos) throw std::runtime_error("RngState: corrupt state string");
    RngState rng;
    {
        std::istringstream iss(text.substr(0, sep));
        iss >> rng.engine_;
        if (iss.fail()) throw std::runtime_error("RngState: corrupt engine state");
    }
    {
        std::istringstream iss(text.substr(sep + 3));
        int have = 0;
        uint64_t bits = 0;
        iss >> have >> bits;
        if (iss.fail()) throw std::runtime_error("RngState: corrupt spare state");
        rng.have_spare_ = (have != 0);
        std::memcpy(&rng.spare_, &bits, sizeof(bits));
    }
    return rng;
}

} // namespace etguard
