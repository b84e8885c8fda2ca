#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "etguard/ndarray.hpp"
#include "etguard/rng.hpp"

namespace etguard {

// Named parameters with paired gradient accumulators and Adam moment buffers.
// Iteration order is by name, so updates and serialization are deterministic.
class ParamStore {
public:
    NdArray& create(const std::string& name, std::vector<int> shape);
    // Glorot-uniform for matrices: +-sqrt(6 / (fan_in + fan_out))
    NdArray& create_glorot(const std::string& name, int fan_in, int fan_out, RngState& rng);

    bool has(const std::string& name) const;
    NdArray& value(const std::string& name);
    const NdArray& value(const std::string& name) const;
    NdArray& grad(const std::string& name);
    const NdArray& grad(const std::string& name) const;

    std::vector<std::string> names() const;
    int64_t total_size() const;

    void zero_grads();
    void note_backward() { grads_populated_ = true; }
    bool grads_populated() const { return grads_populated_; }

    // Standard Adam with bias correction; increments the step counter and
    // clears gradients. Throws if no backward pass populated them.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    int64_t step_count() const { return step_; }

    // Manifest of names/shapes followed by little-endian float64 blobs for
    // value, m and v of each parameter, then the step counter.
    void serialize(std::ostream& out) const;
    static ParamStore deserialize(std::istream& in);

    bool bitwise_equal_values(const ParamStore& other) const;

private:
    struct Entry {
        NdArray value, grad, m, v;
    };
    std::map<std::string, Entry> entries_;
    int64_t step_ = 0;
    bool grads_populated_ = false;
};

} // namespace etguard
