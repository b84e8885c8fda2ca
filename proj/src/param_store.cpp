#include "etguard/param_store.hpp"

#include "etguard/wire.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace etguard {


NdArray& ParamStore::create(const std::string& name, std::vector<int> shape) {
    if (entries_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    Entry e;
    e.value = NdArray(shape);
    e.grad = NdArray(shape);
    e.m = NdArray(shape);
    e.v = NdArray(std::move(shape));
    return entries_.emplace(name, std::move(e)).first->second.value;
}

NdArray& ParamStore::create_glorot(const std::string& name, int fan_in, int fan_out, RngState& rng) {
    NdArray& w = create(name, {fan_in, fan_out});
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform_range(-bound, bound);
    return w;
}

bool ParamStore::has(const std::string& name) const {
    return entries_.count(name) != 0;
}

NdArray& ParamStore::value(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return it->second.value;
}

const NdArray& ParamStore::value(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return it->second.value;
}

NdArray& ParamStore::grad(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return it->second.grad;
}

const NdArray& ParamStore::grad(const std::string& name) const {
    return const_cast<ParamStore*>(this)->grad(name);
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

int64_t ParamStore::total_size() const {
    int64_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
}

void ParamStore::zero_grads() {
    for (auto& [name, e] : entries_) e.grad.fill(0.0);
    grads_populated_ = false;
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
    if (!grads_populated_)
        throw std::logic_error("ParamStore::adam_step: gradients missing (no backward pass)");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    for (auto& [name, e] : entries_) {
        for (int64_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g;
            e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g * g;
            const double mhat = e.m[i] / bc1;
            const double vhat = e.v[i] / bc2;
            e.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
        e.grad.fill(0.0);
    }
    grads_populated_ = false;
}

void ParamStore::serialize(std::ostream& out) const {
    wire::write_u64(out, entries_.size());
    for (const auto& [name, e] : entries_) {
        wire::write_string(out, name);
        wire::write_u64(out, static_cast<uint64_t>(e.value.ndim()));
        for (int d : e.value.shape()) wire::write_u64(out, static_cast<uint64_t>(d));
        wire::write_f64_block(out, e.value.data());
        wire::write_f64_block(out, e.m.data());
        wire::write_f64_block(out, e.v.data());
    }
    wire::write_u64(out, static_cast<uint64_t>(step_));
}

ParamStore ParamStore::deserialize(std::istream& in) {
    ParamStore ps;
    const uint64_t count = wire::read_u64(in);
    if (count > 100000) throw std::runtime_error("ParamStore: implausible parameter count");
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = wire::read_string(in);
        const uint64_t ndim = wire::read_u64(in);
        if (ndim == 0 || ndim > 4) throw std::runtime_error("ParamStore: bad rank for " + name);
        std::vector<int> shape;
        for (uint64_t d = 0; d < ndim; ++d) {
            uint64_t dim = wire::read_u64(in);
            if (dim == 0 || dim > (1u << 24)) throw std::runtime_error("ParamStore: bad dim for " + name);
            shape.push_back(static_cast<int>(dim));
        }
        Entry e;
        e.value = NdArray(shape);
        e.grad = NdArray(shape);
        e.m = NdArray(shape);
        e.v = NdArray(shape);
        wire::read_f64_block(in, e.value.data());
        wire::read_f64_block(in, e.m.data());
        wire::read_f64_block(in, e.v.data());
        ps.entries_.emplace(std::move(name), std::move(e));
    }
    ps.step_ = static_cast<int64_t>(wire::read_u64(in));
    return ps;
}

bool ParamStore::bitwise_equal_values(const ParamStore& other) const {
    if (entries_.size() != other.entries_.size()) return false;
    auto it = entries_.begin();
    auto jt = other.entries_.begin();
    for (; it != entries_.end(); ++it, ++jt) {
        if (it->first != jt->first) return false;
        if (!it->second.value.same_shape(jt->second.value)) return false;
        if (std::memcmp(it->second.value.data().data(), jt->second.value.data().data(),
                        it->second.value.data().size() * sizeof(double)) != 0)
            return false;
    }
    return true;
}

} // namespace etguard
