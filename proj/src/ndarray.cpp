#include "etguard/ndarray.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace etguard {

NdArray::NdArray(std::vector<int> shape, double fill) : shape_(std::move(shape)) {
    int64_t n = 1;
    for (int d : shape_) {
        if (d <= 0) throw std::invalid_argument("NdArray: non-positive dimension");
        n *= d;
    }
    if (shape_.empty()) throw std::invalid_argument("NdArray: empty shape");
    data_.assign(static_cast<size_t>(n), fill);
}

NdArray NdArray::scalar(double v) {
    NdArray a({1});
    a.data_[0] = v;
    return a;
}

NdArray NdArray::row(std::vector<double> values) {
    NdArray a;
    a.shape_ = {static_cast<int>(values.size())};
    a.data_ = std::move(values);
    if (a.data_.empty()) throw std::invalid_argument("NdArray::row: empty");
    return a;
}

NdArray NdArray::matrix(int rows, int cols, std::vector<double> values) {
    if (static_cast<int64_t>(values.size()) != static_cast<int64_t>(rows) * cols)
        throw std::invalid_argument("NdArray::matrix: value count mismatch");
    NdArray a;
    a.shape_ = {rows, cols};
    a.data_ = std::move(values);
    return a;
}

bool NdArray::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

void NdArray::fill(double v) {
    std::fill(data_.begin(), data_.end(), v);
}

std::string NdArray::shape_str() const {
    std::ostringstream oss;
    oss << "[";
    for (size_t i = 0; i < shape_.size(); ++i) oss << (i ? "," : "") << shape_[i];
    oss << "]";
    return oss.str();
}

void require_same_shape(const NdArray& a, const NdArray& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

} // namespace etguard
