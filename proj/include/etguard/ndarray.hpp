#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace etguard {

// Dense row-major array of doubles. Rank 1 or 2 is all the models here need.
class NdArray {
public:
    NdArray() = default;
    explicit NdArray(std::vector<int> shape, double fill = 0.0);
    static NdArray scalar(double v);
    static NdArray row(std::vector<double> values);
    static NdArray matrix(int rows, int cols, std::vector<double> values);

    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    const std::vector<int>& shape() const { return shape_; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }

    int rows() const { return shape_.empty() ? 0 : shape_[0]; }
    int cols() const { return ndim() < 2 ? 1 : shape_[1]; }

    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols() + c]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const NdArray& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    void fill(double v);

    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Throws std::invalid_argument naming `where` when the shapes differ.
void require_same_shape(const NdArray& a, const NdArray& b, const char* where);

} // namespace etguard
