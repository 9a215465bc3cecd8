#pragma once

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "bigat/errors.hpp"

namespace bigat::ad {

// Dense row-major shape descriptor. Rank 0 denotes a scalar (numel 1).
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int64_t> d) : dims_(d) { validate(); }
    explicit Shape(std::vector<int64_t> d) : dims_(std::move(d)) { validate(); }

    int64_t rank() const { return static_cast<int64_t>(dims_.size()); }

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : dims_) n *= d;
        return n;
    }

    int64_t operator[](int64_t i) const { return dims_[static_cast<size_t>(i)]; }
    const std::vector<int64_t>& dims() const { return dims_; }

    bool operator==(const Shape&) const = default;

    std::string str() const {
        std::string s = "[";
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    void validate() const {
        for (int64_t d : dims_)
            if (d <= 0) throw DimensionError("shape with non-positive extent " + str());
    }

    std::vector<int64_t> dims_;
};

// Dense multidimensional array of f64, row-major.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape)
        : shape_(std::move(shape)), v_(static_cast<size_t>(shape_.numel()), 0.0) {}

    static Tensor scalar(double v) {
        Tensor t{Shape{}};
        t.v_[0] = v;
        return t;
    }

    static Tensor full(Shape shape, double v) {
        Tensor t{std::move(shape)};
        std::fill(t.v_.begin(), t.v_.end(), v);
        return t;
    }

    static Tensor from(Shape shape, std::vector<double> values) {
        if (shape.numel() != static_cast<int64_t>(values.size()))
            throw DimensionError("tensor init: " + std::to_string(values.size()) +
                                 " values for shape " + shape.str());
        Tensor t;
        t.shape_ = std::move(shape);
        t.v_ = std::move(values);
        return t;
    }

    const Shape& shape() const { return shape_; }
    int64_t rank() const { return shape_.rank(); }
    int64_t numel() const { return static_cast<int64_t>(v_.size()); }
    bool empty() const { return v_.empty(); }

    double& operator[](int64_t i) { return v_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return v_[static_cast<size_t>(i)]; }

    double& at(int64_t i, int64_t j) { return v_[static_cast<size_t>(i * shape_[1] + j)]; }
    double at(int64_t i, int64_t j) const { return v_[static_cast<size_t>(i * shape_[1] + j)]; }

    double& at(int64_t i, int64_t j, int64_t k) {
        return v_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }
    double at(int64_t i, int64_t j, int64_t k) const {
        return v_[static_cast<size_t>((i * shape_[1] + j) * shape_[2] + k)];
    }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    double item() const {
        if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_.str());
        return v_[0];
    }

private:
    Shape shape_;
    std::vector<double> v_;
};

// Canonical order-independent sum: sorting by value makes the result a pure
// function of the multiset of summands. Used where reductions run over the
// pedestrian axis and bit-exact permutation equivariance is required.
inline double stable_sum(std::vector<double>& buf) {
    std::sort(buf.begin(), buf.end());
    double s = 0.0;
    for (double v : buf) s += v;
    return s;
}

} // namespace bigat::ad
