#pragma once

// Dense row-major tensor. float for production storage, double for the
// test-side shadow path; reductions always accumulate in double.

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "convrank/common.hpp"
#include "convrank/rng.hpp"

namespace convrank {

template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), values_(checked_size(shape_), T(0)) {}

    TensorT(std::vector<std::size_t> shape, std::vector<T> values)
        : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != checked_size(shape_)) {
            throw DimensionError("tensor value count " + std::to_string(values_.size()) +
                                 " does not match shape " + shape_str());
        }
    }

    static TensorT scalar(T v) { return TensorT({1}, {v}); }

    static TensorT uniform(std::vector<std::size_t> shape, T lo, T hi, SplitMix64& rng) {
        TensorT t(std::move(shape));
        for (auto& v : t.values_) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::size_t rows() const {
        require_rank2("rows()");
        return shape_[0];
    }
    std::size_t cols() const {
        require_rank2("cols()");
        return shape_[1];
    }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }

    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    T& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
    const T& at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape_[i]);
        }
        s += "]";
        return s;
    }

    template <typename U>
    TensorT<U> cast() const {
        std::vector<U> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(values_[i]);
        return TensorT<U>(shape_, std::move(v));
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        if (shape.empty()) throw DimensionError("tensor shape must be non-empty");
        std::size_t n = 1;
        for (std::size_t d : shape) {
            if (d == 0) throw DimensionError("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    void require_rank2(const char* what) const {
        if (shape_.size() != 2) {
            throw DimensionError(std::string(what) + " needs a rank-2 tensor, got " + shape_str());
        }
    }

    std::vector<std::size_t> shape_;
    std::vector<T> values_;
};

using Tensor = TensorT<float>;

}  // namespace convrank
