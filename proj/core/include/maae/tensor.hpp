#pragma once

#include <cassert>
#include <cstddef>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace maae {

using real = double;

/// Dense row-major tensor, NCHW convention for 4-D data.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), data_(numelOf(shape_), real{0}) {}

    Tensor(std::vector<int> shape, std::vector<real> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != numelOf(shape_))
            throw std::invalid_argument("Tensor: data size does not match shape");
    }

    static std::size_t numelOf(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d < 0) throw std::invalid_argument("Tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }

    static Tensor zerosLike(const Tensor& t) { return Tensor(t.shape_); }

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    real* data() { return data_.data(); }
    const real* data() const { return data_.data(); }
    std::vector<real>& raw() { return data_; }
    const std::vector<real>& raw() const { return data_; }

    real& operator[](std::size_t i) { return data_[i]; }
    real operator[](std::size_t i) const { return data_[i]; }

    // NCHW element access.
    real& at(int n, int c, int h, int w) {
        return data_[idx4(n, c, h, w)];
    }
    real at(int n, int c, int h, int w) const {
        return data_[idx4(n, c, h, w)];
    }
    real& at(int n, int c) { return data_[static_cast<std::size_t>(n) * shape_[1] + c]; }
    real at(int n, int c) const { return data_[static_cast<std::size_t>(n) * shape_[1] + c]; }

    Tensor reshaped(std::vector<int> shape) const {
        if (numelOf(shape) != data_.size())
            throw std::invalid_argument("Tensor: reshape changes element count");
        return Tensor(std::move(shape), data_);
    }

    void fill(real v) { std::fill(data_.begin(), data_.end(), v); }
    void setZero() { fill(real{0}); }

    Tensor& operator+=(const Tensor& o) {
        assert(o.numel() == numel());
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    Tensor& operator*=(real s) {
        for (real& v : data_) v *= s;
        return *this;
    }

    bool sameShape(const Tensor& o) const { return shape_ == o.shape_; }

private:
    std::size_t idx4(int n, int c, int h, int w) const {
        assert(shape_.size() == 4);
        return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    std::vector<int> shape_;
    std::vector<real> data_;
};

bool allFinite(const Tensor& t);

/// Fills with N(0, stddev) draws.
void fillNormal(Tensor& t, real stddev, std::mt19937_64& rng);

}  // namespace maae
