#pragma once

#include <memory>
#include <string>
#include <vector>

#include "maae/tensor.hpp"

namespace maae {

/// A learnable tensor with its accumulated gradient.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    explicit Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

/// Saved activations for one forward pass. Layers push what their backward
/// needs; backward pops in reverse order. One backward per trace.
class Trace {
public:
    void push(Tensor t) { saved_.push_back(std::move(t)); }
    Tensor pop() {
        Tensor t = std::move(saved_.back());
        saved_.pop_back();
        return t;
    }
    bool empty() const { return saved_.empty(); }
    void clear() { saved_.clear(); }

private:
    std::vector<Tensor> saved_;
};

class Layer {
public:
    virtual ~Layer() = default;
    /// trace == nullptr means inference only (no backward possible).
    virtual Tensor forward(const Tensor& x, Trace* trace) = 0;
    /// Accumulates parameter gradients, returns gradient w.r.t. the input.
    virtual Tensor backward(const Tensor& gy, Trace& trace) = 0;
    virtual void collectParams(std::vector<Param*>& out) { (void)out; }
};

/// 2-D convolution, square kernel, isotropic stride/padding, im2col backed.
class Conv2d final : public Layer {
public:
    Conv2d(std::string name, int inCh, int outCh, int kernel, int stride, int padding);

    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;
    void collectParams(std::vector<Param*>& out) override;

    void initHe(std::mt19937_64& rng);

    int inChannels() const { return inCh_; }
    int outChannels() const { return outCh_; }
    int kernel() const { return kernel_; }
    int stride() const { return stride_; }
    int padding() const { return padding_; }

    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    int inCh_, outCh_, kernel_, stride_, padding_;
    Param weight_;  // {outCh, inCh, k, k}
    Param bias_;    // {outCh}
};

/// Fully connected layer over {N, D} inputs.
class Linear final : public Layer {
public:
    Linear(std::string name, int inDim, int outDim);

    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;
    void collectParams(std::vector<Param*>& out) override;

    void initHe(std::mt19937_64& rng);

    Param& weight() { return weight_; }
    Param& bias() { return bias_; }

private:
    int inDim_, outDim_;
    Param weight_;  // {outDim, inDim}
    Param bias_;    // {outDim}
};

class LeakyReLU final : public Layer {
public:
    explicit LeakyReLU(real slope = 0.2) : slope_(slope) {}
    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;

private:
    real slope_;
};

class Sigmoid final : public Layer {
public:
    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;
};

/// Nearest-neighbor 2x spatial upsampling.
class Upsample2x final : public Layer {
public:
    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;
};

/// {N,C,H,W} -> {N, C*H*W}.
class Flatten final : public Layer {
public:
    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;
};

class Sequential final : public Layer {
public:
    Sequential() = default;
    void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }

    Tensor forward(const Tensor& x, Trace* trace) override;
    Tensor backward(const Tensor& gy, Trace& trace) override;
    void collectParams(std::vector<Param*>& out) override;

    std::size_t size() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_[i]; }

    /// Forward through the first `count` layers only (classifier feature taps).
    Tensor forwardPrefix(const Tensor& x, std::size_t count, Trace* trace);

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

int convOutputSize(int inputSize, int kernel, int stride, int padding);

}  // namespace maae
