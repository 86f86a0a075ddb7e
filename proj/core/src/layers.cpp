#include "maae/layers.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace maae {

namespace {

using MatRM = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using CMapRM = Eigen::Map<const MatRM>;

// cols: {inCh*k*k, N*oh*ow}, row index = (ic*k + ky)*k + kx,
// column index = (n*oh + oy)*ow + ox.
void im2col(const Tensor& x, int kernel, int stride, int padding,
            int oh, int ow, Tensor& cols) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int rows = C * kernel * kernel;
    const std::size_t L = static_cast<std::size_t>(N) * oh * ow;
    real* cp = cols.data();
    for (int n = 0; n < N; ++n) {
        for (int ic = 0; ic < C; ++ic) {
            const real* xp = x.data() + (static_cast<std::size_t>(n) * C + ic) * H * W;
            for (int ky = 0; ky < kernel; ++ky) {
                for (int kx = 0; kx < kernel; ++kx) {
                    const int r = (ic * kernel + ky) * kernel + kx;
                    real* dst = cp + static_cast<std::size_t>(r) * L +
                                static_cast<std::size_t>(n) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= H) {
                            for (int ox = 0; ox < ow; ++ox) dst[oy * ow + ox] = 0;
                            continue;
                        }
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - padding + kx;
                            dst[oy * ow + ox] = (ix < 0 || ix >= W) ? 0 : xp[iy * W + ix];
                        }
                    }
                }
            }
        }
    }
    (void)rows;
}

// Scatter-add transpose of im2col.
void col2im(const Tensor& gcols, int kernel, int stride, int padding,
            int oh, int ow, Tensor& gx) {
    const int N = gx.dim(0), C = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
    const std::size_t L = static_cast<std::size_t>(N) * oh * ow;
    const real* cp = gcols.data();
    for (int n = 0; n < N; ++n) {
        for (int ic = 0; ic < C; ++ic) {
            real* xp = gx.data() + (static_cast<std::size_t>(n) * C + ic) * H * W;
            for (int ky = 0; ky < kernel; ++ky) {
                for (int kx = 0; kx < kernel; ++kx) {
                    const int r = (ic * kernel + ky) * kernel + kx;
                    const real* src = cp + static_cast<std::size_t>(r) * L +
                                      static_cast<std::size_t>(n) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride - padding + kx;
                            if (ix < 0 || ix >= W) continue;
                            xp[iy * W + ix] += src[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

// NCHW <-> (C x N*oh*ow) channel-major buffer used around the GEMMs.
void gatherChannels(const Tensor& t, Tensor& buf) {
    const int N = t.dim(0), C = t.dim(1), HW = t.dim(2) * t.dim(3);
    const std::size_t L = static_cast<std::size_t>(N) * HW;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const real* src = t.data() + (static_cast<std::size_t>(n) * C + c) * HW;
            real* dst = buf.data() + static_cast<std::size_t>(c) * L + static_cast<std::size_t>(n) * HW;
            std::copy(src, src + HW, dst);
        }
}

void scatterChannels(const Tensor& buf, Tensor& t) {
    const int N = t.dim(0), C = t.dim(1), HW = t.dim(2) * t.dim(3);
    const std::size_t L = static_cast<std::size_t>(N) * HW;
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c) {
            const real* src = buf.data() + static_cast<std::size_t>(c) * L + static_cast<std::size_t>(n) * HW;
            real* dst = t.data() + (static_cast<std::size_t>(n) * C + c) * HW;
            std::copy(src, src + HW, dst);
        }
}

Tensor shapeTensor(const std::vector<int>& shape) {
    Tensor t({static_cast<int>(shape.size())});
    for (std::size_t i = 0; i < shape.size(); ++i) t[i] = static_cast<real>(shape[i]);
    return t;
}

std::vector<int> shapeFromTensor(const Tensor& t) {
    std::vector<int> s(t.numel());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<int>(t[i]);
    return s;
}

}  // namespace

int convOutputSize(int inputSize, int kernel, int stride, int padding) {
    return (inputSize + 2 * padding - kernel) / stride + 1;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int inCh, int outCh, int kernel, int stride, int padding)
    : inCh_(inCh), outCh_(outCh), kernel_(kernel), stride_(stride), padding_(padding),
      weight_(name + ".w", {outCh, inCh, kernel, kernel}),
      bias_(name + ".b", {outCh}) {
    if (kernel < 1 || stride < 1 || padding < 0)
        throw std::invalid_argument("Conv2d: invalid geometry");
}

void Conv2d::initHe(std::mt19937_64& rng) {
    const real fanIn = static_cast<real>(inCh_ * kernel_ * kernel_);
    fillNormal(weight_.value, std::sqrt(2.0 / fanIn), rng);
    bias_.value.setZero();
}

Tensor Conv2d::forward(const Tensor& x, Trace* trace) {
    if (x.rank() != 4 || x.dim(1) != inCh_)
        throw std::invalid_argument("Conv2d: bad input shape");
    const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int oh = convOutputSize(H, kernel_, stride_, padding_);
    const int ow = convOutputSize(W, kernel_, stride_, padding_);
    if (oh < 1 || ow < 1) throw std::invalid_argument("Conv2d: empty output");
    const int R = inCh_ * kernel_ * kernel_;
    const std::size_t L = static_cast<std::size_t>(N) * oh * ow;

    Tensor cols({R, static_cast<int>(L)});
    im2col(x, kernel_, stride_, padding_, oh, ow, cols);

    Tensor ybuf({outCh_, static_cast<int>(L)});
    {
        CMapRM Wm(weight_.value.data(), outCh_, R);
        CMapRM Cm(cols.data(), R, static_cast<Eigen::Index>(L));
        MapRM Ym(ybuf.data(), outCh_, static_cast<Eigen::Index>(L));
        Ym.noalias() = Wm * Cm;
        for (int oc = 0; oc < outCh_; ++oc) Ym.row(oc).array() += bias_.value[oc];
    }
    Tensor y({N, outCh_, oh, ow});
    scatterChannels(ybuf, y);

    if (trace) {
        trace->push(shapeTensor(x.shape()));
        trace->push(std::move(cols));
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& gy, Trace& trace) {
    Tensor cols = trace.pop();
    std::vector<int> xShape = shapeFromTensor(trace.pop());
    const int N = gy.dim(0), oh = gy.dim(2), ow = gy.dim(3);
    const int R = inCh_ * kernel_ * kernel_;
    const std::size_t L = static_cast<std::size_t>(N) * oh * ow;

    Tensor gybuf({outCh_, static_cast<int>(L)});
    gatherChannels(gy, gybuf);

    CMapRM Gy(gybuf.data(), outCh_, static_cast<Eigen::Index>(L));
    CMapRM Cm(cols.data(), R, static_cast<Eigen::Index>(L));
    CMapRM Wm(weight_.value.data(), outCh_, R);

    MapRM gW(weight_.grad.data(), outCh_, R);
    gW.noalias() += Gy * Cm.transpose();
    // scalar reduction: Eigen's vectorized sum orders terms by buffer alignment,
    // which would make results depend on heap addresses
    for (int oc = 0; oc < outCh_; ++oc) {
        real s = 0;
        const real* row = gybuf.data() + static_cast<std::size_t>(oc) * L;
        for (std::size_t l = 0; l < L; ++l) s += row[l];
        bias_.grad[oc] += s;
    }

    Tensor gcols({R, static_cast<int>(L)});
    MapRM Gc(gcols.data(), R, static_cast<Eigen::Index>(L));
    Gc.noalias() = Wm.transpose() * Gy;

    Tensor gx(xShape);
    col2im(gcols, kernel_, stride_, padding_, oh, ow, gx);
    return gx;
}

void Conv2d::collectParams(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int inDim, int outDim)
    : inDim_(inDim), outDim_(outDim),
      weight_(name + ".w", {outDim, inDim}),
      bias_(name + ".b", {outDim}) {}

void Linear::initHe(std::mt19937_64& rng) {
    fillNormal(weight_.value, std::sqrt(2.0 / static_cast<real>(inDim_)), rng);
    bias_.value.setZero();
}

Tensor Linear::forward(const Tensor& x, Trace* trace) {
    if (x.rank() != 2 || x.dim(1) != inDim_)
        throw std::invalid_argument("Linear: bad input shape");
    const int N = x.dim(0);
    Tensor y({N, outDim_});
    CMapRM Xm(x.data(), N, inDim_);
    CMapRM Wm(weight_.value.data(), outDim_, inDim_);
    MapRM Ym(y.data(), N, outDim_);
    Ym.noalias() = Xm * Wm.transpose();
    for (int j = 0; j < outDim_; ++j) Ym.col(j).array() += bias_.value[j];
    if (trace) trace->push(x);
    return y;
}

Tensor Linear::backward(const Tensor& gy, Trace& trace) {
    Tensor x = trace.pop();
    const int N = x.dim(0);
    CMapRM Xm(x.data(), N, inDim_);
    CMapRM Gy(gy.data(), N, outDim_);
    CMapRM Wm(weight_.value.data(), outDim_, inDim_);
    MapRM gW(weight_.grad.data(), outDim_, inDim_);
    gW.noalias() += Gy.transpose() * Xm;
    // scalar reduction, see Conv2d::backward
    for (int j = 0; j < outDim_; ++j) {
        real s = 0;
        for (int n = 0; n < N; ++n) s += gy[static_cast<std::size_t>(n) * outDim_ + j];
        bias_.grad[j] += s;
    }
    Tensor gx({N, inDim_});
    MapRM Gx(gx.data(), N, inDim_);
    Gx.noalias() = Gy * Wm;
    return gx;
}

void Linear::collectParams(std::vector<Param*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// ---------------------------------------------------------------- activations

Tensor LeakyReLU::forward(const Tensor& x, Trace* trace) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.numel(); ++i)
        if (y[i] < 0) y[i] *= slope_;
    if (trace) trace->push(x);
    return y;
}

Tensor LeakyReLU::backward(const Tensor& gy, Trace& trace) {
    Tensor x = trace.pop();
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.numel(); ++i)
        if (x[i] < 0) gx[i] *= slope_;
    return gx;
}

Tensor Sigmoid::forward(const Tensor& x, Trace* trace) {
    Tensor y = x;
    for (std::size_t i = 0; i < y.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
    if (trace) trace->push(y);
    return y;
}

Tensor Sigmoid::backward(const Tensor& gy, Trace& trace) {
    Tensor y = trace.pop();
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.numel(); ++i) gx[i] *= y[i] * (1.0 - y[i]);
    return gx;
}

// ---------------------------------------------------------------- reshape ops

Tensor Upsample2x::forward(const Tensor& x, Trace* trace) {
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({N, C, 2 * H, 2 * W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w) {
                    const real v = x.at(n, c, h, w);
                    y.at(n, c, 2 * h, 2 * w) = v;
                    y.at(n, c, 2 * h, 2 * w + 1) = v;
                    y.at(n, c, 2 * h + 1, 2 * w) = v;
                    y.at(n, c, 2 * h + 1, 2 * w + 1) = v;
                }
    (void)trace;
    return y;
}

Tensor Upsample2x::backward(const Tensor& gy, Trace& trace) {
    (void)trace;
    const int N = gy.dim(0), C = gy.dim(1), H = gy.dim(2) / 2, W = gy.dim(3) / 2;
    Tensor gx({N, C, H, W});
    for (int n = 0; n < N; ++n)
        for (int c = 0; c < C; ++c)
            for (int h = 0; h < H; ++h)
                for (int w = 0; w < W; ++w)
                    gx.at(n, c, h, w) = gy.at(n, c, 2 * h, 2 * w) +
                                        gy.at(n, c, 2 * h, 2 * w + 1) +
                                        gy.at(n, c, 2 * h + 1, 2 * w) +
                                        gy.at(n, c, 2 * h + 1, 2 * w + 1);
    return gx;
}

Tensor Flatten::forward(const Tensor& x, Trace* trace) {
    if (trace) {
        Tensor s({x.rank()});
        for (int i = 0; i < x.rank(); ++i) s[i] = static_cast<real>(x.dim(i));
        trace->push(std::move(s));
    }
    return x.reshaped({x.dim(0), static_cast<int>(x.numel()) / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& gy, Trace& trace) {
    Tensor s = trace.pop();
    std::vector<int> shape(s.numel());
    for (std::size_t i = 0; i < shape.size(); ++i) shape[i] = static_cast<int>(s[i]);
    return gy.reshaped(std::move(shape));
}

// ---------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, Trace* trace) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, trace);
    return h;
}

Tensor Sequential::forwardPrefix(const Tensor& x, std::size_t count, Trace* trace) {
    Tensor h = x;
    for (std::size_t i = 0; i < count && i < layers_.size(); ++i)
        h = layers_[i]->forward(h, trace);
    return h;
}

Tensor Sequential::backward(const Tensor& gy, Trace& trace) {
    Tensor g = gy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
        g = (*it)->backward(g, trace);
    return g;
}

void Sequential::collectParams(std::vector<Param*>& out) {
    for (auto& l : layers_) l->collectParams(out);
}

}  // namespace maae
