#pragma once

#include <cmath>
#include <vector>

#include "maae/layers.hpp"

namespace maae {

/// Adam with standard defaults (beta1=0.9, beta2=0.999, eps=1e-8).
class Adam {
public:
    explicit Adam(std::vector<Param*> params, real lr,
                  real beta1 = 0.9, real beta2 = 0.999, real eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (Param* p : params_) {
            m_.emplace_back(p->value.shape());
            v_.emplace_back(p->value.shape());
        }
    }

    void step() {
        ++t_;
        const real bc1 = 1.0 - std::pow(beta1_, static_cast<real>(t_));
        const real bc2 = 1.0 - std::pow(beta2_, static_cast<real>(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor& val = params_[i]->value;
            const Tensor& g = params_[i]->grad;
            Tensor& m = m_[i];
            Tensor& v = v_[i];
            for (std::size_t j = 0; j < val.numel(); ++j) {
                m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
                v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
                const real mhat = m[j] / bc1;
                const real vhat = v[j] / bc2;
                val[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    void zeroGrad() {
        for (Param* p : params_) p->grad.setZero();
    }

    long stepCount() const { return t_; }
    void setStepCount(long t) { t_ = t; }
    std::vector<Tensor>& firstMoments() { return m_; }
    std::vector<Tensor>& secondMoments() { return v_; }
    const std::vector<Param*>& params() const { return params_; }

private:
    std::vector<Param*> params_;
    real lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor> m_, v_;
};

inline void zeroGrads(const std::vector<Param*>& params) {
    for (Param* p : params) p->grad.setZero();
}

}  // namespace maae
