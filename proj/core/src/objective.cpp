#include "maae/objective.hpp"

#include <cmath>
#include <iostream>

namespace maae::objective {

namespace {

real clampProb(real p) {
    return std::min(1.0 - kProbEps, std::max(kProbEps, p));
}

void requireSameShape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.sameShape(b)) throw ConfigError(std::string(where) + ": shape mismatch");
}

int batchOf(const Tensor& t) { return t.rank() > 1 ? t.dim(0) : 1; }

}  // namespace

void LossWeights::validate() const {
    const real vals[] = {lambda1, lambda2, alpha1, alpha2, alpha3, alpha4, alpha5};
    for (real v : vals)
        if (!std::isfinite(v) || v < 0)
            throw ConfigError("LossWeights: weights must be finite and non-negative");
    if (!std::isfinite(delta)) throw ConfigError("LossWeights: delta must be finite");
}

real l1Mean(const Tensor& a, const Tensor& b) {
    requireSameShape(a, b, "l1Mean");
    real s = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<real>(a.numel());
}

Tensor l1MeanGrad(const Tensor& a, const Tensor& b) {
    requireSameShape(a, b, "l1MeanGrad");
    Tensor g(a.shape());
    const real inv = 1.0 / static_cast<real>(a.numel());
    for (std::size_t i = 0; i < a.numel(); ++i) {
        const real d = a[i] - b[i];
        g[i] = d > 0 ? inv : (d < 0 ? -inv : 0);
    }
    return g;
}

real klDivergence(const Tensor& mu, const Tensor& logvar) {
    requireSameShape(mu, logvar, "klDivergence");
    real s = 0;
    for (std::size_t i = 0; i < mu.numel(); ++i)
        s += 0.5 * (mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i]);
    return s / static_cast<real>(batchOf(mu));
}

std::pair<Tensor, Tensor> klDivergenceGrad(const Tensor& mu, const Tensor& logvar) {
    Tensor gmu(mu.shape()), glv(logvar.shape());
    const real inv = 1.0 / static_cast<real>(batchOf(mu));
    for (std::size_t i = 0; i < mu.numel(); ++i) {
        gmu[i] = mu[i] * inv;
        glv[i] = 0.5 * (std::exp(logvar[i]) - 1.0) * inv;
    }
    return {std::move(gmu), std::move(glv)};
}

real vaeLoss(const Tensor& x, const Tensor& xr, const Tensor& mu, const Tensor& logvar,
             real lambda1, real lambda2) {
    if (!allFinite(x) || !allFinite(xr) || !allFinite(mu) || !allFinite(logvar))
        throw ConfigError("vaeLoss: non-finite input");
    return lambda1 * klDivergence(mu, logvar) + lambda2 * l1Mean(x, xr);
}

std::pair<real, real> ganLosses(real dReal, real dFake) {
    if (dReal < 0 || dReal > 1 || dFake < 0 || dFake > 1)
        throw ConfigError("ganLosses: probabilities must lie in [0,1]");
    const real pr = clampProb(dReal), pf = clampProb(dFake);
    const real gan_d = -(std::log(pr) + std::log(1.0 - pf));
    const real gan_g = -std::log(pf);
    return {gan_d, gan_g};
}

std::pair<real, real> ganLossesBatch(const Tensor& dReal, const Tensor& dFake) {
    real lr = 0, lf = 0, lg = 0;
    for (std::size_t i = 0; i < dReal.numel(); ++i) lr += std::log(clampProb(dReal[i]));
    for (std::size_t i = 0; i < dFake.numel(); ++i) {
        const real p = clampProb(dFake[i]);
        lf += std::log(1.0 - p);
        lg += std::log(p);
    }
    const real gan_d = -(lr / static_cast<real>(dReal.numel()) +
                         lf / static_cast<real>(dFake.numel()));
    const real gan_g = -lg / static_cast<real>(dFake.numel());
    return {gan_d, gan_g};
}

Tensor ganGeneratorGrad(const Tensor& dFake) {
    Tensor g(dFake.shape());
    const real inv = 1.0 / static_cast<real>(dFake.numel());
    for (std::size_t i = 0; i < dFake.numel(); ++i) {
        const real p = dFake[i];
        g[i] = (p > kProbEps && p < 1.0 - kProbEps) ? -inv / p : 0;
    }
    return g;
}

std::pair<Tensor, Tensor> ganDiscriminatorGrad(const Tensor& dReal, const Tensor& dFake) {
    Tensor gr(dReal.shape()), gf(dFake.shape());
    const real invR = 1.0 / static_cast<real>(dReal.numel());
    const real invF = 1.0 / static_cast<real>(dFake.numel());
    for (std::size_t i = 0; i < dReal.numel(); ++i) {
        const real p = dReal[i];
        gr[i] = (p > kProbEps && p < 1.0 - kProbEps) ? -invR / p : 0;
    }
    for (std::size_t i = 0; i < dFake.numel(); ++i) {
        const real p = dFake[i];
        gf[i] = (p > kProbEps && p < 1.0 - kProbEps) ? invF / (1.0 - p) : 0;
    }
    return {std::move(gr), std::move(gf)};
}

real idLoss(const Tensor& fx, const Tensor& fgx) {
    requireSameShape(fx, fgx, "idLoss");
    real s = 0;
    for (std::size_t i = 0; i < fx.numel(); ++i) {
        const real d = fx[i] - fgx[i];
        s += d * d;
    }
    return s / static_cast<real>(fx.numel());
}

Tensor idLossGrad(const Tensor& fx, const Tensor& fgx) {
    requireSameShape(fx, fgx, "idLossGrad");
    Tensor g(fgx.shape());
    const real inv = 2.0 / static_cast<real>(fx.numel());
    for (std::size_t i = 0; i < fx.numel(); ++i) g[i] = (fgx[i] - fx[i]) * inv;
    return g;
}

real cycleLoss(const Tensor& x, const Tensor& xCycle, const Tensor& y, const Tensor& yCycle) {
    return l1Mean(xCycle, x) + l1Mean(yCycle, y);
}

namespace {

// mask entry for image n, pixel (h, w); mask is {H,W} or {N,H,W}.
real maskAt(const Tensor& mask, int n, int h, int w) {
    if (mask.rank() == 2) return mask[static_cast<std::size_t>(h) * mask.dim(1) + w];
    return mask[(static_cast<std::size_t>(n) * mask.dim(1) + h) * mask.dim(2) + w];
}

}  // namespace

real maskLoss(const Tensor& x, const Tensor& gx, const Tensor& mask) {
    requireSameShape(x, gx, "maskLoss");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    real s = 0;
    long count = 0;
    for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                if (maskAt(mask, n, h, w) > 0.5) continue;  // foreground unpenalized
                for (int c = 0; c < C; ++c)
                    s += std::abs(x.at(n, c, h, w) - gx.at(n, c, h, w));
                count += C;
            }
    if (count == 0) {
        std::cerr << "maskLoss: all-foreground mask, no background to preserve\n";
        return 0;
    }
    return s / static_cast<real>(count);
}

Tensor maskLossGrad(const Tensor& x, const Tensor& gx, const Tensor& mask) {
    requireSameShape(x, gx, "maskLossGrad");
    const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    long count = 0;
    for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w)
                if (maskAt(mask, n, h, w) <= 0.5) count += C;
    Tensor g(gx.shape());
    if (count == 0) return g;
    const real inv = 1.0 / static_cast<real>(count);
    for (int n = 0; n < N; ++n)
        for (int h = 0; h < H; ++h)
            for (int w = 0; w < W; ++w) {
                if (maskAt(mask, n, h, w) > 0.5) continue;
                for (int c = 0; c < C; ++c) {
                    const real d = gx.at(n, c, h, w) - x.at(n, c, h, w);
                    g.at(n, c, h, w) = d > 0 ? inv : (d < 0 ? -inv : 0);
                }
            }
    return g;
}

void totalLosses(LossReport& report, const LossWeights& w) {
    report.total_g = w.alpha1 * report.vae + w.alpha2 * report.gan_g +
                     w.alpha3 * report.id + w.alpha4 * report.cycle +
                     w.alpha5 * report.mask;
    report.total_d = w.alpha2 * report.gan_d;
}

}  // namespace maae::objective
