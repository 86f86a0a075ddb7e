#pragma once

#include <utility>

#include "maae/errors.hpp"
#include "maae/tensor.hpp"

namespace maae::objective {

inline constexpr real kProbEps = 1e-7;  // clamp inside logs

struct LossWeights {
    real lambda1 = 0.1;  // KL
    real lambda2 = 1.0;  // reconstruction
    real alpha1 = 1.0;   // VAE
    real alpha2 = 0.5;   // GAN
    real alpha3 = 0.5;   // ID
    real alpha4 = 1.0;   // cycle
    real alpha5 = 2.0;   // mask
    real delta = 5.0;    // attribute strength magnitude

    void validate() const;
};

struct LossReport {
    real vae = 0, gan_g = 0, gan_d = 0, id = 0, cycle = 0, mask = 0;
    real total_g = 0, total_d = 0;
};

/// Mean absolute pixel difference.
real l1Mean(const Tensor& a, const Tensor& b);
/// d l1Mean / d a.
Tensor l1MeanGrad(const Tensor& a, const Tensor& b);

/// Closed-form KL(q||N(0,I)) summed over latent dims, averaged over the batch
/// (batch = leading dimension when rank > 1, else a single sample).
real klDivergence(const Tensor& mu, const Tensor& logvar);
/// (d/dmu, d/dlogvar) of klDivergence.
std::pair<Tensor, Tensor> klDivergenceGrad(const Tensor& mu, const Tensor& logvar);

/// lambda1 * KL + lambda2 * L1(x, xr).
real vaeLoss(const Tensor& x, const Tensor& xr, const Tensor& mu, const Tensor& logvar,
             real lambda1, real lambda2);

/// (gan_d, gan_g) from probabilities; non-saturating generator form.
std::pair<real, real> ganLosses(real dReal, real dFake);
/// Batched means of the same terms; dReal/dFake are {N,1} probability tensors.
std::pair<real, real> ganLossesBatch(const Tensor& dReal, const Tensor& dFake);

/// d gan_g / d dFake for a batch of fake probabilities.
Tensor ganGeneratorGrad(const Tensor& dFake);
/// (d gan_d / d dReal, d gan_d / d dFake).
std::pair<Tensor, Tensor> ganDiscriminatorGrad(const Tensor& dReal, const Tensor& dFake);

/// Mean squared feature difference.
real idLoss(const Tensor& fx, const Tensor& fgx);
/// d idLoss / d fgx.
Tensor idLossGrad(const Tensor& fx, const Tensor& fgx);

/// L1(xCycle, x) + L1(yCycle, y).
real cycleLoss(const Tensor& x, const Tensor& xCycle, const Tensor& y, const Tensor& yCycle);

/// Mean absolute background difference; the mask comes from x and gates both
/// images. mask: {H,W} or {N,H,W} matching image batch shape {.,3,H,W}.
real maskLoss(const Tensor& x, const Tensor& gx, const Tensor& mask);
/// d maskLoss / d gx.
Tensor maskLossGrad(const Tensor& x, const Tensor& gx, const Tensor& mask);

/// Fills total_g / total_d from the component fields and the alpha weights.
void totalLosses(LossReport& report, const LossWeights& weights);

}  // namespace maae::objective
