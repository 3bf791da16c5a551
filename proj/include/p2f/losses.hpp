#pragma once

#include <vector>

#include "p2f/tensor.hpp"

namespace p2f {

struct LossWeights {
    double lambda_ce = 2.0;
    double lambda_sdice = 5.0;
    double lambda_evi = 0.1;
    double no_object_coeff = 0.1;
};

// Mean over the given points of the negative Beta log-likelihood
//   -[lgamma(a+b) - lgamma(a) - lgamma(b) + (a-1) ln y + (b-1) ln(1-y)].
// Targets are clamped into [target_eps, 1-target_eps] first; with
// concentrations strictly > 1 the density is zero at exact-binary targets.
// Empty inputs yield an exact 0 scalar.
Tensor beta_nll(const Tensor& alpha, const Tensor& beta, const Tensor& y,
                double target_eps = 1e-3);

// 1 - (2 sum(p*y) + s) / (sum(p) + sum(y) + s), over the provided points.
Tensor dice_loss(const Tensor& p, const Tensor& y, double smoothing = 1.0);

// 0.5 * [ Dice(a/(a+b), y) + Dice(b/(a+b), 1-y) ].
Tensor symmetric_dice(const Tensor& alpha, const Tensor& beta, const Tensor& y,
                      double smoothing = 1.0);

// Mean cross-entropy over all masks. targets[i] in [0, C] where index C is
// no-object; no-object terms are weighted by no_object_coeff.
Tensor classification_ce(const Tensor& class_logits, const std::vector<std::size_t>& targets,
                         double no_object_coeff);

Tensor total_loss(const Tensor& ce, const Tensor& sdice, const Tensor& evi,
                  const LossWeights& weights);

}  // namespace p2f
