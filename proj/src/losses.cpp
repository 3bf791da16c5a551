#include "p2f/losses.hpp"

#include <string>

#include "p2f/errors.hpp"

namespace p2f {

Tensor beta_nll(const Tensor& alpha, const Tensor& beta, const Tensor& y, double target_eps) {
    if (alpha.shape() != beta.shape() || alpha.shape() != y.shape()) {
        throw DimensionError("beta_nll: alpha/beta/target shapes differ");
    }
    if (alpha.size() == 0) return Tensor::scalar(0.0);
    for (double v : alpha.data()) {
        if (!(v > 0.0)) throw DomainError("beta_nll: nonpositive alpha " + std::to_string(v));
    }
    for (double v : beta.data()) {
        if (!(v > 0.0)) throw DomainError("beta_nll: nonpositive beta " + std::to_string(v));
    }
    Tensor yc = clamp(y, target_eps, 1.0 - target_eps);
    Tensor one_minus = add_scalar(neg(yc), 1.0);
    Tensor log_lik = add(sub(lgamma(add(alpha, beta)), add(lgamma(alpha), lgamma(beta))),
                         add(mul(add_scalar(alpha, -1.0), log(yc)),
                             mul(add_scalar(beta, -1.0), log(one_minus))));
    return neg(mean(log_lik));
}

Tensor dice_loss(const Tensor& p, const Tensor& y, double smoothing) {
    if (p.shape() != y.shape()) throw DimensionError("dice_loss: shape mismatch");
    Tensor numer = add_scalar(mul_scalar(sum(mul(p, y)), 2.0), smoothing);
    Tensor denom = add_scalar(add(sum(p), sum(y)), smoothing);
    return add_scalar(neg(div(numer, denom)), 1.0);
}

Tensor symmetric_dice(const Tensor& alpha, const Tensor& beta, const Tensor& y, double smoothing) {
    Tensor total = add(alpha, beta);
    Tensor pos = div(alpha, total);
    Tensor negp = div(beta, total);
    Tensor y_inv = add_scalar(neg(y), 1.0);
    return mul_scalar(add(dice_loss(pos, y, smoothing), dice_loss(negp, y_inv, smoothing)), 0.5);
}

Tensor classification_ce(const Tensor& class_logits, const std::vector<std::size_t>& targets,
                         double no_object_coeff) {
    if (class_logits.shape().size() != 2) {
        throw DimensionError("classification_ce: logits must be [N_M, C+1]");
    }
    const std::size_t n_masks = class_logits.shape()[0];
    const std::size_t n_cols = class_logits.shape()[1];  // C + 1, last is no-object
    if (targets.size() != n_masks) {
        throw DimensionError("classification_ce: " + std::to_string(targets.size()) +
                             " targets for " + std::to_string(n_masks) + " masks");
    }
    std::vector<std::size_t> flat(n_masks);
    std::vector<double> weights(n_masks);
    for (std::size_t i = 0; i < n_masks; ++i) {
        if (targets[i] >= n_cols) {
            throw DimensionError("classification_ce: class id " + std::to_string(targets[i]) +
                                 " out of range for " + std::to_string(n_cols) + " classes");
        }
        flat[i] = i * n_cols + targets[i];
        weights[i] = (targets[i] == n_cols - 1) ? no_object_coeff : 1.0;
    }
    Tensor log_probs = gather(log_softmax_lastaxis(class_logits), flat);
    Tensor w = Tensor::from_data({n_masks}, std::move(weights));
    return mul_scalar(neg(sum(mul(log_probs, w))), 1.0 / static_cast<double>(n_masks));
}

Tensor total_loss(const Tensor& ce, const Tensor& sdice, const Tensor& evi,
                  const LossWeights& weights) {
    return add(add(mul_scalar(ce, weights.lambda_ce), mul_scalar(sdice, weights.lambda_sdice)),
               mul_scalar(evi, weights.lambda_evi));
}

}  // namespace p2f
