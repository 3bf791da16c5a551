#include "p2f/evidence.hpp"

#include "p2f/errors.hpp"

namespace p2f {

EvidenceMaps compute_evidence(const MaskQueries& queries, const PixelEmbeddings& pixels) {
    if (queries.f_alpha.shape()[1] != pixels.features.shape()[0] ||
        queries.f_beta.shape()[1] != pixels.features.shape()[0]) {
        throw DimensionError("compute_evidence: query embedding dim " +
                             std::to_string(queries.f_alpha.shape()[1]) +
                             " does not match pixel embedding dim " +
                             std::to_string(pixels.features.shape()[0]));
    }
    EvidenceMaps ev;
    ev.alpha = add_scalar(softplus(matmul(queries.f_alpha, pixels.features)), 1.0);
    ev.beta = add_scalar(softplus(matmul(queries.f_beta, pixels.features)), 1.0);
    Tensor total = add(ev.alpha, ev.beta);
    ev.mask_prob = div(ev.alpha, total);
    ev.evi_uncertainty = neg(total);
    return ev;
}

Tensor expected_mask(const Tensor& alpha, const Tensor& beta) {
    for (double v : alpha.data()) {
        if (!(v > 0.0)) throw DomainError("expected_mask: nonpositive alpha " + std::to_string(v));
    }
    for (double v : beta.data()) {
        if (!(v > 0.0)) throw DomainError("expected_mask: nonpositive beta " + std::to_string(v));
    }
    return div(alpha, add(alpha, beta));
}

}  // namespace p2f
