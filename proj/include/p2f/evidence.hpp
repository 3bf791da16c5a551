#pragma once

#include "p2f/tensor.hpp"

namespace p2f {

// Per-pixel embedding produced by the pixel decoder, channels x pixels,
// pixels in row-major (y-major) order.
struct PixelEmbeddings {
    Tensor features;  // [E, H*W]
};

// Learned per-mask query outputs. The last class-logit column is no-object.
struct MaskQueries {
    Tensor f_alpha;       // [N_M, E]
    Tensor f_beta;        // [N_M, E]
    Tensor class_logits;  // [N_M, C+1]
};

// Beta concentration fields and their derived quantities, mask-major.
// alpha, beta > 1 by construction, so mask_prob lies in (0, 1) and
// evi_uncertainty = -(alpha + beta) < -2.
struct EvidenceMaps {
    Tensor alpha;            // [N_M, H*W]
    Tensor beta;             // [N_M, H*W]
    Tensor mask_prob;        // [N_M, H*W]
    Tensor evi_uncertainty;  // [N_M, H*W]
};

// alpha = softplus(F_alpha . F_E) + 1, beta = softplus(F_beta . F_E) + 1,
// then the Beta expectation and the evidential uncertainty. Differentiable
// w.r.t. queries and pixel embeddings.
EvidenceMaps compute_evidence(const MaskQueries& queries, const PixelEmbeddings& pixels);

// Beta expectation alpha / (alpha + beta). Throws DomainError on
// nonpositive inputs.
Tensor expected_mask(const Tensor& alpha, const Tensor& beta);

}  // namespace p2f
