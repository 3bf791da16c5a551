#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "p2f/evidence.hpp"
#include "p2f/rng.hpp"

namespace p2f {

// Rows are predicted masks, columns are ground-truth masks.
struct CostMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> costs;  // row-major

    double at(std::size_t i, std::size_t j) const { return costs[i * cols + j]; }
};

using BinaryMask = std::vector<std::uint8_t>;

// cost(i, j) = lambda_cls * (-softmax prob of class gt_classes[j] for mask i)
//            + lambda_sdice * Dice(mask_prob_i, gt_masks[j]) on the shared sample.
CostMatrix build_cost(const EvidenceMaps& evidence, const Tensor& class_logits,
                      const std::vector<BinaryMask>& gt_masks, const std::vector<int>& gt_classes,
                      const std::vector<std::size_t>& sample, double lambda_cls,
                      double lambda_sdice, double smoothing = 1.0);

// Minimum-total-cost injective matching covering min(rows, cols) pairs.
// Among optimal matchings, returns the lexicographically smallest by
// (row, then column). Result is sorted by row index.
std::vector<std::pair<std::size_t, std::size_t>> hungarian(const CostMatrix& costs);

// Picks ceil(0.75*budget) pixels with the highest evidential uncertainty
// (closest to zero; ties broken by lower index) and fills the rest uniformly
// without replacement. Returns ascending unique indices. budget >= pixel
// count returns every pixel.
std::vector<std::size_t> evidential_sample(const std::vector<double>& evi_uncertainty,
                                           std::size_t budget, SplitMix64& rng);

// Uniform sample of `budget` distinct pixel indices (ascending), used for the
// mask-agnostic matching cost.
std::vector<std::size_t> uniform_sample(std::size_t pixel_count, std::size_t budget,
                                        SplitMix64& rng);

}  // namespace p2f
