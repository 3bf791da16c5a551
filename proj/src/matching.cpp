#include "p2f/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "p2f/errors.hpp"

namespace p2f {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Optimal value of a square assignment problem (shortest augmenting path
// with potentials, O(n^3)). cost(i, j) = get(i, j).
template <typename CostFn>
double assignment_value(std::size_t n, CostFn get) {
    if (n == 0) return 0.0;
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        match[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, kInf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = match[j0];
            double delta = kInf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = get(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    double total = 0.0;
    for (std::size_t j = 1; j <= n; ++j) total += get(match[j] - 1, j - 1);
    return total;
}

double dice_value(const std::vector<double>& p, const std::vector<double>& y, double smoothing) {
    double inter = 0.0, psum = 0.0, ysum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        inter += p[k] * y[k];
        psum += p[k];
        ysum += y[k];
    }
    return 1.0 - (2.0 * inter + smoothing) / (psum + ysum + smoothing);
}

}  // namespace

CostMatrix build_cost(const EvidenceMaps& evidence, const Tensor& class_logits,
                      const std::vector<BinaryMask>& gt_masks, const std::vector<int>& gt_classes,
                      const std::vector<std::size_t>& sample, double lambda_cls,
                      double lambda_sdice, double smoothing) {
    if (sample.empty()) throw DomainError("build_cost: empty sample");
    if (gt_masks.size() != gt_classes.size()) {
        throw DimensionError("build_cost: mask/class count mismatch");
    }
    const std::size_t n_masks = evidence.mask_prob.shape()[0];
    const std::size_t hw = evidence.mask_prob.shape()[1];
    const std::size_t n_cols = class_logits.shape()[1];
    const std::size_t l_x = gt_masks.size();

    // Class probabilities per predicted mask (softmax over C+1, values only).
    const auto& logits = class_logits.data();
    std::vector<double> probs(n_masks * n_cols);
    for (std::size_t i = 0; i < n_masks; ++i) {
        double mx = logits[i * n_cols];
        for (std::size_t c = 1; c < n_cols; ++c) mx = std::max(mx, logits[i * n_cols + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            probs[i * n_cols + c] = std::exp(logits[i * n_cols + c] - mx);
            z += probs[i * n_cols + c];
        }
        for (std::size_t c = 0; c < n_cols; ++c) probs[i * n_cols + c] /= z;
    }

    std::vector<double> gt_sampled(sample.size());
    std::vector<double> pred_sampled(sample.size());
    CostMatrix cm;
    cm.rows = n_masks;
    cm.cols = l_x;
    cm.costs.resize(n_masks * l_x);
    for (std::size_t j = 0; j < l_x; ++j) {
        if (gt_masks[j].size() != hw) throw DimensionError("build_cost: gt mask size mismatch");
        for (std::size_t k = 0; k < sample.size(); ++k) {
            gt_sampled[k] = static_cast<double>(gt_masks[j][sample[k]]);
        }
        for (std::size_t i = 0; i < n_masks; ++i) {
            for (std::size_t k = 0; k < sample.size(); ++k) {
                pred_sampled[k] = evidence.mask_prob.data()[i * hw + sample[k]];
            }
            const double cls_prob = probs[i * n_cols + static_cast<std::size_t>(gt_classes[j])];
            cm.costs[i * l_x + j] = lambda_cls * (-cls_prob) +
                                    lambda_sdice * dice_value(pred_sampled, gt_sampled, smoothing);
        }
    }
    return cm;
}

std::vector<std::pair<std::size_t, std::size_t>> hungarian(const CostMatrix& costs) {
    for (double c : costs.costs) {
        if (!std::isfinite(c)) throw DomainError("hungarian: non-finite cost entry");
    }
    const std::size_t n = std::max(costs.rows, costs.cols);
    if (n == 0) return {};
    // Square view with 0-cost padding cells; every perfect matching covers
    // exactly min(rows, cols) real cells.
    auto cell = [&](std::size_t i, std::size_t j) -> double {
        return (i < costs.rows && j < costs.cols) ? costs.at(i, j) : 0.0;
    };
    const double best = assignment_value(n, cell);
    const double tol = 1e-9 * std::max(1.0, std::abs(best));

    // Lexicographic reconstruction: fix rows in order, taking the smallest
    // column consistent with the optimal total.
    std::vector<std::size_t> col_of_row(n, n);
    std::vector<bool> col_used(n, false);
    double fixed_cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        // Remaining rows after i, remaining columns.
        std::vector<std::size_t> free_cols;
        for (std::size_t j = 0; j < n; ++j) {
            if (!col_used[j]) free_cols.push_back(j);
        }
        for (std::size_t j : free_cols) {
            double rest = 0.0;
            if (i + 1 < n) {
                std::vector<std::size_t> sub_cols;
                for (std::size_t jj : free_cols) {
                    if (jj != j) sub_cols.push_back(jj);
                }
                rest = assignment_value(n - i - 1, [&](std::size_t a, std::size_t b) {
                    return cell(i + 1 + a, sub_cols[b]);
                });
            }
            if (fixed_cost + cell(i, j) + rest <= best + tol) {
                col_of_row[i] = j;
                col_used[j] = true;
                fixed_cost += cell(i, j);
                break;
            }
        }
    }
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < costs.rows; ++i) {
        if (col_of_row[i] < costs.cols) pairs.emplace_back(i, col_of_row[i]);
    }
    return pairs;
}

std::vector<std::size_t> evidential_sample(const std::vector<double>& evi_uncertainty,
                                           std::size_t budget, SplitMix64& rng) {
    const std::size_t hw = evi_uncertainty.size();
    if (budget >= hw) {
        std::vector<std::size_t> all(hw);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    if (budget < 4) throw DomainError("evidential_sample: budget must be >= 4");

    const std::size_t top_k =
        static_cast<std::size_t>(std::ceil(0.75 * static_cast<double>(budget)));
    std::vector<std::size_t> order(hw);
    std::iota(order.begin(), order.end(), 0);
    // Highest uncertainty first (values are negative, so closest to zero);
    // tie-break on lower index makes the top set unique.
    auto more_uncertain = [&](std::size_t a, std::size_t b) {
        if (evi_uncertainty[a] != evi_uncertainty[b]) {
            return evi_uncertainty[a] > evi_uncertainty[b];
        }
        return a < b;
    };
    std::nth_element(order.begin(), order.begin() + top_k - 1, order.end(), more_uncertain);

    std::vector<std::uint8_t> in_top(hw, 0);
    for (std::size_t k = 0; k < top_k; ++k) in_top[order[k]] = 1;
    std::vector<std::size_t> rest;
    rest.reserve(hw - top_k);
    for (std::size_t p = 0; p < hw; ++p) {
        if (!in_top[p]) rest.push_back(p);
    }
    const std::size_t n_random = budget - top_k;
    for (std::size_t t = 0; t < n_random; ++t) {
        const std::size_t pick = t + rng.next_below(rest.size() - t);
        std::swap(rest[t], rest[pick]);
    }

    std::vector<std::size_t> result;
    result.reserve(budget);
    for (std::size_t p = 0; p < hw; ++p) {
        if (in_top[p]) result.push_back(p);
    }
    result.insert(result.end(), rest.begin(), rest.begin() + n_random);
    std::sort(result.begin(), result.end());
    return result;
}

std::vector<std::size_t> uniform_sample(std::size_t pixel_count, std::size_t budget,
                                        SplitMix64& rng) {
    if (budget >= pixel_count) {
        std::vector<std::size_t> all(pixel_count);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    std::vector<std::size_t> pool(pixel_count);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t t = 0; t < budget; ++t) {
        const std::size_t pick = t + rng.next_below(pool.size() - t);
        std::swap(pool[t], pool[pick]);
    }
    std::vector<std::size_t> result(pool.begin(), pool.begin() + budget);
    std::sort(result.begin(), result.end());
    return result;
}

}  // namespace p2f
