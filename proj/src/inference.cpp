#include "p2f/inference.hpp"

#include <algorithm>
#include <cmath>

#include "p2f/errors.hpp"

namespace p2f {

namespace {

// Row-wise softmax of the class logits, values only.
std::vector<double> class_probs(const MaskQueries& queries) {
    const std::size_t n_m = queries.class_logits.shape()[0];
    const std::size_t n_cols = queries.class_logits.shape()[1];
    const std::vector<double>& logits = queries.class_logits.data();
    std::vector<double> probs(n_m * n_cols);
    for (std::size_t i = 0; i < n_m; ++i) {
        double mx = logits[i * n_cols];
        for (std::size_t c = 1; c < n_cols; ++c) mx = std::max(mx, logits[i * n_cols + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < n_cols; ++c) {
            probs[i * n_cols + c] = std::exp(logits[i * n_cols + c] - mx);
            z += probs[i * n_cols + c];
        }
        for (std::size_t c = 0; c < n_cols; ++c) probs[i * n_cols + c] /= z;
    }
    return probs;
}

}  // namespace

std::vector<std::size_t> filter_masks(const MaskQueries& queries, const FilterConfig& config) {
    if (!(config.object_mask_threshold > 0.0 && config.object_mask_threshold < 1.0)) {
        throw DomainError("filter_masks: object_mask_threshold must lie in (0, 1)");
    }
    const std::size_t n_m = queries.class_logits.shape()[0];
    const std::size_t n_cols = queries.class_logits.shape()[1];
    const std::vector<double> probs = class_probs(queries);
    std::vector<std::size_t> rejected;
    for (std::size_t i = 0; i < n_m; ++i) {
        std::size_t winner = 0;
        for (std::size_t c = 1; c < n_cols; ++c) {
            if (probs[i * n_cols + c] > probs[i * n_cols + winner]) winner = c;
        }
        if (winner == n_cols - 1 || probs[i * n_cols + winner] < config.object_mask_threshold) {
            rejected.push_back(i);
        }
    }
    return rejected;
}

Prediction fuse_uncertainty(const EvidenceMaps& evidence, const MaskQueries& queries,
                            const std::vector<std::size_t>& filtered,
                            const std::vector<std::uint8_t>& is_thing_class, std::size_t height,
                            std::size_t width) {
    const std::size_t n_m = evidence.alpha.shape()[0];
    const std::size_t hw = evidence.alpha.shape()[1];
    if (hw != height * width) throw DimensionError("fuse_uncertainty: resolution mismatch");
    const std::size_t n_cols = queries.class_logits.shape()[1];
    const std::size_t n_real = n_cols - 1;
    if (is_thing_class.size() < n_real) {
        throw DimensionError("fuse_uncertainty: is_thing_class too short");
    }
    const std::vector<double> probs = class_probs(queries);

    Prediction pred;
    pred.height = height;
    pred.width = width;
    pred.filtered = filtered;

    std::vector<std::uint8_t> rejected(n_m, 0);
    for (std::size_t i : filtered) rejected[i] = 1;
    std::vector<std::size_t> survivors;
    for (std::size_t i = 0; i < n_m; ++i) {
        if (!rejected[i]) survivors.push_back(i);
    }
    if (survivors.empty()) {
        pred.fallback_unfiltered = true;
        survivors.resize(n_m);
        for (std::size_t i = 0; i < n_m; ++i) survivors[i] = i;
    }

    // Winning real class and its probability, per mask.
    pred.mask_class.resize(n_m);
    pred.mask_confidence.resize(n_m);
    std::vector<std::uint16_t> instance_id(n_m, 0);
    std::uint16_t next_instance = 1;
    for (std::size_t i = 0; i < n_m; ++i) {
        std::size_t winner = 0;
        for (std::size_t c = 1; c < n_real; ++c) {
            if (probs[i * n_cols + c] > probs[i * n_cols + winner]) winner = c;
        }
        pred.mask_class[i] = static_cast<int>(winner);
        pred.mask_confidence[i] = probs[i * n_cols + winner];
    }
    for (std::size_t i : survivors) {
        if (is_thing_class[static_cast<std::size_t>(pred.mask_class[i])]) {
            instance_id[i] = next_instance++;
        }
    }

    pred.seg_class.resize(hw);
    pred.seg_instance.resize(hw);
    pred.uncertainty.resize(hw);
    pred.pixel_winner.resize(hw);
    const std::vector<double>& alpha = evidence.alpha.data();
    const std::vector<double>& beta = evidence.beta.data();
    for (std::size_t p = 0; p < hw; ++p) {
        std::size_t best = survivors[0];
        for (std::size_t k = 1; k < survivors.size(); ++k) {
            const std::size_t i = survivors[k];
            if (alpha[i * hw + p] > alpha[best * hw + p]) best = i;
        }
        const double a = alpha[best * hw + p];
        const double b = beta[best * hw + p];
        const double p_mask = a / (a + b);
        pred.pixel_winner[p] = best;
        pred.seg_class[p] = static_cast<std::uint16_t>(pred.mask_class[best]);
        pred.seg_instance[p] = instance_id[best];
        pred.uncertainty[p] = -pred.mask_confidence[best] * p_mask;
        if (p_mask < 0.5) pred.low_mask_prob_pixels.push_back(p);
    }
    return pred;
}

Scorer scorer_from_name(const std::string& name) {
    if (name == "p2f") return Scorer::p2f;
    if (name == "sml") return Scorer::sml;
    if (name == "mm") return Scorer::mm;
    if (name == "eam") return Scorer::eam;
    if (name == "rba") return Scorer::rba;
    if (name == "m2a") return Scorer::m2a;
    throw ConfigError("unknown scorer '" + name + "'");
}

std::string scorer_name(Scorer s) {
    switch (s) {
        case Scorer::p2f: return "p2f";
        case Scorer::sml: return "sml";
        case Scorer::mm: return "mm";
        case Scorer::eam: return "eam";
        case Scorer::rba: return "rba";
        default: return "m2a";
    }
}

std::vector<double> semantic_logits(const EvidenceMaps& evidence, const MaskQueries& queries) {
    const std::size_t n_m = evidence.mask_prob.shape()[0];
    const std::size_t hw = evidence.mask_prob.shape()[1];
    const std::size_t n_cols = queries.class_logits.shape()[1];
    const std::size_t n_real = n_cols - 1;
    const std::vector<double> probs = class_probs(queries);
    const std::vector<double>& masks = evidence.mask_prob.data();
    std::vector<double> logits(n_real * hw, 0.0);
    for (std::size_t c = 0; c < n_real; ++c) {
        for (std::size_t i = 0; i < n_m; ++i) {
            const double w = probs[i * n_cols + c];
            for (std::size_t p = 0; p < hw; ++p) {
                logits[c * hw + p] += w * masks[i * hw + p];
            }
        }
    }
    return logits;
}

LogitStatsAccumulator::LogitStatsAccumulator(std::size_t n_classes)
    : sum_(n_classes, 0.0), sum_sq_(n_classes, 0.0), count_(n_classes, 0) {}

void LogitStatsAccumulator::add(const std::vector<double>& logits, std::size_t pixel_count) {
    const std::size_t n_real = sum_.size();
    if (logits.size() != n_real * pixel_count) {
        throw DimensionError("LogitStatsAccumulator: logit map size mismatch");
    }
    for (std::size_t p = 0; p < pixel_count; ++p) {
        std::size_t winner = 0;
        for (std::size_t c = 1; c < n_real; ++c) {
            if (logits[c * pixel_count + p] > logits[winner * pixel_count + p]) winner = c;
        }
        const double v = logits[winner * pixel_count + p];
        sum_[winner] += v;
        sum_sq_[winner] += v * v;
        count_[winner] += 1;
    }
}

LogitStats LogitStatsAccumulator::finalize() const {
    LogitStats stats;
    const std::size_t n_real = sum_.size();
    stats.mu.resize(n_real);
    stats.sigma.resize(n_real);
    stats.warned.resize(n_real, 0);
    for (std::size_t c = 0; c < n_real; ++c) {
        if (count_[c] == 0) {
            stats.mu[c] = 0.0;
            stats.sigma[c] = 1.0;
            stats.warned[c] = 1;
            continue;
        }
        const double n = static_cast<double>(count_[c]);
        stats.mu[c] = sum_[c] / n;
        const double var = std::max(0.0, sum_sq_[c] / n - stats.mu[c] * stats.mu[c]);
        stats.sigma[c] = std::sqrt(var);
        if (stats.sigma[c] == 0.0) {
            stats.sigma[c] = 1.0;
            stats.warned[c] = 1;
        }
    }
    return stats;
}

std::vector<double> baseline_scores(Scorer kind, const EvidenceMaps& evidence,
                                    const MaskQueries& queries, const LogitStats* stats) {
    const std::size_t n_m = evidence.mask_prob.shape()[0];
    const std::size_t hw = evidence.mask_prob.shape()[1];
    const std::size_t n_cols = queries.class_logits.shape()[1];
    const std::size_t n_real = n_cols - 1;
    const std::vector<double>& masks = evidence.mask_prob.data();
    std::vector<double> scores(hw, 0.0);

    switch (kind) {
        case Scorer::mm: {
            for (std::size_t p = 0; p < hw; ++p) {
                double mx = masks[p];
                for (std::size_t i = 1; i < n_m; ++i) mx = std::max(mx, masks[i * hw + p]);
                scores[p] = -mx;
            }
            return scores;
        }
        case Scorer::eam: {
            const std::vector<double> probs = class_probs(queries);
            std::vector<double> max_prob(n_m);
            for (std::size_t i = 0; i < n_m; ++i) {
                double mx = probs[i * n_cols];
                for (std::size_t c = 1; c < n_real; ++c) {
                    mx = std::max(mx, probs[i * n_cols + c]);
                }
                max_prob[i] = mx;
            }
            for (std::size_t i = 0; i < n_m; ++i) {
                for (std::size_t p = 0; p < hw; ++p) {
                    scores[p] -= masks[i * hw + p] * max_prob[i];
                }
            }
            return scores;
        }
        case Scorer::rba: {
            const std::vector<double> logits = semantic_logits(evidence, queries);
            for (std::size_t c = 0; c < n_real; ++c) {
                for (std::size_t p = 0; p < hw; ++p) {
                    scores[p] -= std::tanh(logits[c * hw + p]);
                }
            }
            return scores;
        }
        case Scorer::m2a: {
            const std::vector<double> logits = semantic_logits(evidence, queries);
            for (std::size_t p = 0; p < hw; ++p) {
                double mx = logits[p];
                for (std::size_t c = 1; c < n_real; ++c) {
                    mx = std::max(mx, logits[c * hw + p]);
                }
                bool any_mask = false;
                for (std::size_t i = 0; i < n_m && !any_mask; ++i) {
                    any_mask = masks[i * hw + p] > 0.5;
                }
                scores[p] = (1.0 - mx) * (any_mask ? 1.0 : 0.0);
            }
            return scores;
        }
        case Scorer::sml: {
            if (stats == nullptr || stats->mu.size() != n_real) {
                throw DomainError("baseline_scores: sml requires per-class logit statistics");
            }
            const std::vector<double> logits = semantic_logits(evidence, queries);
            for (std::size_t p = 0; p < hw; ++p) {
                std::size_t winner = 0;
                for (std::size_t c = 1; c < n_real; ++c) {
                    if (logits[c * hw + p] > logits[winner * hw + p]) winner = c;
                }
                scores[p] = -(logits[winner * hw + p] - stats->mu[winner]) / stats->sigma[winner];
            }
            return scores;
        }
        default:
            throw DomainError("baseline_scores: p2f is the fused pipeline, not a baseline");
    }
}

}  // namespace p2f
