#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p2f/evidence.hpp"

namespace p2f {

struct FilterConfig {
    double object_mask_threshold = 0.5;
};

struct Prediction {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint16_t> seg_class;
    std::vector<std::uint16_t> seg_instance;  // 0 = none
    std::vector<double> uncertainty;          // in [-1, 0], closer to 0 = more uncertain
    std::vector<int> mask_class;              // winning real class per mask
    std::vector<double> mask_confidence;      // softmax prob of the winning class
    std::vector<std::size_t> filtered;        // rejected mask indices
    bool fallback_unfiltered = false;         // set when filtering rejected everything
    std::vector<std::size_t> low_mask_prob_pixels;  // won with expectation < 0.5 (diagnostic)
    std::vector<std::size_t> pixel_winner;    // winning mask index per pixel
};

// A mask is rejected iff its argmax column is no-object or its winning
// softmax probability is below the threshold (>= keeps). Returns ascending
// indices.
std::vector<std::size_t> filter_masks(const MaskQueries& queries, const FilterConfig& config);

// Per pixel: the surviving mask with the largest alpha wins (ties to the
// lowest index); uncertainty is minus the product of its winning-class
// probability and its Beta expectation at that pixel. Thing-class masks get
// dense instance ids in mask order. If every mask was filtered the full set
// is used and the prediction is flagged.
Prediction fuse_uncertainty(const EvidenceMaps& evidence, const MaskQueries& queries,
                            const std::vector<std::size_t>& filtered,
                            const std::vector<std::uint8_t>& is_thing_class, std::size_t height,
                            std::size_t width);

enum class Scorer { p2f, sml, mm, eam, rba, m2a };
Scorer scorer_from_name(const std::string& name);
std::string scorer_name(Scorer s);

// Per-class semantic logits L_c(x) = sum_i p_i(c) * m_i(x) over the real
// classes, [C, H*W] row-major. Shared by the baseline scorers.
std::vector<double> semantic_logits(const EvidenceMaps& evidence, const MaskQueries& queries);

struct LogitStats {
    std::vector<double> mu;     // per real class
    std::vector<double> sigma;  // population std; 1 substituted where degenerate
    std::vector<std::uint8_t> warned;
};

// Running statistics of the winning semantic logit, keyed by the argmax
// class, over a set of images.
class LogitStatsAccumulator {
public:
    explicit LogitStatsAccumulator(std::size_t n_classes);
    void add(const std::vector<double>& logits, std::size_t pixel_count);
    LogitStats finalize() const;

private:
    std::vector<double> sum_, sum_sq_;
    std::vector<std::size_t> count_;
};

// Anomaly score map (higher = more anomalous) for one of the comparison
// scorers; stats is only consulted for Scorer::sml.
std::vector<double> baseline_scores(Scorer kind, const EvidenceMaps& evidence,
                                    const MaskQueries& queries, const LogitStats* stats);

}  // namespace p2f
