#pragma once

#include <cstdint>
#include <map>
#include <vector>

namespace p2f {

struct PanopticClassResult {
    double iou_sum = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    double pq = 0.0, sq = 0.0, rq = 0.0;
};

struct PanopticResult {
    double pq = 0.0, sq = 0.0, rq = 0.0;
    double iou_sum = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0;
    std::map<int, PanopticClassResult> per_class;
};

// Segment-matching panoptic quality (IoU > 0.5 is a match; matched IoUs
// accumulate into SQ). Segments are (class, instance) pairs; instance 0
// means one amorphous segment per class. Void pixels are excluded from IoU
// denominators and unmatched predictions that are mostly void are not
// counted as false positives.
class PanopticAccumulator {
public:
    explicit PanopticAccumulator(std::vector<int> class_set);

    void add(const std::vector<std::uint16_t>& pred_class,
             const std::vector<std::uint16_t>& pred_instance,
             const std::vector<std::uint16_t>& gt_class,
             const std::vector<std::uint16_t>& gt_instance,
             const std::vector<std::uint8_t>& gt_void);

    PanopticResult finalize() const;

private:
    std::vector<int> class_set_;
    std::map<int, PanopticClassResult> stats_;
};

// Mean intersection-over-union of the semantic maps over the class set,
// skipping void pixels and classes absent from both maps.
class MeanIouAccumulator {
public:
    explicit MeanIouAccumulator(std::vector<int> class_set);
    void add(const std::vector<std::uint16_t>& pred_class,
             const std::vector<std::uint16_t>& gt_class,
             const std::vector<std::uint8_t>& gt_void);
    double finalize() const;

private:
    std::vector<int> class_set_;
    std::map<int, std::pair<std::size_t, std::size_t>> inter_union_;
};

struct CurvePoint {
    double score = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
    double precision = 0.0;
};

struct PixelAnomalyResult {
    double ap = 0.0;
    double fpr_at_95tpr = 0.0;
    std::vector<CurvePoint> curve;  // descending score thresholds
};

// Threshold sweep over the scores inside the region of interest; higher
// score = more anomalous. AP is the step-wise sum over distinct thresholds;
// FPR95 is read off the first point whose TPR reaches 0.95.
PixelAnomalyResult pixel_anomaly_metrics(const std::vector<double>& scores,
                                         const std::vector<std::uint8_t>& gt_anomaly,
                                         const std::vector<std::uint8_t>& roi);

struct InstanceDetection {
    std::size_t image = 0;
    std::vector<std::size_t> pixels;
    double confidence = 0.0;
};

struct InstanceGroundTruth {
    std::size_t image = 0;
    std::vector<std::size_t> pixels;
};

struct InstanceMatch {
    std::size_t pred = 0;  // indices into the input lists
    std::size_t gt = 0;
    double iou = 0.0;
};

struct InstanceAnomalyResult {
    double ap = 0.0;    // mean over IoU thresholds 0.50:0.05:0.95
    double ap50 = 0.0;  // fixed IoU threshold 0.5
    std::vector<InstanceMatch> matches;  // at the 0.5 threshold
};

// Greedy matching by descending confidence; a detection claims the best
// still-unmatched ground-truth instance of its image with IoU above the
// threshold.
InstanceAnomalyResult instance_anomaly_ap(const std::vector<InstanceDetection>& preds,
                                          const std::vector<InstanceGroundTruth>& gts);

}  // namespace p2f
