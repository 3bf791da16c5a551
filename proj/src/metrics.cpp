#include "p2f/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "p2f/errors.hpp"

namespace p2f {

namespace {

using SegmentKey = std::uint64_t;  // class << 32 | instance

SegmentKey seg_key(std::uint16_t cls, std::uint16_t inst) {
    return (static_cast<SegmentKey>(cls) << 32) | inst;
}

int key_class(SegmentKey k) { return static_cast<int>(k >> 32); }

}  // namespace

PanopticAccumulator::PanopticAccumulator(std::vector<int> class_set)
    : class_set_(std::move(class_set)) {
    if (class_set_.empty()) throw DomainError("PanopticAccumulator: empty class set");
    for (int c : class_set_) stats_[c];
}

void PanopticAccumulator::add(const std::vector<std::uint16_t>& pred_class,
                              const std::vector<std::uint16_t>& pred_instance,
                              const std::vector<std::uint16_t>& gt_class,
                              const std::vector<std::uint16_t>& gt_instance,
                              const std::vector<std::uint8_t>& gt_void) {
    const std::size_t hw = gt_class.size();
    if (pred_class.size() != hw || pred_instance.size() != hw || gt_instance.size() != hw ||
        gt_void.size() != hw) {
        throw DimensionError("PanopticAccumulator: map size mismatch");
    }
    std::map<SegmentKey, std::size_t> pred_area, gt_area, pred_void;
    std::map<std::pair<SegmentKey, SegmentKey>, std::size_t> inter;
    for (std::size_t p = 0; p < hw; ++p) {
        const SegmentKey pk = seg_key(pred_class[p], pred_instance[p]);
        pred_area[pk] += 1;
        if (gt_void[p]) {
            pred_void[pk] += 1;
        } else {
            const SegmentKey gk = seg_key(gt_class[p], gt_instance[p]);
            gt_area[gk] += 1;
            inter[{pk, gk}] += 1;
        }
    }

    auto in_set = [&](int cls) {
        return std::find(class_set_.begin(), class_set_.end(), cls) != class_set_.end();
    };

    std::map<SegmentKey, bool> pred_matched, gt_matched;
    for (const auto& [pair, count] : inter) {
        const auto& [pk, gk] = pair;
        if (key_class(pk) != key_class(gk) || !in_set(key_class(pk))) continue;
        // Prediction pixels on void ground truth are excluded from the union.
        const double denom = static_cast<double>(pred_area[pk] - pred_void[pk] + gt_area[gk] -
                                                 count);
        const double iou = denom > 0.0 ? static_cast<double>(count) / denom : 0.0;
        if (iou > 0.5) {
            PanopticClassResult& s = stats_[key_class(pk)];
            s.tp += 1;
            s.iou_sum += iou;
            pred_matched[pk] = true;
            gt_matched[gk] = true;
        }
    }
    for (const auto& [gk, area] : gt_area) {
        (void)area;
        if (in_set(key_class(gk)) && !gt_matched.count(gk)) stats_[key_class(gk)].fn += 1;
    }
    for (const auto& [pk, area] : pred_area) {
        if (!in_set(key_class(pk)) || pred_matched.count(pk)) continue;
        if (2 * pred_void[pk] > area) continue;  // mostly void, not penalized
        stats_[key_class(pk)].fp += 1;
    }
}

PanopticResult PanopticAccumulator::finalize() const {
    PanopticResult result;
    for (const auto& [cls, s] : stats_) {
        PanopticClassResult out = s;
        const double denom = static_cast<double>(s.tp) + 0.5 * static_cast<double>(s.fp + s.fn);
        out.pq = denom > 0.0 ? s.iou_sum / denom : 0.0;
        out.sq = s.tp > 0 ? s.iou_sum / static_cast<double>(s.tp) : 0.0;
        out.rq = denom > 0.0 ? static_cast<double>(s.tp) / denom : 0.0;
        result.per_class[cls] = out;
        result.tp += s.tp;
        result.fp += s.fp;
        result.fn += s.fn;
        result.iou_sum += s.iou_sum;
    }
    const double denom =
        static_cast<double>(result.tp) + 0.5 * static_cast<double>(result.fp + result.fn);
    result.pq = denom > 0.0 ? result.iou_sum / denom : 0.0;
    result.sq = result.tp > 0 ? result.iou_sum / static_cast<double>(result.tp) : 0.0;
    result.rq = denom > 0.0 ? static_cast<double>(result.tp) / denom : 0.0;
    return result;
}

MeanIouAccumulator::MeanIouAccumulator(std::vector<int> class_set)
    : class_set_(std::move(class_set)) {
    if (class_set_.empty()) throw DomainError("MeanIouAccumulator: empty class set");
    for (int c : class_set_) inter_union_[c];
}

void MeanIouAccumulator::add(const std::vector<std::uint16_t>& pred_class,
                             const std::vector<std::uint16_t>& gt_class,
                             const std::vector<std::uint8_t>& gt_void) {
    if (pred_class.size() != gt_class.size() || gt_void.size() != gt_class.size()) {
        throw DimensionError("MeanIouAccumulator: map size mismatch");
    }
    for (std::size_t p = 0; p < gt_class.size(); ++p) {
        if (gt_void[p]) continue;
        for (int c : class_set_) {
            const bool in_pred = pred_class[p] == c;
            const bool in_gt = gt_class[p] == c;
            if (in_pred && in_gt) inter_union_.at(c).first += 1;
            if (in_pred || in_gt) inter_union_.at(c).second += 1;
        }
    }
}

double MeanIouAccumulator::finalize() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [cls, iu] : inter_union_) {
        (void)cls;
        if (iu.second == 0) continue;
        sum += static_cast<double>(iu.first) / static_cast<double>(iu.second);
        n += 1;
    }
    return n > 0 ? sum / static_cast<double>(n) : 0.0;
}

PixelAnomalyResult pixel_anomaly_metrics(const std::vector<double>& scores,
                                         const std::vector<std::uint8_t>& gt_anomaly,
                                         const std::vector<std::uint8_t>& roi) {
    if (scores.size() != gt_anomaly.size() || roi.size() != scores.size()) {
        throw DimensionError("pixel_anomaly_metrics: map size mismatch");
    }
    std::vector<std::pair<double, std::uint8_t>> pairs;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t p = 0; p < scores.size(); ++p) {
        if (!roi[p]) continue;
        pairs.emplace_back(scores[p], gt_anomaly[p]);
        if (gt_anomaly[p]) {
            ++n_pos;
        } else {
            ++n_neg;
        }
    }
    if (n_pos == 0) throw DataError("pixel_anomaly_metrics: no anomalous pixels in the roi");
    if (n_neg == 0) throw DataError("pixel_anomaly_metrics: no normal pixels in the roi");

    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    PixelAnomalyResult result;
    std::size_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    bool fpr95_found = false;
    for (std::size_t k = 0; k < pairs.size();) {
        // Consume the whole tie group so every curve point is a realizable
        // operating point.
        const double score = pairs[k].first;
        while (k < pairs.size() && pairs[k].first == score) {
            if (pairs[k].second) {
                ++tp;
            } else {
                ++fp;
            }
            ++k;
        }
        CurvePoint pt;
        pt.score = score;
        pt.tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        pt.fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        result.curve.push_back(pt);
        result.ap += (pt.tpr - prev_recall) * pt.precision;
        prev_recall = pt.tpr;
        if (!fpr95_found && pt.tpr >= 0.95) {
            result.fpr_at_95tpr = pt.fpr;
            fpr95_found = true;
        }
    }
    return result;
}

namespace {

double pixel_set_iou(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    std::size_t inter = 0, i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++inter;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    const std::size_t uni = a.size() + b.size() - inter;
    return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

double ap_at_threshold(const std::vector<std::size_t>& order,
                       const std::vector<InstanceDetection>& preds,
                       const std::vector<InstanceGroundTruth>& gts, double iou_threshold,
                       std::vector<InstanceMatch>* matches_out) {
    if (gts.empty()) return 0.0;
    std::vector<bool> gt_taken(gts.size(), false);
    std::size_t tp = 0, fp = 0;
    double ap = 0.0, prev_recall = 0.0;
    for (std::size_t idx : order) {
        const InstanceDetection& det = preds[idx];
        double best_iou = 0.0;
        std::size_t best_gt = gts.size();
        for (std::size_t g = 0; g < gts.size(); ++g) {
            if (gt_taken[g] || gts[g].image != det.image) continue;
            const double iou = pixel_set_iou(det.pixels, gts[g].pixels);
            if (iou > best_iou) {
                best_iou = iou;
                best_gt = g;
            }
        }
        if (best_gt < gts.size() && best_iou > iou_threshold) {
            gt_taken[best_gt] = true;
            ++tp;
            if (matches_out != nullptr) matches_out->push_back({idx, best_gt, best_iou});
        } else {
            ++fp;
        }
        const double recall = static_cast<double>(tp) / static_cast<double>(gts.size());
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

}  // namespace

InstanceAnomalyResult instance_anomaly_ap(const std::vector<InstanceDetection>& preds,
                                          const std::vector<InstanceGroundTruth>& gts) {
    for (const InstanceDetection& det : preds) {
        if (!std::isfinite(det.confidence)) {
            throw DomainError("instance_anomaly_ap: non-finite confidence");
        }
        if (!std::is_sorted(det.pixels.begin(), det.pixels.end())) {
            throw DomainError("instance_anomaly_ap: pixel sets must be sorted");
        }
    }
    for (const InstanceGroundTruth& gt : gts) {
        if (!std::is_sorted(gt.pixels.begin(), gt.pixels.end())) {
            throw DomainError("instance_anomaly_ap: pixel sets must be sorted");
        }
    }
    std::vector<std::size_t> order(preds.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (preds[a].confidence != preds[b].confidence) {
            return preds[a].confidence > preds[b].confidence;
        }
        return a < b;
    });

    InstanceAnomalyResult result;
    result.ap50 = ap_at_threshold(order, preds, gts, 0.5, &result.matches);
    double sum = 0.0;
    int count = 0;
    for (int t = 50; t <= 95; t += 5) {
        sum += ap_at_threshold(order, preds, gts, static_cast<double>(t) / 100.0, nullptr);
        ++count;
    }
    result.ap = sum / static_cast<double>(count);
    return result;
}

}  // namespace p2f
