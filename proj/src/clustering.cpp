#include "p2f/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "p2f/errors.hpp"

namespace p2f {

double calibrate_threshold(const std::vector<double>& uncertainties, double k_sigma,
                           bool* warned) {
    if (uncertainties.empty()) throw DomainError("calibrate_threshold: empty sample");
    double sum = 0.0;
    for (double u : uncertainties) sum += u;
    const double mean = sum / static_cast<double>(uncertainties.size());
    double sq = 0.0;
    for (double u : uncertainties) sq += (u - mean) * (u - mean);
    const double std_dev = std::sqrt(sq / static_cast<double>(uncertainties.size()));
    if (warned != nullptr) *warned = std_dev == 0.0;
    return mean + k_sigma * std_dev;
}

std::vector<std::size_t> select_uncertain(const std::vector<double>& uncertainty, double t) {
    std::vector<std::size_t> selected;
    for (std::size_t p = 0; p < uncertainty.size(); ++p) {
        if (uncertainty[p] > t) selected.push_back(p);
    }
    return selected;
}

std::vector<int> dbscan_cosine(const std::vector<double>& points, std::size_t dim, double eps,
                               std::size_t min_samples) {
    if (dim == 0) throw DomainError("dbscan_cosine: zero-dimensional points");
    if (points.size() % dim != 0) throw DimensionError("dbscan_cosine: ragged point array");
    if (!(eps > 0.0) || min_samples < 1) {
        throw DomainError("dbscan_cosine: eps must be > 0 and min_samples >= 1");
    }
    const std::size_t n = points.size() / dim;
    std::vector<double> norm(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) sq += points[i * dim + d] * points[i * dim + d];
        norm[i] = std::sqrt(sq);
    }
    auto neighbors = [&](std::size_t i) {
        std::vector<std::size_t> out;
        if (norm[i] == 0.0) return out;
        for (std::size_t j = 0; j < n; ++j) {
            if (norm[j] == 0.0) continue;
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) dot += points[i * dim + d] * points[j * dim + d];
            if (1.0 - dot / (norm[i] * norm[j]) <= eps) out.push_back(j);
        }
        return out;  // ascending; includes i itself
    };

    constexpr int kUnvisited = -2;
    std::vector<int> labels(n, kUnvisited);
    int cluster = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != kUnvisited) continue;
        const std::vector<std::size_t> seed_set = neighbors(i);
        if (seed_set.size() < min_samples) {
            labels[i] = -1;
            continue;
        }
        labels[i] = cluster;
        std::deque<std::size_t> queue(seed_set.begin(), seed_set.end());
        while (!queue.empty()) {
            const std::size_t q = queue.front();
            queue.pop_front();
            if (labels[q] == -1) labels[q] = cluster;  // border point
            if (labels[q] != kUnvisited) continue;
            labels[q] = cluster;
            const std::vector<std::size_t> nq = neighbors(q);
            if (nq.size() >= min_samples) queue.insert(queue.end(), nq.begin(), nq.end());
        }
        ++cluster;
    }
    return labels;
}

AnomalyInstances finalize_instances(const std::vector<int>& labels,
                                    const std::vector<std::size_t>& selected, Prediction& pred,
                                    int anomaly_class_id) {
    if (labels.size() != selected.size()) {
        throw DimensionError("finalize_instances: labels/selected length mismatch");
    }
    AnomalyInstances out;
    int n_clusters = 0;
    for (int l : labels) n_clusters = std::max(n_clusters, l + 1);
    out.instances.resize(static_cast<std::size_t>(n_clusters));
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (labels[k] < 0) {
            out.outliers_reassigned += 1;  // keeps its pre-threshold class/instance
        } else {
            out.instances[static_cast<std::size_t>(labels[k])].pixels.push_back(selected[k]);
        }
    }
    std::uint16_t next_instance = 0;
    for (std::uint16_t id : pred.seg_instance) next_instance = std::max(next_instance, id);
    for (AnomalyInstance& inst : out.instances) {
        double u_sum = 0.0;
        for (std::size_t p : inst.pixels) u_sum += pred.uncertainty[p];
        const double u_mean = u_sum / static_cast<double>(inst.pixels.size());
        inst.confidence = std::clamp(1.0 + u_mean, 0.0, 1.0);
        ++next_instance;
        for (std::size_t p : inst.pixels) {
            pred.seg_class[p] = static_cast<std::uint16_t>(anomaly_class_id);
            pred.seg_instance[p] = next_instance;
        }
    }
    return out;
}

}  // namespace p2f
