#pragma once

#include <cstdint>
#include <vector>

#include "p2f/inference.hpp"

namespace p2f {

struct ClusterConfig {
    double k_sigma = 2.0;
    double eps = 0.04;
    std::size_t min_samples = 17;
};

// t = mean(U) + k_sigma * population-std(U). U is negative with 0 = most
// uncertain, so the threshold sits above the mean toward zero. A constant
// sample sets *warned and returns the mean.
double calibrate_threshold(const std::vector<double>& uncertainties, double k_sigma,
                           bool* warned = nullptr);

// Ascending indices of pixels with U strictly above t.
std::vector<std::size_t> select_uncertain(const std::vector<double>& uncertainty, double t);

// Classical DBSCAN under d(u, v) = 1 - cos(u, v). points is row-major
// [n, dim]. Returns a cluster id per point, -1 for outliers. Deterministic:
// seed points in ascending order, FIFO expansion, border points join the
// first cluster that reaches them. Zero-norm points are always outliers.
std::vector<int> dbscan_cosine(const std::vector<double>& points, std::size_t dim, double eps,
                               std::size_t min_samples);

struct AnomalyInstance {
    std::vector<std::size_t> pixels;  // ascending canvas indices
    double confidence = 0.0;          // clamp(1 + mean U, 0, 1)
};

struct AnomalyInstances {
    std::vector<AnomalyInstance> instances;
    std::size_t outliers_reassigned = 0;
};

// Turns clusters into anomaly instances and rewrites their pixels in the
// prediction to the given class with fresh instance ids; outlier pixels keep
// their pre-threshold assignment.
AnomalyInstances finalize_instances(const std::vector<int>& labels,
                                    const std::vector<std::size_t>& selected, Prediction& pred,
                                    int anomaly_class_id);

}  // namespace p2f
