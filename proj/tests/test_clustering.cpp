#include <algorithm>
#include <cmath>
#include <set>

#include <doctest.h>

#include "p2f/clustering.hpp"
#include "p2f/errors.hpp"
#include "p2f/rng.hpp"

using namespace p2f;

namespace {

// Independent quadratic DBSCAN with the same determinism contract: seeds in
// ascending order, FIFO expansion, border points join the first cluster that
// reaches them. Written against the textbook formulation rather than the
// library internals.
std::vector<int> reference_dbscan(const std::vector<double>& pts, std::size_t dim, double eps,
                                  std::size_t min_samples) {
    const std::size_t n = pts.size() / dim;
    auto cosd = [&](std::size_t i, std::size_t j) {
        double dot = 0.0, ni = 0.0, nj = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            dot += pts[i * dim + d] * pts[j * dim + d];
            ni += pts[i * dim + d] * pts[i * dim + d];
            nj += pts[j * dim + d] * pts[j * dim + d];
        }
        if (ni == 0.0 || nj == 0.0) return 2.0;  // unreachable by definition
        return 1.0 - dot / std::sqrt(ni * nj);
    };
    auto region = [&](std::size_t i) {
        std::vector<std::size_t> r;
        for (std::size_t j = 0; j < n; ++j) {
            if (cosd(i, j) <= eps) r.push_back(j);
        }
        return r;
    };
    std::vector<int> label(n, -2);
    int c = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (label[i] != -2) continue;
        auto seeds = region(i);
        if (seeds.size() < min_samples) {
            label[i] = -1;
            continue;
        }
        label[i] = c;
        for (std::size_t k = 0; k < seeds.size(); ++k) {  // FIFO via index walk
            const std::size_t q = seeds[k];
            if (label[q] == -1) label[q] = c;
            if (label[q] != -2) continue;
            label[q] = c;
            auto nq = region(q);
            if (nq.size() >= min_samples) seeds.insert(seeds.end(), nq.begin(), nq.end());
        }
        ++c;
    }
    return label;
}

}  // namespace

TEST_CASE("calibrate_threshold is mean plus k population sigmas") {
    SUBCASE("worked example") {
        // mean -0.75, population std 0.1, k = 3.5 => -0.4
        const std::vector<double> u = {-0.85, -0.65, -0.85, -0.65};
        bool warned = true;
        CHECK(calibrate_threshold(u, 3.5, &warned) == doctest::Approx(-0.4).epsilon(1e-12));
        CHECK(!warned);
    }
    SUBCASE("population, not sample, std") {
        const std::vector<double> u = {1.0, 3.0};  // population std 1, sample std sqrt(2)
        CHECK(calibrate_threshold(u, 1.0) == doctest::Approx(3.0));
    }
    SUBCASE("monotone in k") {
        const std::vector<double> u = {-0.9, -0.7, -0.5};
        CHECK(calibrate_threshold(u, 1.0) < calibrate_threshold(u, 2.0));
        CHECK(calibrate_threshold(u, 2.0) < calibrate_threshold(u, 3.5));
    }
    SUBCASE("constant sample warns and returns the mean") {
        bool warned = false;
        CHECK(calibrate_threshold({-0.5, -0.5, -0.5}, 2.0, &warned) == doctest::Approx(-0.5));
        CHECK(warned);
    }
    SUBCASE("empty sample is rejected") {
        CHECK_THROWS_AS(calibrate_threshold({}, 2.0), DomainError);
    }
}

TEST_CASE("select_uncertain keeps strictly-above pixels in order") {
    const std::vector<double> u = {-0.9, -0.3, -0.5, -0.5, -0.1};
    CHECK(select_uncertain(u, -0.5) == std::vector<std::size_t>{1, 4});
    CHECK(select_uncertain(u, -1.5).size() == 5);
    CHECK(select_uncertain(u, 0.0).empty());
}

TEST_CASE("dbscan_cosine basics") {
    SUBCASE("30 identical directions form one cluster at min_samples 17") {
        std::vector<double> pts;
        for (int i = 0; i < 30; ++i) {
            pts.push_back(1.0 + 0.1 * i);  // same direction, varying magnitude
            pts.push_back(2.0 + 0.2 * i);
        }
        const std::vector<int> l = dbscan_cosine(pts, 2, 0.04, 17);
        for (int v : l) CHECK(v == 0);
    }
    SUBCASE("too few points are all outliers") {
        std::vector<double> pts(10 * 2, 1.0);
        const std::vector<int> l = dbscan_cosine(pts, 2, 0.04, 17);
        for (int v : l) CHECK(v == -1);
    }
    SUBCASE("orthogonal bundles become separate clusters") {
        std::vector<double> pts;
        for (int i = 0; i < 20; ++i) { pts.push_back(1.0); pts.push_back(0.0); }
        for (int i = 0; i < 20; ++i) { pts.push_back(0.0); pts.push_back(1.0); }
        const std::vector<int> l = dbscan_cosine(pts, 2, 0.04, 17);
        for (int i = 0; i < 20; ++i) CHECK(l[i] == 0);
        for (int i = 20; i < 40; ++i) CHECK(l[i] == 1);
    }
    SUBCASE("cosine distance ignores positive scale") {
        SplitMix64 rng(5);
        std::vector<double> pts;
        for (int i = 0; i < 25; ++i) {
            const double jx = rng.next_uniform(-0.01, 0.01);
            pts.push_back(1.0 + jx);
            pts.push_back(1.0 - jx);
        }
        std::vector<double> scaled = pts;
        for (std::size_t i = 0; i < scaled.size(); i += 2) {
            const double s = 1.0 + 0.5 * static_cast<double>(i % 7);
            scaled[i] *= s;
            scaled[i + 1] *= s;
        }
        CHECK(dbscan_cosine(pts, 2, 0.04, 17) == dbscan_cosine(scaled, 2, 0.04, 17));
    }
    SUBCASE("zero-norm points are always outliers") {
        std::vector<double> pts;
        for (int i = 0; i < 20; ++i) { pts.push_back(3.0); pts.push_back(4.0); }
        pts.push_back(0.0);
        pts.push_back(0.0);
        const std::vector<int> l = dbscan_cosine(pts, 2, 0.04, 17);
        CHECK(l.back() == -1);
        for (std::size_t i = 0; i + 1 < l.size(); ++i) CHECK(l[i] == 0);
    }
    SUBCASE("argument validation") {
        CHECK_THROWS_AS(dbscan_cosine({1.0, 2.0, 3.0}, 2, 0.04, 17), DimensionError);
        CHECK_THROWS_AS(dbscan_cosine({1.0, 2.0}, 0, 0.04, 17), DomainError);
        CHECK_THROWS_AS(dbscan_cosine({1.0, 2.0}, 2, 0.0, 17), DomainError);
        CHECK_THROWS_AS(dbscan_cosine({1.0, 2.0}, 2, 0.04, 0), DomainError);
    }
}

TEST_CASE("dbscan_cosine matches an independent quadratic reference") {
    SplitMix64 rng(99);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20 + rng.next_below(60);
        const std::size_t dim = 3;
        std::vector<double> pts(n * dim);
        // a few noisy direction bundles plus uniform noise
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.next_below(4) != 0) {
                const std::size_t axis = rng.next_below(dim);
                for (std::size_t d = 0; d < dim; ++d) {
                    pts[i * dim + d] = (d == axis ? 1.0 : 0.0) + rng.next_uniform(-0.15, 0.15);
                }
            } else {
                for (std::size_t d = 0; d < dim; ++d) {
                    pts[i * dim + d] = rng.next_uniform(-1.0, 1.0);
                }
            }
        }
        const double eps = trial % 2 == 0 ? 0.02 : 0.1;
        const std::size_t min_samples = trial % 3 == 0 ? 5 : 17;
        CHECK(dbscan_cosine(pts, dim, eps, min_samples) ==
              reference_dbscan(pts, dim, eps, min_samples));
    }
}

TEST_CASE("finalize_instances rewrites clusters and scores them") {
    Prediction pred;
    pred.height = 2;
    pred.width = 4;
    pred.seg_class.assign(8, 3);
    pred.seg_instance = {0, 0, 2, 2, 0, 0, 0, 0};
    pred.uncertainty = {-0.9, -0.4, -0.2, -0.3, -0.5, -0.6, -0.9, -2.5};

    // selected pixels 1..4 and 7; pixels 1,2 cluster 0; 3 cluster 1; 4 outlier;
    // 7 cluster 1
    const std::vector<std::size_t> selected = {1, 2, 3, 4, 7};
    const std::vector<int> labels = {0, 0, 1, -1, 1};
    const AnomalyInstances out = finalize_instances(labels, selected, pred, 6);

    REQUIRE(out.instances.size() == 2);
    CHECK(out.outliers_reassigned == 1);
    CHECK(out.instances[0].pixels == std::vector<std::size_t>{1, 2});
    CHECK(out.instances[1].pixels == std::vector<std::size_t>{3, 7});
    // confidence = clamp(1 + mean U, 0, 1)
    CHECK(out.instances[0].confidence == doctest::Approx(1.0 - 0.3));
    CHECK(out.instances[1].confidence == 0.0);  // mean U = -1.4 clamps to 0

    // cluster pixels take the anomaly class with fresh ids above existing ones
    CHECK(pred.seg_class[1] == 6);
    CHECK(pred.seg_class[2] == 6);
    CHECK(pred.seg_instance[1] == 3);
    CHECK(pred.seg_instance[3] == 4);
    CHECK(pred.seg_instance[7] == 4);
    // the outlier keeps its original assignment
    CHECK(pred.seg_class[4] == 3);
    CHECK(pred.seg_instance[4] == 0);

    CHECK_THROWS_AS(finalize_instances({0}, {1, 2}, pred, 6), DimensionError);
}
