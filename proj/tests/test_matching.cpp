#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <doctest.h>

#include "p2f/errors.hpp"
#include "p2f/matching.hpp"
#include "p2f/rng.hpp"

using namespace p2f;

namespace {

// Exhaustive minimum over all injective row->column assignments, returning
// the lexicographically smallest optimal matching.
std::vector<std::pair<std::size_t, std::size_t>> brute_force(const CostMatrix& cm) {
    const std::size_t n = std::max(cm.rows, cm.cols);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::pair<std::size_t, std::size_t>> best_pairs;
    do {
        double total = 0.0;
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t i = 0; i < cm.rows; ++i) {
            if (perm[i] < cm.cols) {
                total += cm.at(i, perm[i]);
                pairs.emplace_back(i, perm[i]);
            }
        }
        if (total < best - 1e-12 || (std::abs(total - best) <= 1e-12 && pairs < best_pairs)) {
            best = total;
            best_pairs = pairs;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best_pairs;
}

CostMatrix random_costs(std::size_t rows, std::size_t cols, SplitMix64& rng) {
    CostMatrix cm;
    cm.rows = rows;
    cm.cols = cols;
    cm.costs.resize(rows * cols);
    for (double& c : cm.costs) c = rng.next_uniform(-5.0, 5.0);
    return cm;
}

}  // namespace

TEST_CASE("hungarian equals exhaustive search on random matrices") {
    SplitMix64 rng(404);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t rows = 1 + rng.next_below(5);
        const std::size_t cols = 1 + rng.next_below(5);
        const CostMatrix cm = random_costs(rows, cols, rng);
        const auto ours = hungarian(cm);
        const auto ref = brute_force(cm);
        double ours_total = 0.0, ref_total = 0.0;
        for (const auto& [i, j] : ours) ours_total += cm.at(i, j);
        for (const auto& [i, j] : ref) ref_total += cm.at(i, j);
        CHECK(ours_total == doctest::Approx(ref_total).epsilon(1e-9));
        CHECK(ours.size() == std::min(rows, cols));
    }
}

TEST_CASE("ties resolve to the lexicographically smallest matching") {
    CostMatrix flat;
    flat.rows = 3;
    flat.cols = 3;
    flat.costs.assign(9, 1.0);
    const auto pairs = hungarian(flat);
    REQUIRE(pairs.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(pairs[i].first == i);
        CHECK(pairs[i].second == i);
    }

    // Two optimal matchings: (0,0),(1,1) and (0,1),(1,0); the first wins.
    CostMatrix two;
    two.rows = 2;
    two.cols = 2;
    two.costs = {1.0, 2.0, 2.0, 1.0};
    const auto p2 = hungarian(two);
    CHECK(p2[0] == std::pair<std::size_t, std::size_t>{0, 0});
    CHECK(p2[1] == std::pair<std::size_t, std::size_t>{1, 1});
}

TEST_CASE("adding a constant to every cost keeps the matching") {
    SplitMix64 rng(505);
    for (int trial = 0; trial < 100; ++trial) {
        CostMatrix cm = random_costs(4, 4, rng);
        const auto base = hungarian(cm);
        for (double& c : cm.costs) c += 17.25;
        CHECK(hungarian(cm) == base);
    }
}

TEST_CASE("non-finite costs are rejected") {
    CostMatrix cm;
    cm.rows = 1;
    cm.cols = 1;
    cm.costs = {std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS_AS(hungarian(cm), DomainError);
}

TEST_CASE("evidential sampling keeps the most uncertain quarter deterministic") {
    SplitMix64 key(606);
    std::vector<double> u(256);
    for (double& v : u) v = key.next_uniform(-40.0, -2.0);
    const std::size_t budget = 100;
    SplitMix64 rng(777);
    const auto sample = evidential_sample(u, budget, rng);
    CHECK(sample.size() == budget);
    CHECK(std::is_sorted(sample.begin(), sample.end()));
    CHECK(std::adjacent_find(sample.begin(), sample.end()) == sample.end());

    // ceil(0.75 * 100) = 75 highest-uncertainty pixels must all be present.
    std::vector<std::size_t> order(u.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (u[a] != u[b]) return u[a] > u[b];
        return a < b;
    });
    const std::set<std::size_t> chosen(sample.begin(), sample.end());
    for (std::size_t k = 0; k < 75; ++k) CHECK(chosen.count(order[k]) == 1);

    SplitMix64 rng2(777);
    CHECK(evidential_sample(u, budget, rng2) == sample);
}

TEST_CASE("evidential sampling edge cases") {
    std::vector<double> u(16, -3.0);
    SplitMix64 rng(1);
    const auto all = evidential_sample(u, 16, rng);
    CHECK(all.size() == 16);
    CHECK(all.front() == 0);
    CHECK(all.back() == 15);
    CHECK_THROWS_AS(evidential_sample(u, 3, rng), DomainError);
}

TEST_CASE("uniform sampling is a sorted draw without replacement") {
    SplitMix64 rng(42);
    const auto s = uniform_sample(100, 30, rng);
    CHECK(s.size() == 30);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    CHECK(s.back() < 100);
}

TEST_CASE("cost matrix mixes class probability and dice terms") {
    // One predicted mask with flat probabilities over 4 pixels; one GT mask
    // covering half the sample.
    EvidenceMaps ev;
    ev.alpha = Tensor::from_data({1, 4}, {3.0, 3.0, 3.0, 3.0});
    ev.beta = Tensor::from_data({1, 4}, {1.0, 1.0, 1.0, 1.0});
    ev.mask_prob = Tensor::from_data({1, 4}, {0.75, 0.75, 0.75, 0.75});
    ev.evi_uncertainty = Tensor::from_data({1, 4}, {-4.0, -4.0, -4.0, -4.0});
    Tensor logits = Tensor::from_data({1, 3}, {0.0, 0.0, 0.0});
    std::vector<BinaryMask> gt = {{1, 1, 0, 0}};
    const std::vector<std::size_t> sample = {0, 1, 2, 3};
    const CostMatrix cm = build_cost(ev, logits, gt, {1}, sample, 2.0, 5.0);
    const double dice = 1.0 - (2.0 * 1.5 + 1.0) / (3.0 + 2.0 + 1.0);
    CHECK(cm.at(0, 0) == doctest::Approx(2.0 * (-1.0 / 3.0) + 5.0 * dice).epsilon(1e-12));
}
