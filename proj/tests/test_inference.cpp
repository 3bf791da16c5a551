#include <cmath>

#include <doctest.h>

#include "p2f/errors.hpp"
#include "p2f/inference.hpp"
#include "p2f/rng.hpp"

using namespace p2f;

namespace {

// Logits whose softmax is exactly the given row-major probability table.
Tensor logits_for(std::size_t rows, std::size_t cols, std::vector<double> probs) {
    for (double& p : probs) p = std::log(p);
    return Tensor::from_data({rows, cols}, probs);
}

EvidenceMaps evidence_from_ab(std::size_t n_m, std::size_t hw, std::vector<double> a,
                              std::vector<double> b) {
    EvidenceMaps e;
    e.alpha = Tensor::from_data({n_m, hw}, a);
    e.beta = Tensor::from_data({n_m, hw}, b);
    std::vector<double> p(n_m * hw), u(n_m * hw);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = a[i] / (a[i] + b[i]);
        u[i] = -(a[i] + b[i]);
    }
    e.mask_prob = Tensor::from_data({n_m, hw}, p);
    e.evi_uncertainty = Tensor::from_data({n_m, hw}, u);
    return e;
}

}  // namespace

TEST_CASE("filter_masks rejects no-object winners and weak classifications") {
    MaskQueries q;
    // 4 masks, 2 real classes + no-object
    q.class_logits = logits_for(4, 3,
                                {0.80, 0.15, 0.05,    // confident class 0: kept
                                 0.10, 0.10, 0.80,    // no-object wins: rejected
                                 0.40, 0.35, 0.25,    // winner below 0.5: rejected
                                 0.25, 0.50, 0.25});  // exactly at threshold: kept
    FilterConfig cfg;
    CHECK(filter_masks(q, cfg) == std::vector<std::size_t>{1, 2});

    cfg.object_mask_threshold = 0.9;
    CHECK(filter_masks(q, cfg) == std::vector<std::size_t>{0, 1, 2, 3});

    cfg.object_mask_threshold = 0.0;
    CHECK_THROWS_AS(filter_masks(q, cfg), DomainError);
    cfg.object_mask_threshold = 1.0;
    CHECK_THROWS_AS(filter_masks(q, cfg), DomainError);
}

TEST_CASE("fuse_uncertainty hand case: confidence times Beta expectation") {
    // one mask, alpha=9 beta=1 everywhere, winning class prob 0.8
    MaskQueries q;
    q.class_logits = logits_for(1, 3, {0.80, 0.15, 0.05});
    EvidenceMaps e = evidence_from_ab(1, 4, {9, 9, 9, 9}, {1, 1, 1, 1});
    const Prediction pred = fuse_uncertainty(e, q, {}, {0, 1}, 2, 2);
    REQUIRE(pred.uncertainty.size() == 4);
    for (double u : pred.uncertainty) CHECK(u == doctest::Approx(-0.72).epsilon(1e-12));
    CHECK(pred.mask_class[0] == 0);
    CHECK(pred.mask_confidence[0] == doctest::Approx(0.8));
    for (std::uint16_t c : pred.seg_class) CHECK(c == 0);
    for (std::uint16_t id : pred.seg_instance) CHECK(id == 0);  // class 0 is stuff here
    CHECK(pred.low_mask_prob_pixels.empty());
    CHECK(!pred.fallback_unfiltered);
}

TEST_CASE("the pixel winner is chosen by alpha alone, not by the expectation") {
    MaskQueries q;
    q.class_logits = logits_for(2, 3,
                                {0.70, 0.20, 0.10,
                                 0.20, 0.70, 0.10});
    // mask 0: alpha 5, beta 1 (expectation 0.833); mask 1: alpha 6, beta 18
    // (expectation 0.25, but the larger alpha carries the pixel)
    EvidenceMaps e = evidence_from_ab(2, 1, {5, 6}, {1, 18});
    const Prediction pred = fuse_uncertainty(e, q, {}, {0, 1}, 1, 1);
    CHECK(pred.pixel_winner[0] == 1);
    CHECK(pred.seg_class[0] == 1);
    CHECK(pred.seg_instance[0] == 1);  // class 1 is a thing: dense id
    CHECK(pred.uncertainty[0] == doctest::Approx(-0.7 * 0.25));
    // the winner's expectation is below 0.5, so the pixel is flagged
    CHECK(pred.low_mask_prob_pixels == std::vector<std::size_t>{0});
}

TEST_CASE("filtered masks never win pixels; all-filtered falls back flagged") {
    MaskQueries q;
    q.class_logits = logits_for(2, 3,
                                {0.70, 0.20, 0.10,
                                 0.20, 0.70, 0.10});
    EvidenceMaps e = evidence_from_ab(2, 2, {9, 9, 20, 20}, {1, 1, 1, 1});

    Prediction pred = fuse_uncertainty(e, q, {1}, {0, 1}, 1, 2);
    CHECK(pred.pixel_winner == std::vector<std::size_t>{0, 0});
    CHECK(!pred.fallback_unfiltered);

    pred = fuse_uncertainty(e, q, {0, 1}, {0, 1}, 1, 2);
    CHECK(pred.fallback_unfiltered);
    CHECK(pred.pixel_winner == std::vector<std::size_t>{1, 1});
}

TEST_CASE("fused uncertainty always lies in [-1, 0]") {
    SplitMix64 rng(31);
    const std::size_t n_m = 5, hw = 64;
    std::vector<double> a(n_m * hw), b(n_m * hw), logits(n_m * 4);
    for (double& v : a) v = 1.0 + rng.next_uniform(0.0, 50.0);
    for (double& v : b) v = 1.0 + rng.next_uniform(0.0, 50.0);
    for (double& v : logits) v = rng.next_uniform(-3.0, 3.0);
    MaskQueries q;
    q.class_logits = Tensor::from_data({n_m, 4}, logits);
    EvidenceMaps e = evidence_from_ab(n_m, hw, a, b);
    const Prediction pred = fuse_uncertainty(e, q, {}, {0, 0, 1}, 8, 8);
    for (double u : pred.uncertainty) {
        CHECK(u >= -1.0);
        CHECK(u <= 0.0);
    }
    CHECK_THROWS_AS(fuse_uncertainty(e, q, {}, {0, 0, 1}, 8, 9), DimensionError);
}

TEST_CASE("semantic logits are the class-probability-weighted mask sum") {
    MaskQueries q;
    q.class_logits = logits_for(1, 3, {0.80, 0.15, 0.05});
    EvidenceMaps e = evidence_from_ab(1, 2, {7, 3}, {3, 7});  // expectations 0.7, 0.3
    const std::vector<double> logits = semantic_logits(e, q);
    REQUIRE(logits.size() == 4);  // 2 real classes x 2 pixels
    CHECK(logits[0] == doctest::Approx(0.8 * 0.7));
    CHECK(logits[1] == doctest::Approx(0.8 * 0.3));
    CHECK(logits[2] == doctest::Approx(0.15 * 0.7));
    CHECK(logits[3] == doctest::Approx(0.15 * 0.3));
}

TEST_CASE("logit statistics: mean, population std, and degeneracy warnings") {
    SUBCASE("constant winner gets sigma 1 and a warning") {
        LogitStatsAccumulator acc(2);
        // class 0 always wins with logit 2
        acc.add({2.0, 2.0, 0.0, 0.0}, 2);
        const LogitStats s = acc.finalize();
        CHECK(s.mu[0] == doctest::Approx(2.0));
        CHECK(s.sigma[0] == 1.0);
        CHECK(s.warned[0] == 1);
        // class 1 never won anything
        CHECK(s.mu[1] == 0.0);
        CHECK(s.sigma[1] == 1.0);
        CHECK(s.warned[1] == 1);
    }
    SUBCASE("two winning levels give the population std") {
        LogitStatsAccumulator acc(2);
        acc.add({1.0, 3.0, 0.0, 0.0}, 2);
        const LogitStats s = acc.finalize();
        CHECK(s.mu[0] == doctest::Approx(2.0));
        CHECK(s.sigma[0] == doctest::Approx(1.0));  // population std of {1, 3}
        CHECK(s.warned[0] == 0);
    }
    SUBCASE("size mismatch is rejected") {
        LogitStatsAccumulator acc(2);
        CHECK_THROWS_AS(acc.add({1.0, 2.0, 3.0}, 2), DimensionError);
    }
}

TEST_CASE("baseline scorer hand cases") {
    MaskQueries q;
    q.class_logits = logits_for(1, 3, {0.80, 0.15, 0.05});
    EvidenceMaps e = evidence_from_ab(1, 2, {7, 3}, {3, 7});  // expectations 0.7, 0.3

    SUBCASE("mm is minus the max mask expectation") {
        const std::vector<double> s = baseline_scores(Scorer::mm, e, q, nullptr);
        CHECK(s[0] == doctest::Approx(-0.7));
        CHECK(s[1] == doctest::Approx(-0.3));
    }
    SUBCASE("eam weights masks by their best real-class probability") {
        const std::vector<double> s = baseline_scores(Scorer::eam, e, q, nullptr);
        CHECK(s[0] == doctest::Approx(-0.8 * 0.7));
        CHECK(s[1] == doctest::Approx(-0.8 * 0.3));
    }
    SUBCASE("rba sums minus tanh of the semantic logits") {
        const std::vector<double> s = baseline_scores(Scorer::rba, e, q, nullptr);
        CHECK(s[0] == doctest::Approx(-std::tanh(0.8 * 0.7) - std::tanh(0.15 * 0.7)));
        // zero evidence means zero logits means score exactly 0
        EvidenceMaps none = e;
        none.mask_prob = Tensor::zeros({1, 2});
        const std::vector<double> z = baseline_scores(Scorer::rba, none, q, nullptr);
        CHECK(z[0] == 0.0);
        CHECK(z[1] == 0.0);
    }
    SUBCASE("m2a gates by mask coverage") {
        const std::vector<double> s = baseline_scores(Scorer::m2a, e, q, nullptr);
        CHECK(s[0] == doctest::Approx(1.0 - 0.8 * 0.7));  // covered: expectation > 0.5
        CHECK(s[1] == 0.0);                               // uncovered pixel scores 0
    }
    SUBCASE("sml standardizes the winning logit and requires stats") {
        CHECK_THROWS_AS(baseline_scores(Scorer::sml, e, q, nullptr), DomainError);
        LogitStats stats;
        stats.mu = {0.26, 0.0};
        stats.sigma = {0.2, 1.0};
        stats.warned = {0, 1};
        const std::vector<double> s = baseline_scores(Scorer::sml, e, q, &stats);
        CHECK(s[0] == doctest::Approx(-(0.8 * 0.7 - 0.26) / 0.2));
        CHECK(s[1] == doctest::Approx(-(0.8 * 0.3 - 0.26) / 0.2));
    }
    SUBCASE("the fused scorer is not a baseline") {
        CHECK_THROWS_AS(baseline_scores(Scorer::p2f, e, q, nullptr), DomainError);
    }
}

TEST_CASE("scorer names round trip") {
    for (Scorer s : {Scorer::p2f, Scorer::sml, Scorer::mm, Scorer::eam, Scorer::rba,
                     Scorer::m2a}) {
        CHECK(scorer_from_name(scorer_name(s)) == s);
    }
    CHECK_THROWS_AS(scorer_from_name("entropy"), ConfigError);
}
