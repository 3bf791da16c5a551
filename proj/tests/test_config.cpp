#include <doctest.h>

#include "p2f/config.hpp"
#include "p2f/errors.hpp"

using namespace p2f;

TEST_CASE("the default config text parses back to the defaults") {
    const RunConfig parsed = parse_config_text(default_config_text(), "defaults");
    const RunConfig fresh;
    CHECK(parsed.seed == fresh.seed);
    CHECK(parsed.image_size == fresh.image_size);
    CHECK(parsed.embed_dim == fresh.embed_dim);
    CHECK(parsed.n_queries == fresh.n_queries);
    CHECK(parsed.n_classes == fresh.n_classes);
    CHECK(parsed.query_dim == fresh.query_dim);
    CHECK(parsed.mlp_hidden == fresh.mlp_hidden);
    CHECK(parsed.steps == fresh.steps);
    CHECK(parsed.batch_size == fresh.batch_size);
    CHECK(parsed.lr == fresh.lr);
    CHECK(parsed.beta1 == fresh.beta1);
    CHECK(parsed.beta2 == fresh.beta2);
    CHECK(parsed.adam_eps == fresh.adam_eps);
    CHECK(parsed.weight_decay == fresh.weight_decay);
    CHECK(parsed.clip_norm == fresh.clip_norm);
    CHECK(parsed.point_budget == fresh.point_budget);
    CHECK(parsed.lambda_ce == fresh.lambda_ce);
    CHECK(parsed.lambda_sdice == fresh.lambda_sdice);
    CHECK(parsed.lambda_evi == fresh.lambda_evi);
    CHECK(parsed.no_object_coeff == fresh.no_object_coeff);
    CHECK(parsed.object_mask_threshold == fresh.object_mask_threshold);
    CHECK(parsed.k_sigma == fresh.k_sigma);
    CHECK(parsed.cluster_eps == fresh.cluster_eps);
    CHECK(parsed.min_samples == fresh.min_samples);
    CHECK(parsed.pq_pass_threshold == fresh.pq_pass_threshold);
    // every key appears exactly once in the template
    CHECK(parsed.raw.size() == 25);
}

TEST_CASE("overrides, comments, and whitespace") {
    const RunConfig cfg = parse_config_text(
        "# a comment\n"
        "\n"
        "  steps = 17  \n"
        "lr=0.25\n"
        "k_sigma = 3.5\n",
        "test");
    CHECK(cfg.steps == 17);
    CHECK(cfg.lr == 0.25);
    CHECK(cfg.k_sigma == 3.5);
    CHECK(cfg.image_size == 64);  // untouched keys keep their defaults

    // the raw pairs preserve file order and the verbatim values
    REQUIRE(cfg.raw.size() == 3);
    CHECK(cfg.raw[0] == std::pair<std::string, std::string>{"steps", "17"});
    CHECK(cfg.raw[1] == std::pair<std::string, std::string>{"lr", "0.25"});
    CHECK(cfg.raw[2] == std::pair<std::string, std::string>{"k_sigma", "3.5"});
}

TEST_CASE("the last assignment of a repeated key wins") {
    const RunConfig cfg = parse_config_text("steps = 5\nsteps = 9\n", "test");
    CHECK(cfg.steps == 9);
    CHECK(cfg.raw.size() == 2);
}

TEST_CASE("malformed configs are rejected with the origin in the message") {
    CHECK_THROWS_AS(parse_config_text("nonsense = 3\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("steps\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("steps = twelve\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("steps = -4\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lr = 0.1x\n", "test"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lr =\n", "test"), ConfigError);
    try {
        parse_config_text("steps = ?\n", "myfile.cfg");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("myfile.cfg") != std::string::npos);
        CHECK(std::string(e.what()).find("steps") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_file("/nonexistent/p2f.cfg"), ConfigError);
}
