#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace p2f {

// Flat key=value run configuration. Every key has a default; unknown keys
// are rejected. The raw parsed pairs are kept for verbatim echo into
// reports.
struct RunConfig {
    std::uint64_t seed = 42;

    // model
    std::size_t image_size = 64;
    std::size_t embed_dim = 16;
    std::size_t n_queries = 8;
    std::size_t n_classes = 4;
    std::size_t query_dim = 32;
    std::size_t mlp_hidden = 64;

    // training
    std::size_t steps = 2000;
    std::size_t batch_size = 8;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.05;
    double clip_norm = 1.0;
    std::size_t point_budget = 1024;

    // losses
    double lambda_ce = 2.0;
    double lambda_sdice = 5.0;
    double lambda_evi = 0.1;
    double no_object_coeff = 0.1;

    // inference and clustering
    double object_mask_threshold = 0.5;
    double k_sigma = 2.0;
    double cluster_eps = 0.04;
    std::size_t min_samples = 17;

    // toy-scale acceptance bar for closed-world panoptic quality
    double pq_pass_threshold = 0.5;

    std::vector<std::pair<std::string, std::string>> raw;  // as parsed, in file order
};

RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

// The full key set with defaults and one comment line each; parseable by
// parse_config_text.
std::string default_config_text();

}  // namespace p2f
