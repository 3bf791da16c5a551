#pragma once

#include <string>
#include <utility>
#include <vector>

#include "p2f/evidence.hpp"
#include "p2f/losses.hpp"
#include "p2f/world.hpp"

namespace p2f {

struct ModelConfig {
    std::size_t image_size = 64;
    std::size_t embed_dim = 16;   // E, also the stem channel width
    std::size_t n_queries = 8;    // N_M
    std::size_t n_classes = 4;    // real classes; logits get one extra no-object column
    std::size_t query_dim = 32;   // Q
    std::size_t mlp_hidden = 64;
};

// Stem: conv3x3(3->E) + relu, avgpool2, conv3x3(E->E), bilinear upsample
// back to full resolution; the normalized features plus a fixed sinusoidal
// position field form the pixel embedding. Query path: learned bank through
// a two-layer MLP whose output rows split into F_alpha | F_beta | class
// logits.
struct ModelParams {
    ModelConfig config;
    Tensor conv1_w, conv1_b;
    Tensor conv2_w, conv2_b;
    Tensor query_bank;
    Tensor mlp1_w, mlp1_b;
    Tensor mlp2_w, mlp2_b;

    std::vector<std::pair<std::string, Tensor*>> named();
    std::vector<std::pair<std::string, const Tensor*>> named() const;
};

ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

std::pair<PixelEmbeddings, MaskQueries> forward(const ModelParams& params, const Tensor& image);

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
    double clip_norm = 1.0;
};

struct OptimizerState {
    AdamWConfig config;
    std::size_t step = 0;
    std::vector<std::vector<double>> m;  // parallel to ModelParams::named() order
    std::vector<std::vector<double>> v;
};

OptimizerState init_optimizer(const ModelParams& params, const AdamWConfig& config);

struct TrainStepResult {
    double ce = 0.0;
    double sdice = 0.0;
    double evi = 0.0;
    double total = 0.0;
};

// One optimizer step on a batch: Hungarian-match predictions to targets on a
// shared uniform pixel sample, evaluate the evidential and Dice losses on a
// fresh uncertainty-guided sample per matched mask, then a clipped AdamW
// update. The returned losses are pre-update values.
TrainStepResult train_step(ModelParams& params, OptimizerState& opt,
                           const std::vector<world::Sample>& batch, const LossWeights& weights,
                           std::size_t point_budget, SplitMix64& rng);

// Binary checkpoint with a trailing CRC32; round-trips bit-exactly.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path, std::size_t image_size = 64);

}  // namespace p2f
