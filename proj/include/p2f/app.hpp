#pragma once

#include <string>
#include <vector>

#include "p2f/clustering.hpp"
#include "p2f/config.hpp"
#include "p2f/inference.hpp"
#include "p2f/metrics.hpp"
#include "p2f/model.hpp"
#include "p2f/world.hpp"

namespace p2f::app {

struct GenOptions {
    std::uint64_t seed = 42;
    std::string out;
    std::vector<std::size_t> counts = {500, 50, 50};  // train, val_closed, val_open
    bool force = false;
    std::size_t image_size = 64;
};

// Writes the three split directories plus catalog.json and manifest.json
// (per-split CRC32 checksums). Refuses a non-empty target unless force.
void run_gen(const GenOptions& opts);

// Reads a split back from disk and verifies its manifest checksum.
std::vector<world::Sample> load_split(const std::string& data_dir, world::Split split);

struct TrainOptions {
    RunConfig config;
    std::string data_dir;
    std::string out_dir;
};

struct TrainSummary {
    double best_loss = 0.0;
    std::size_t best_step = 0;
    std::string final_path;
    std::string best_path;
    std::string log_path;
};

// Training loop with a per-step CSV log (step,ce,sdice,evi,total); the log
// survives an aborted run. steps = 0 saves the initialization unchanged.
TrainSummary run_train(const TrainOptions& opts);

struct InferOptions {
    RunConfig config;
    std::string model_path;
    std::string image_path;
    std::string out_dir;
    bool cluster = false;
    std::string stats_path;  // optional: training-split statistics for the threshold
};

struct InferSummary {
    Prediction prediction;
    AnomalyInstances instances;
    double threshold = 0.0;          // only meaningful when clustering ran
    std::string threshold_source;    // "stats" or "image"
};

// Single-image inference: 16-bit class/instance maps, an 8-bit uncertainty
// map (pixel = round(255 * (U + 1))), and with clustering an anomaly
// instance JSON. The clustering threshold comes from the training-split
// statistics file when one is given; without one it falls back to
// self-calibration on the image's own uncertainty map, which inflates the
// threshold when anomalies are present.
InferSummary run_infer(const InferOptions& opts);

struct EvalOptions {
    RunConfig config;
    std::string model_path;
    std::string data_dir;
    world::Split split = world::Split::val_closed;
    Scorer scorer = Scorer::p2f;
    std::string out_path;
    std::string stats_path;  // required for the sml scorer
};

struct EvalSummary {
    PanopticResult panoptic;       // in-distribution classes, anomalies void
    double miou = 0.0;
    bool has_anomaly = false;
    PanopticResult panoptic_open;  // anomalies merged into one extra class
    PixelAnomalyResult pixel;
    InstanceAnomalyResult instance;
    double threshold = 0.0;        // calibrated on the closed validation split
    std::string report;            // the JSON written to out_path
};

EvalSummary run_eval(const EvalOptions& opts);

// Training-split statistics: winning-semantic-logit mean/std per class (for
// the sml scorer) plus fused-uncertainty mean/std and the calibrated
// clustering threshold. Stored as JSON with full float precision.
void run_stats(const RunConfig& config, const std::string& model_path,
               const std::string& data_dir, const std::string& out_path);
LogitStats load_stats(const std::string& path);

}  // namespace p2f::app
