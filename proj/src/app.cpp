#include "p2f/app.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "p2f/errors.hpp"

namespace fs = std::filesystem;

namespace p2f::app {

namespace {

// Minimal ordered JSON emitter; numbers are fixed 6-decimal unless written
// raw.
class JsonWriter {
public:
    void begin_obj() {
        comma();
        out_ << '{';
        first_.push_back(true);
    }
    void end_obj() {
        out_ << '}';
        first_.pop_back();
    }
    void begin_arr() {
        comma();
        out_ << '[';
        first_.push_back(true);
    }
    void end_arr() {
        out_ << ']';
        first_.pop_back();
    }
    void key(const std::string& k) {
        comma();
        write_string(k);
        out_ << ':';
        pending_value_ = true;
    }
    void str(const std::string& v) {
        comma();
        write_string(v);
    }
    void num(double v) {
        comma();
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        out_ << buf;
    }
    void raw_num(double v) {
        comma();
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out_ << buf;
    }
    void integer(long long v) {
        comma();
        out_ << v;
    }
    void boolean(bool v) {
        comma();
        out_ << (v ? "true" : "false");
    }
    std::string take() { return out_.str(); }

private:
    void comma() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        if (!first_.empty()) {
            if (!first_.back()) out_ << ',';
            first_.back() = false;
        }
    }
    void write_string(const std::string& s) {
        out_ << '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ << "\\\""; break;
                case '\\': out_ << "\\\\"; break;
                case '\n': out_ << "\\n"; break;
                case '\t': out_ << "\\t"; break;
                default: out_ << c;
            }
        }
        out_ << '"';
    }

    std::ostringstream out_;
    std::vector<bool> first_;
    bool pending_value_ = false;
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw DataError("write failed for " + path);
}

std::uint32_t crc_file(std::uint32_t crc, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return static_cast<std::uint32_t>(crc32(crc, reinterpret_cast<const Bytef*>(buf.data()),
                                            static_cast<uInt>(buf.size())));
}

std::string image_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%05zu.ppm", i);
    return buf;
}
std::string class_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "cls_%05zu.pgm", i);
    return buf;
}
std::string instance_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "inst_%05zu.pgm", i);
    return buf;
}

std::uint32_t split_checksum(const std::string& dir, std::size_t count) {
    std::uint32_t crc = static_cast<std::uint32_t>(crc32(0L, nullptr, 0));
    for (std::size_t i = 0; i < count; ++i) {
        crc = crc_file(crc, dir + "/" + image_name(i));
        crc = crc_file(crc, dir + "/" + class_name(i));
        crc = crc_file(crc, dir + "/" + instance_name(i));
    }
    return crc;
}

constexpr world::Split kSplits[3] = {world::Split::train, world::Split::val_closed,
                                     world::Split::val_open};

ModelConfig model_config(const RunConfig& cfg) {
    ModelConfig mc;
    mc.image_size = cfg.image_size;
    mc.embed_dim = cfg.embed_dim;
    mc.n_queries = cfg.n_queries;
    mc.n_classes = cfg.n_classes;
    mc.query_dim = cfg.query_dim;
    mc.mlp_hidden = cfg.mlp_hidden;
    return mc;
}

std::vector<std::uint8_t> thing_flags(std::size_t n_classes) {
    std::vector<std::uint8_t> flags(n_classes, 1);
    for (const world::ClassInfo& c : world::default_catalog()) {
        if (c.id >= 0 && static_cast<std::size_t>(c.id) < n_classes) {
            flags[static_cast<std::size_t>(c.id)] = c.is_thing ? 1 : 0;
        }
    }
    return flags;
}

struct ImageInference {
    PixelEmbeddings pixels;
    MaskQueries queries;
    EvidenceMaps evidence;
    Prediction prediction;
};

ImageInference infer_image(const ModelParams& params, const RunConfig& cfg,
                           const std::vector<double>& image) {
    const std::size_t hw = cfg.image_size * cfg.image_size;
    if (image.size() != 3 * hw) {
        throw DataError("image resolution does not match the model configuration");
    }
    ImageInference out;
    Tensor img = Tensor::from_data({3, hw}, image);
    auto [pixels, queries] = forward(params, img);
    out.pixels = pixels;
    out.queries = queries;
    out.evidence = compute_evidence(queries, pixels);
    FilterConfig fc{cfg.object_mask_threshold};
    const std::vector<std::size_t> filtered = filter_masks(queries, fc);
    out.prediction = fuse_uncertainty(out.evidence, queries, filtered,
                                      thing_flags(cfg.n_classes), cfg.image_size, cfg.image_size);
    return out;
}

// Cluster the thresholded pixels of a fused prediction and fold the result
// back into its maps. Returns the instances found.
AnomalyInstances cluster_prediction(const ImageInference& inf, const RunConfig& cfg, double t,
                                    Prediction& pred) {
    const std::vector<std::size_t> selected = select_uncertain(pred.uncertainty, t);
    const std::size_t e = cfg.embed_dim;
    const std::size_t hw = cfg.image_size * cfg.image_size;
    std::vector<double> points(selected.size() * e);
    const std::vector<double>& fe = inf.pixels.features.data();
    for (std::size_t k = 0; k < selected.size(); ++k) {
        for (std::size_t d = 0; d < e; ++d) points[k * e + d] = fe[d * hw + selected[k]];
    }
    const std::vector<int> labels =
        dbscan_cosine(points, e, cfg.cluster_eps, cfg.min_samples);
    return finalize_instances(labels, selected, pred, static_cast<int>(cfg.n_classes));
}

void append_config_echo(JsonWriter& j, const RunConfig& cfg) {
    j.key("config");
    j.begin_obj();
    for (const auto& [k, v] : cfg.raw) {
        j.key(k);
        j.str(v);
    }
    j.end_obj();
}

void append_panoptic(JsonWriter& j, const PanopticResult& r) {
    j.begin_obj();
    j.key("pq");
    j.num(r.pq);
    j.key("sq");
    j.num(r.sq);
    j.key("rq");
    j.num(r.rq);
    j.key("tp");
    j.integer(static_cast<long long>(r.tp));
    j.key("fp");
    j.integer(static_cast<long long>(r.fp));
    j.key("fn");
    j.integer(static_cast<long long>(r.fn));
    j.key("per_class");
    j.begin_obj();
    for (const auto& [cls, s] : r.per_class) {
        j.key(std::to_string(cls));
        j.begin_obj();
        j.key("pq");
        j.num(s.pq);
        j.key("sq");
        j.num(s.sq);
        j.key("rq");
        j.num(s.rq);
        j.key("tp");
        j.integer(static_cast<long long>(s.tp));
        j.key("fp");
        j.integer(static_cast<long long>(s.fp));
        j.key("fn");
        j.integer(static_cast<long long>(s.fn));
        j.end_obj();
    }
    j.end_obj();
    j.end_obj();
}

}  // namespace

void run_gen(const GenOptions& opts) {
    if (opts.counts.size() != 3) throw ConfigError("gen: expected three split counts");
    for (std::size_t c : opts.counts) {
        if (c < 1) throw ConfigError("gen: split counts must be >= 1");
    }
    fs::path root(opts.out);
    if (fs::exists(root) && !fs::is_empty(root) && !opts.force) {
        throw DataError("gen: " + opts.out + " is not empty (use --force to overwrite)");
    }
    fs::create_directories(root);

    world::SceneSpec spec;
    spec.seed = opts.seed;
    spec.size = opts.image_size;

    JsonWriter manifest;
    manifest.begin_obj();
    manifest.key("seed");
    manifest.integer(static_cast<long long>(opts.seed));
    manifest.key("image_size");
    manifest.integer(static_cast<long long>(opts.image_size));
    manifest.key("splits");
    manifest.begin_obj();
    for (std::size_t s = 0; s < 3; ++s) {
        const std::string name = world::split_name(kSplits[s]);
        const fs::path dir = root / name;
        fs::create_directories(dir);
        for (std::size_t i = 0; i < opts.counts[s]; ++i) {
            world::Sample sample = world::generate_sample(spec, kSplits[s], i);
            world::write_ppm((dir / image_name(i)).string(), sample.image, spec.size, spec.size);
            world::write_pgm16((dir / class_name(i)).string(), sample.label.class_map, spec.size,
                               spec.size);
            world::write_pgm16((dir / instance_name(i)).string(), sample.label.instance_map,
                               spec.size, spec.size);
        }
        char crc_hex[16];
        std::snprintf(crc_hex, sizeof(crc_hex), "%08x",
                      split_checksum(dir.string(), opts.counts[s]));
        manifest.key(name);
        manifest.begin_obj();
        manifest.key("count");
        manifest.integer(static_cast<long long>(opts.counts[s]));
        manifest.key("crc32");
        manifest.str(crc_hex);
        manifest.end_obj();
    }
    manifest.end_obj();
    manifest.end_obj();
    write_text((root / "manifest.json").string(), manifest.take() + "\n");

    JsonWriter catalog;
    catalog.begin_obj();
    catalog.key("classes");
    catalog.begin_arr();
    for (const world::ClassInfo& c : world::default_catalog()) {
        catalog.begin_obj();
        catalog.key("id");
        catalog.integer(c.id);
        catalog.key("name");
        catalog.str(c.name);
        catalog.key("is_thing");
        catalog.boolean(c.is_thing);
        catalog.key("is_ood");
        catalog.boolean(c.is_ood);
        catalog.end_obj();
    }
    catalog.end_arr();
    catalog.end_obj();
    write_text((root / "catalog.json").string(), catalog.take() + "\n");
}

std::vector<world::Sample> load_split(const std::string& data_dir, world::Split split) {
    const std::string name = world::split_name(split);
    const std::string manifest_path = data_dir + "/manifest.json";
    std::ifstream f(manifest_path);
    if (!f) throw DataError("cannot open dataset manifest " + manifest_path);
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(manifest_path + ": " + e.what());
    }
    if (!manifest.contains("splits") || !manifest["splits"].contains(name)) {
        throw DataError(manifest_path + ": split '" + name + "' missing");
    }
    const std::size_t count = manifest["splits"][name]["count"].get<std::size_t>();
    const std::string expected_crc = manifest["splits"][name]["crc32"].get<std::string>();
    const std::string dir = data_dir + "/" + name;
    char crc_hex[16];
    std::snprintf(crc_hex, sizeof(crc_hex), "%08x", split_checksum(dir, count));
    if (expected_crc != crc_hex) {
        throw DataError(dir + ": checksum mismatch (expected " + expected_crc + ", got " +
                        crc_hex + ")");
    }

    std::vector<world::Sample> samples;
    samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        world::Sample s;
        std::size_t h = 0, w = 0;
        s.image = world::read_ppm(dir + "/" + image_name(i), h, w);
        s.label.height = h;
        s.label.width = w;
        s.label.class_map = world::read_pgm16(dir + "/" + class_name(i), h, w);
        s.label.instance_map = world::read_pgm16(dir + "/" + instance_name(i), h, w);
        s.label.catalog = world::default_catalog();
        if (s.label.class_map.size() != s.label.height * s.label.width ||
            s.label.instance_map.size() != s.label.class_map.size()) {
            throw DataError(dir + ": inconsistent map sizes for sample " + std::to_string(i));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

TrainSummary run_train(const TrainOptions& opts) {
    const RunConfig& cfg = opts.config;
    const std::vector<world::Sample> data = load_split(opts.data_dir, world::Split::train);
    fs::create_directories(opts.out_dir);

    ModelParams params = init_params(model_config(cfg), cfg.seed);
    AdamWConfig ac;
    ac.lr = cfg.lr;
    ac.beta1 = cfg.beta1;
    ac.beta2 = cfg.beta2;
    ac.eps = cfg.adam_eps;
    ac.weight_decay = cfg.weight_decay;
    ac.clip_norm = cfg.clip_norm;
    OptimizerState opt = init_optimizer(params, ac);
    LossWeights lw{cfg.lambda_ce, cfg.lambda_sdice, cfg.lambda_evi, cfg.no_object_coeff};
    SplitMix64 rng(derive_key(cfg.seed, 0x74726169));

    TrainSummary summary;
    summary.final_path = opts.out_dir + "/model_final.p2fm";
    summary.best_path = opts.out_dir + "/model_best.p2fm";
    summary.log_path = opts.out_dir + "/train_log.csv";
    summary.best_loss = std::numeric_limits<double>::infinity();

    std::ofstream log(summary.log_path, std::ios::binary);
    if (!log) throw DataError("cannot open " + summary.log_path);
    log << "step,ce,sdice,evi,total\n" << std::flush;

    if (cfg.steps == 0) {
        save_model(params, summary.final_path);
        save_model(params, summary.best_path);
        summary.best_loss = 0.0;
        return summary;
    }

    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        std::vector<world::Sample> batch;
        batch.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            batch.push_back(data[rng.next_below(data.size())]);
        }
        const TrainStepResult r = train_step(params, opt, batch, lw, cfg.point_budget, rng);
        char line[160];
        std::snprintf(line, sizeof(line), "%zu,%.6f,%.6f,%.6f,%.6f\n", step, r.ce, r.sdice,
                      r.evi, r.total);
        log << line << std::flush;
        if (r.total < summary.best_loss) {
            summary.best_loss = r.total;
            summary.best_step = step;
            save_model(params, summary.best_path);
        }
    }
    save_model(params, summary.final_path);
    return summary;
}

InferSummary run_infer(const InferOptions& opts) {
    const RunConfig& cfg = opts.config;
    ModelParams params = load_model(opts.model_path, cfg.image_size);
    std::size_t h = 0, w = 0;
    const std::vector<double> image = world::read_ppm(opts.image_path, h, w);
    if (h != cfg.image_size || w != cfg.image_size) {
        throw DataError(opts.image_path + ": resolution " + std::to_string(w) + "x" +
                        std::to_string(h) + " does not match the model's " +
                        std::to_string(cfg.image_size));
    }
    fs::create_directories(opts.out_dir);

    ImageInference inf = infer_image(params, cfg, image);
    InferSummary summary;
    summary.prediction = inf.prediction;

    if (opts.cluster) {
        if (!opts.stats_path.empty()) {
            std::ifstream f(opts.stats_path);
            if (!f) throw DataError("cannot open stats file " + opts.stats_path);
            try {
                const nlohmann::json doc = nlohmann::json::parse(f);
                summary.threshold = doc.at("uncertainty").at("threshold").get<double>();
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(opts.stats_path + ": " + e.what());
            }
            summary.threshold_source = "stats";
        } else {
            summary.threshold =
                calibrate_threshold(summary.prediction.uncertainty, cfg.k_sigma);
            summary.threshold_source = "image";
        }
        summary.instances =
            cluster_prediction(inf, cfg, summary.threshold, summary.prediction);

        JsonWriter j;
        j.begin_obj();
        j.key("threshold");
        j.num(summary.threshold);
        j.key("threshold_source");
        j.str(summary.threshold_source);
        j.key("fallback_unfiltered");
        j.boolean(summary.prediction.fallback_unfiltered);
        j.key("outliers_reassigned");
        j.integer(static_cast<long long>(summary.instances.outliers_reassigned));
        j.key("instances");
        j.begin_arr();
        for (const AnomalyInstance& inst : summary.instances.instances) {
            j.begin_obj();
            j.key("confidence");
            j.num(inst.confidence);
            j.key("pixel_count");
            j.integer(static_cast<long long>(inst.pixels.size()));
            j.key("pixels");
            j.begin_arr();
            for (std::size_t p : inst.pixels) j.integer(static_cast<long long>(p));
            j.end_arr();
            j.end_obj();
        }
        j.end_arr();
        j.end_obj();
        write_text(opts.out_dir + "/instances.json", j.take() + "\n");
    }

    const std::size_t hw = cfg.image_size * cfg.image_size;
    world::write_pgm16(opts.out_dir + "/class.pgm", summary.prediction.seg_class, cfg.image_size,
                       cfg.image_size);
    world::write_pgm16(opts.out_dir + "/instance.pgm", summary.prediction.seg_instance,
                       cfg.image_size, cfg.image_size);
    std::vector<std::uint8_t> umap(hw);
    for (std::size_t p = 0; p < hw; ++p) {
        umap[p] = static_cast<std::uint8_t>(
            std::lround(255.0 * (summary.prediction.uncertainty[p] + 1.0)));
    }
    world::write_pgm8(opts.out_dir + "/uncertainty.pgm", umap, cfg.image_size, cfg.image_size);
    return summary;
}

EvalSummary run_eval(const EvalOptions& opts) {
    const RunConfig& cfg = opts.config;
    if (opts.scorer == Scorer::sml && opts.stats_path.empty()) {
        throw ConfigError("scorer sml needs --stats; run the stats pass first");
    }
    ModelParams params = load_model(opts.model_path, cfg.image_size);
    const std::vector<world::Sample> data = load_split(opts.data_dir, opts.split);
    const std::size_t hw = cfg.image_size * cfg.image_size;

    LogitStats stats;
    if (opts.scorer == Scorer::sml) stats = load_stats(opts.stats_path);

    std::vector<int> closed_classes;
    for (std::size_t c = 0; c < cfg.n_classes; ++c) closed_classes.push_back(static_cast<int>(c));
    const int anomaly_class = static_cast<int>(cfg.n_classes);

    std::vector<std::uint8_t> is_ood_class(256, 0);
    for (const world::ClassInfo& c : world::default_catalog()) {
        if (c.is_ood) is_ood_class[static_cast<std::size_t>(c.id)] = 1;
    }

    EvalSummary summary;
    summary.has_anomaly = opts.split == world::Split::val_open;

    // The clustering threshold comes from in-distribution images.
    if (summary.has_anomaly) {
        const std::vector<world::Sample> calib =
            load_split(opts.data_dir, world::Split::val_closed);
        std::vector<double> calib_u;
        calib_u.reserve(calib.size() * hw);
        for (const world::Sample& s : calib) {
            ImageInference inf = infer_image(params, cfg, s.image);
            calib_u.insert(calib_u.end(), inf.prediction.uncertainty.begin(),
                           inf.prediction.uncertainty.end());
        }
        summary.threshold = calibrate_threshold(calib_u, cfg.k_sigma);
    }

    PanopticAccumulator pq_closed(closed_classes);
    std::vector<int> open_classes = closed_classes;
    open_classes.push_back(anomaly_class);
    PanopticAccumulator pq_open(open_classes);
    MeanIouAccumulator miou(closed_classes);

    std::vector<double> all_scores;
    std::vector<std::uint8_t> all_anomaly, all_roi;
    std::vector<InstanceDetection> detections;
    std::vector<InstanceGroundTruth> gt_instances;

    for (std::size_t idx = 0; idx < data.size(); ++idx) {
        const world::Sample& sample = data[idx];
        ImageInference inf = infer_image(params, cfg, sample.image);

        std::vector<std::uint8_t> gt_void(hw, 0);
        for (std::size_t p = 0; p < hw; ++p) {
            gt_void[p] = is_ood_class[sample.label.class_map[p]];
        }
        pq_closed.add(inf.prediction.seg_class, inf.prediction.seg_instance,
                      sample.label.class_map, sample.label.instance_map, gt_void);
        miou.add(inf.prediction.seg_class, sample.label.class_map, gt_void);

        if (!summary.has_anomaly) continue;

        std::vector<double> scores;
        if (opts.scorer == Scorer::p2f) {
            scores = inf.prediction.uncertainty;
        } else {
            scores = baseline_scores(opts.scorer, inf.evidence, inf.queries,
                                     opts.scorer == Scorer::sml ? &stats : nullptr);
        }
        all_scores.insert(all_scores.end(), scores.begin(), scores.end());
        for (std::size_t p = 0; p < hw; ++p) all_anomaly.push_back(gt_void[p]);
        all_roi.insert(all_roi.end(), hw, 1);

        // Anomaly instances come from the fused-uncertainty clustering
        // pipeline regardless of the pixel scorer under comparison.
        Prediction open_pred = inf.prediction;
        AnomalyInstances found =
            cluster_prediction(inf, cfg, summary.threshold, open_pred);
        for (const AnomalyInstance& inst : found.instances) {
            detections.push_back({idx, inst.pixels, inst.confidence});
        }

        std::map<std::uint16_t, InstanceGroundTruth> ood_by_id;
        std::vector<std::uint16_t> gt_class_open = sample.label.class_map;
        for (std::size_t p = 0; p < hw; ++p) {
            if (gt_void[p]) {
                gt_class_open[p] = static_cast<std::uint16_t>(anomaly_class);
                auto& gt_inst = ood_by_id[sample.label.instance_map[p]];
                gt_inst.image = idx;
                gt_inst.pixels.push_back(p);
            }
        }
        for (auto& [id, gt_inst] : ood_by_id) {
            (void)id;
            gt_instances.push_back(std::move(gt_inst));
        }
        pq_open.add(open_pred.seg_class, open_pred.seg_instance, gt_class_open,
                    sample.label.instance_map, std::vector<std::uint8_t>(hw, 0));
    }

    summary.panoptic = pq_closed.finalize();
    summary.miou = miou.finalize();
    if (summary.has_anomaly) {
        summary.panoptic_open = pq_open.finalize();
        summary.pixel = pixel_anomaly_metrics(all_scores, all_anomaly, all_roi);
        summary.instance = instance_anomaly_ap(detections, gt_instances);
    }

    JsonWriter j;
    j.begin_obj();
    j.key("split");
    j.str(world::split_name(opts.split));
    j.key("scorer");
    j.str(scorer_name(opts.scorer));
    append_config_echo(j, cfg);
    j.key("panoptic");
    append_panoptic(j, summary.panoptic);
    j.key("miou");
    j.num(summary.miou);
    if (summary.has_anomaly) {
        j.key("panoptic_open");
        append_panoptic(j, summary.panoptic_open);
        j.key("anomaly_pixel");
        j.begin_obj();
        j.key("ap");
        j.num(summary.pixel.ap);
        j.key("fpr_at_95tpr");
        j.num(summary.pixel.fpr_at_95tpr);
        j.end_obj();
        j.key("anomaly_instance");
        j.begin_obj();
        j.key("ap");
        j.num(summary.instance.ap);
        j.key("ap50");
        j.num(summary.instance.ap50);
        j.key("iou_thresholds");
        j.str("0.50:0.05:0.95");
        j.end_obj();
        j.key("uncertainty_threshold");
        j.num(summary.threshold);
        j.key("instance_confidence_rule");
        j.str("1 + mean(U), clamped to [0,1]");
    }
    j.end_obj();
    summary.report = j.take() + "\n";
    write_text(opts.out_path, summary.report);
    return summary;
}

void run_stats(const RunConfig& config, const std::string& model_path,
               const std::string& data_dir, const std::string& out_path) {
    ModelParams params = load_model(model_path, config.image_size);
    const std::vector<world::Sample> data = load_split(data_dir, world::Split::train);
    const std::size_t hw = config.image_size * config.image_size;
    LogitStatsAccumulator acc(config.n_classes);
    std::vector<double> u_all;
    u_all.reserve(data.size() * hw);
    for (const world::Sample& sample : data) {
        ImageInference inf = infer_image(params, config, sample.image);
        acc.add(semantic_logits(inf.evidence, inf.queries), hw);
        u_all.insert(u_all.end(), inf.prediction.uncertainty.begin(),
                     inf.prediction.uncertainty.end());
    }
    const LogitStats stats = acc.finalize();
    double u_mean = 0.0;
    for (double u : u_all) u_mean += u;
    u_mean /= static_cast<double>(u_all.size());
    double u_var = 0.0;
    for (double u : u_all) u_var += (u - u_mean) * (u - u_mean);
    const double u_sigma = std::sqrt(u_var / static_cast<double>(u_all.size()));
    const double u_threshold = calibrate_threshold(u_all, config.k_sigma);

    JsonWriter j;
    j.begin_obj();
    j.key("uncertainty");
    j.begin_obj();
    j.key("mean");
    j.raw_num(u_mean);
    j.key("sigma");
    j.raw_num(u_sigma);
    j.key("k_sigma");
    j.raw_num(config.k_sigma);
    j.key("threshold");
    j.raw_num(u_threshold);
    j.end_obj();
    j.key("mu");
    j.begin_arr();
    for (double v : stats.mu) j.raw_num(v);
    j.end_arr();
    j.key("sigma");
    j.begin_arr();
    for (double v : stats.sigma) j.raw_num(v);
    j.end_arr();
    j.key("warned");
    j.begin_arr();
    for (std::uint8_t v : stats.warned) j.boolean(v != 0);
    j.end_arr();
    j.end_obj();
    write_text(out_path, j.take() + "\n");
}

LogitStats load_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open stats file " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    LogitStats stats;
    try {
        stats.mu = doc.at("mu").get<std::vector<double>>();
        stats.sigma = doc.at("sigma").get<std::vector<double>>();
        for (bool b : doc.at("warned").get<std::vector<bool>>()) {
            stats.warned.push_back(b ? 1 : 0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (stats.mu.size() != stats.sigma.size()) {
        throw ParseError(path + ": mu/sigma length mismatch");
    }
    return stats;
}

}  // namespace p2f::app
