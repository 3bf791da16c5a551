#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "p2f/app.hpp"
#include "p2f/errors.hpp"

namespace {

p2f::RunConfig load_run_config(const std::string& path, std::uint64_t seed_override,
                               bool seed_given, long long steps_override) {
    p2f::RunConfig cfg = path.empty() ? p2f::parse_config_text(p2f::default_config_text(),
                                                               "<defaults>")
                                      : p2f::parse_config_file(path);
    if (seed_given) cfg.seed = seed_override;
    if (steps_override >= 0) cfg.steps = static_cast<std::size_t>(steps_override);
    return cfg;
}

p2f::world::Split split_from_name(const std::string& name) {
    if (name == "train") return p2f::world::Split::train;
    if (name == "val_closed") return p2f::world::Split::val_closed;
    if (name == "val_open") return p2f::world::Split::val_open;
    throw p2f::ConfigError("unknown split '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App cli{"evidential mask segmentation toolkit"};
    cli.require_subcommand(1);

    // gen
    auto* gen = cli.add_subcommand("gen", "generate a synthetic dataset");
    p2f::app::GenOptions gen_opts;
    gen->add_option("--seed", gen_opts.seed);
    gen->add_option("--out", gen_opts.out)->required();
    gen->add_option("--counts", gen_opts.counts, "train val_closed val_open image counts")
        ->expected(3);
    gen->add_option("--image-size", gen_opts.image_size);
    gen->add_flag("--force", gen_opts.force, "overwrite a non-empty output directory");

    // shared model/config flags
    std::string config_path, data_dir, out_path, model_path, image_path, stats_path;
    std::string split_name = "val_closed", scorer_name = "p2f";
    std::uint64_t seed_override = 0;
    long long steps_override = -1;
    bool cluster = false;

    auto* train = cli.add_subcommand("train", "train the segmenter");
    train->add_option("--config", config_path);
    train->add_option("--data", data_dir)->required();
    train->add_option("--out", out_path)->required();
    train->add_option("--steps", steps_override, "override the configured step count");
    auto* train_seed = train->add_option("--seed", seed_override);

    auto* infer = cli.add_subcommand("infer", "run single-image inference");
    infer->add_option("--config", config_path);
    infer->add_option("--model", model_path)->required();
    infer->add_option("--image", image_path)->required();
    infer->add_option("--out", out_path)->required();
    infer->add_flag("--cluster", cluster, "emit anomaly instances");
    infer->add_option("--stats", stats_path,
                      "training statistics file for the clustering threshold");

    auto* eval = cli.add_subcommand("eval", "evaluate a model on a split");
    eval->add_option("--config", config_path);
    eval->add_option("--model", model_path)->required();
    eval->add_option("--data", data_dir)->required();
    eval->add_option("--split", split_name)->check(CLI::IsMember({"train", "val_closed",
                                                                  "val_open"}));
    eval->add_option("--scorer", scorer_name)
        ->check(CLI::IsMember({"p2f", "sml", "mm", "eam", "rba", "m2a"}));
    eval->add_option("--out", out_path)->required();
    eval->add_option("--stats", stats_path, "logit statistics file (sml scorer)");

    auto* stats = cli.add_subcommand("stats", "collect semantic-logit statistics");
    stats->add_option("--config", config_path);
    stats->add_option("--model", model_path)->required();
    stats->add_option("--data", data_dir)->required();
    stats->add_option("--out", out_path)->required();

    try {
        cli.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    try {
        if (gen->parsed()) {
            p2f::app::run_gen(gen_opts);
            std::printf("wrote dataset to %s\n", gen_opts.out.c_str());
        } else if (train->parsed()) {
            p2f::app::TrainOptions opts;
            opts.config = load_run_config(config_path, seed_override, train_seed->count() > 0,
                                          steps_override);
            opts.data_dir = data_dir;
            opts.out_dir = out_path;
            const p2f::app::TrainSummary s = p2f::app::run_train(opts);
            std::printf("trained %zu steps; best loss %.6f at step %zu\n", opts.config.steps,
                        s.best_loss, s.best_step);
        } else if (infer->parsed()) {
            p2f::app::InferOptions opts;
            opts.config = load_run_config(config_path, 0, false, -1);
            opts.model_path = model_path;
            opts.image_path = image_path;
            opts.out_dir = out_path;
            opts.cluster = cluster;
            opts.stats_path = stats_path;
            const p2f::app::InferSummary s = p2f::app::run_infer(opts);
            std::printf("inference done; %zu anomaly instances\n", s.instances.instances.size());
        } else if (eval->parsed()) {
            p2f::app::EvalOptions opts;
            opts.config = load_run_config(config_path, 0, false, -1);
            opts.model_path = model_path;
            opts.data_dir = data_dir;
            opts.split = split_from_name(split_name);
            opts.scorer = p2f::scorer_from_name(scorer_name);
            opts.out_path = out_path;
            opts.stats_path = stats_path;
            const p2f::app::EvalSummary s = p2f::app::run_eval(opts);
            std::printf("pq %.4f sq %.4f rq %.4f miou %.4f\n", s.panoptic.pq, s.panoptic.sq,
                        s.panoptic.rq, s.miou);
            if (s.has_anomaly) {
                std::printf("anomaly pixel ap %.4f fpr95 %.4f; instance ap %.4f ap50 %.4f\n",
                            s.pixel.ap, s.pixel.fpr_at_95tpr, s.instance.ap, s.instance.ap50);
            }
        } else if (stats->parsed()) {
            p2f::RunConfig cfg = load_run_config(config_path, 0, false, -1);
            p2f::app::run_stats(cfg, model_path, data_dir, out_path);
            std::printf("wrote logit statistics to %s\n", out_path.c_str());
        }
    } catch (const p2f::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const p2f::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const p2f::ParseError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    }
    return 0;
}
