#include "p2f/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "p2f/errors.hpp"

namespace p2f {

namespace {

std::string trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value,
                    const std::string& origin) {
    std::size_t consumed = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != value.size() || value.empty()) {
        throw ConfigError(origin + ": key '" + key + "' needs a number, got '" + value + "'");
    }
    return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& value,
                         const std::string& origin) {
    std::size_t consumed = 0;
    unsigned long long out = 0;
    try {
        // stoull would wrap negative input instead of failing
        if (value.find('-') == std::string::npos) out = std::stoull(value, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != value.size() || value.empty()) {
        throw ConfigError(origin + ": key '" + key + "' needs a non-negative integer, got '" +
                          value + "'");
    }
    return out;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"seed", [&](const std::string& v) { cfg.seed = parse_uint("seed", v, origin); }},
        {"image_size",
         [&](const std::string& v) { cfg.image_size = parse_uint("image_size", v, origin); }},
        {"embed_dim",
         [&](const std::string& v) { cfg.embed_dim = parse_uint("embed_dim", v, origin); }},
        {"n_queries",
         [&](const std::string& v) { cfg.n_queries = parse_uint("n_queries", v, origin); }},
        {"n_classes",
         [&](const std::string& v) { cfg.n_classes = parse_uint("n_classes", v, origin); }},
        {"query_dim",
         [&](const std::string& v) { cfg.query_dim = parse_uint("query_dim", v, origin); }},
        {"mlp_hidden",
         [&](const std::string& v) { cfg.mlp_hidden = parse_uint("mlp_hidden", v, origin); }},
        {"steps", [&](const std::string& v) { cfg.steps = parse_uint("steps", v, origin); }},
        {"batch_size",
         [&](const std::string& v) { cfg.batch_size = parse_uint("batch_size", v, origin); }},
        {"lr", [&](const std::string& v) { cfg.lr = parse_double("lr", v, origin); }},
        {"beta1", [&](const std::string& v) { cfg.beta1 = parse_double("beta1", v, origin); }},
        {"beta2", [&](const std::string& v) { cfg.beta2 = parse_double("beta2", v, origin); }},
        {"adam_eps",
         [&](const std::string& v) { cfg.adam_eps = parse_double("adam_eps", v, origin); }},
        {"weight_decay",
         [&](const std::string& v) { cfg.weight_decay = parse_double("weight_decay", v, origin); }},
        {"clip_norm",
         [&](const std::string& v) { cfg.clip_norm = parse_double("clip_norm", v, origin); }},
        {"point_budget",
         [&](const std::string& v) { cfg.point_budget = parse_uint("point_budget", v, origin); }},
        {"lambda_ce",
         [&](const std::string& v) { cfg.lambda_ce = parse_double("lambda_ce", v, origin); }},
        {"lambda_sdice",
         [&](const std::string& v) { cfg.lambda_sdice = parse_double("lambda_sdice", v, origin); }},
        {"lambda_evi",
         [&](const std::string& v) { cfg.lambda_evi = parse_double("lambda_evi", v, origin); }},
        {"no_object_coeff",
         [&](const std::string& v) {
             cfg.no_object_coeff = parse_double("no_object_coeff", v, origin);
         }},
        {"object_mask_threshold",
         [&](const std::string& v) {
             cfg.object_mask_threshold = parse_double("object_mask_threshold", v, origin);
         }},
        {"k_sigma",
         [&](const std::string& v) { cfg.k_sigma = parse_double("k_sigma", v, origin); }},
        {"cluster_eps",
         [&](const std::string& v) { cfg.cluster_eps = parse_double("cluster_eps", v, origin); }},
        {"min_samples",
         [&](const std::string& v) { cfg.min_samples = parse_uint("min_samples", v, origin); }},
        {"pq_pass_threshold",
         [&](const std::string& v) {
             cfg.pq_pass_threshold = parse_double("pq_pass_threshold", v, origin);
         }},
    };

    std::istringstream stream(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected key=value, got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
        }
        it->second(value);
        cfg.raw.emplace_back(key, value);
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string default_config_text() {
    return
        "# master seed for data generation, initialization, and sampling\n"
        "seed = 42\n"
        "# square canvas edge in pixels\n"
        "image_size = 64\n"
        "# pixel-embedding channels (also the stem width)\n"
        "embed_dim = 16\n"
        "# number of mask queries\n"
        "n_queries = 8\n"
        "# real classes; class logits carry one extra no-object column\n"
        "n_classes = 4\n"
        "# learned query vector length\n"
        "query_dim = 32\n"
        "# hidden width of the query MLP\n"
        "mlp_hidden = 64\n"
        "# optimizer steps for cmd_train\n"
        "steps = 2000\n"
        "# images per step\n"
        "batch_size = 8\n"
        "# AdamW learning rate\n"
        "lr = 0.001\n"
        "# AdamW first-moment decay\n"
        "beta1 = 0.9\n"
        "# AdamW second-moment decay\n"
        "beta2 = 0.999\n"
        "# AdamW denominator epsilon\n"
        "adam_eps = 1e-8\n"
        "# decoupled weight decay\n"
        "weight_decay = 0.05\n"
        "# global gradient-norm clip\n"
        "clip_norm = 1.0\n"
        "# pixels sampled per mask for the point-based losses and matching\n"
        "point_budget = 1024\n"
        "# classification loss weight\n"
        "lambda_ce = 2.0\n"
        "# symmetric Dice loss weight\n"
        "lambda_sdice = 5.0\n"
        "# evidential (Beta NLL) loss weight\n"
        "lambda_evi = 0.1\n"
        "# cross-entropy weight of no-object targets\n"
        "no_object_coeff = 0.1\n"
        "# minimum winning-class probability for a mask to survive filtering\n"
        "object_mask_threshold = 0.5\n"
        "# uncertainty threshold = mean + k_sigma * std over in-distribution pixels\n"
        "k_sigma = 2.0\n"
        "# cosine-distance radius for the anomaly clustering\n"
        "cluster_eps = 0.04\n"
        "# minimum neighborhood size for a DBSCAN core point (self-counting)\n"
        "min_samples = 17\n"
        "# closed-world panoptic-quality bar for the toy-scale training run\n"
        "pq_pass_threshold = 0.5\n";
}

}  // namespace p2f
