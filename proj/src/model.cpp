#include "p2f/model.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include "p2f/errors.hpp"
#include "p2f/matching.hpp"

namespace p2f {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, SplitMix64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    std::vector<double> data(n);
    for (double& v : data) v = rng.next_uniform(-bound, bound);
    return Tensor::from_data(std::move(shape), std::move(data), true);
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
    return {{"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w},
            {"conv2_b", &conv2_b}, {"query_bank", &query_bank}, {"mlp1_w", &mlp1_w},
            {"mlp1_b", &mlp1_b},   {"mlp2_w", &mlp2_w},         {"mlp2_b", &mlp2_b}};
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
    auto mutable_named = const_cast<ModelParams*>(this)->named();
    std::vector<std::pair<std::string, const Tensor*>> out;
    out.reserve(mutable_named.size());
    for (auto& [name, t] : mutable_named) out.emplace_back(name, t);
    return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
    SplitMix64 rng(derive_key(seed, 0x70617261));  // independent of the data streams
    const std::size_t e = config.embed_dim;
    const std::size_t q = config.query_dim;
    const std::size_t h = config.mlp_hidden;
    const std::size_t out_cols = 2 * e + config.n_classes + 1;
    ModelParams p;
    p.config = config;
    p.conv1_w = uniform_init({e, 3 * 9}, 3 * 9, rng);
    p.conv1_b = Tensor::zeros({e}, true);
    p.conv2_w = uniform_init({e, e * 9}, e * 9, rng);
    p.conv2_b = Tensor::zeros({e}, true);
    std::vector<double> bank(config.n_queries * q);
    const double scale = 1.0 / std::sqrt(static_cast<double>(q));
    for (double& v : bank) v = rng.next_gaussian() * scale;
    p.query_bank = Tensor::from_data({config.n_queries, q}, std::move(bank), true);
    p.mlp1_w = uniform_init({q, h}, q, rng);
    p.mlp1_b = Tensor::zeros({h}, true);
    p.mlp2_w = uniform_init({h, out_cols}, h, rng);
    p.mlp2_b = Tensor::zeros({out_cols}, true);
    return p;
}

namespace {

// Fixed sinusoidal position field added to the mid-stem features. Convolutions
// alone are translation invariant, so without this two identical far-apart
// objects get identical embeddings and can never be separated downstream.
constexpr double kPi = 3.14159265358979323846;

Tensor position_field(std::size_t channels, std::size_t height, std::size_t width) {
    std::vector<double> data(channels * height * width);
    for (std::size_t c = 0; c < channels; ++c) {
        // low frequencies only: high ones would push adjacent pixels outside
        // the clustering cosine radius, and the mix keeps far-apart points
        // distinct where any single frequency wraps around
        const double freq = 1.0 + static_cast<double>((c / 4) % 4);
        const std::size_t phase = c % 4;
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                const double ty = 2.0 * kPi * freq * static_cast<double>(y) /
                                  static_cast<double>(height);
                const double tx = 2.0 * kPi * freq * static_cast<double>(x) /
                                  static_cast<double>(width);
                double v = 0.0;
                switch (phase) {
                    case 0: v = std::sin(ty); break;
                    case 1: v = std::cos(ty); break;
                    case 2: v = std::sin(tx); break;
                    default: v = std::cos(tx); break;
                }
                data[c * height * width + y * width + x] = v;
            }
        }
    }
    return Tensor::from_data({channels, height * width}, std::move(data));
}

}  // namespace

std::pair<PixelEmbeddings, MaskQueries> forward(const ModelParams& params, const Tensor& image) {
    const std::size_t s = params.config.image_size;
    const std::size_t e = params.config.embed_dim;
    if (image.shape() != Shape{3, s * s}) {
        throw DimensionError("forward: expected image [3, " + std::to_string(s * s) + "]");
    }
    Tensor h1 = relu(conv3x3(image, params.conv1_w, params.conv1_b, s, s));
    // 2x downsample: averaging input pixels per cell washes out part of the
    // per-pixel image noise that would otherwise fragment the embedding space
    Tensor h2 = avgpool2(h1, s, s);
    Tensor h3 = conv3x3(h2, params.conv2_w, params.conv2_b, s / 2, s / 2);
    // Bilinear upsampling turns the coarse-grid cells into smooth ramps, so
    // neighbouring embeddings drift gradually instead of jumping at cell
    // borders. The per-pixel normalization keeps evidence magnitude in the
    // query vectors; without it the shared feature norm grows with the beta
    // evidence and drags every alpha pre-activation into deep softplus
    // saturation.
    Tensor up = upsample2_bilinear(h3, s / 2, s / 2);
    Tensor app = rmsnorm_cols(up);
    Tensor fe = rmsnorm_cols(add(app, mul_scalar(position_field(e, s, s), 0.65)));

    const std::size_t n_m = params.config.n_queries;
    Tensor q1 = relu(add(matmul(params.query_bank, params.mlp1_w),
                         broadcast_rows(params.mlp1_b, n_m)));
    Tensor q2 = add(matmul(q1, params.mlp2_w), broadcast_rows(params.mlp2_b, n_m));

    MaskQueries queries;
    queries.f_alpha = slice_cols(q2, 0, e);
    queries.f_beta = slice_cols(q2, e, 2 * e);
    queries.class_logits = slice_cols(q2, 2 * e, 2 * e + params.config.n_classes + 1);
    return {PixelEmbeddings{fe}, queries};
}

OptimizerState init_optimizer(const ModelParams& params, const AdamWConfig& config) {
    OptimizerState opt;
    opt.config = config;
    for (const auto& [name, t] : params.named()) {
        (void)name;
        opt.m.emplace_back(t->size(), 0.0);
        opt.v.emplace_back(t->size(), 0.0);
    }
    return opt;
}

namespace {

void apply_adamw(ModelParams& params, OptimizerState& opt) {
    auto named = params.named();
    double sq_norm = 0.0;
    for (auto& [name, t] : named) {
        (void)name;
        if (!t->has_grad()) continue;
        for (double g : t->grad()) sq_norm += g * g;
    }
    const double norm = std::sqrt(sq_norm);
    const double scale = norm > opt.config.clip_norm ? opt.config.clip_norm / norm : 1.0;

    opt.step += 1;
    const double t = static_cast<double>(opt.step);
    const double bc1 = 1.0 - std::pow(opt.config.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.config.beta2, t);
    for (std::size_t k = 0; k < named.size(); ++k) {
        Tensor& p = *named[k].second;
        std::vector<double>& data = p.raw_data();
        const std::vector<double>& grad = p.grad();
        std::vector<double>& m = opt.m[k];
        std::vector<double>& v = opt.v[k];
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double g = grad[i] * scale;
            m[i] = opt.config.beta1 * m[i] + (1.0 - opt.config.beta1) * g;
            v[i] = opt.config.beta2 * v[i] + (1.0 - opt.config.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            data[i] -= opt.config.lr *
                       (mhat / (std::sqrt(vhat) + opt.config.eps) +
                        opt.config.weight_decay * data[i]);
            if (!std::isfinite(data[i])) {
                throw EvaluationError("train_step: parameter " + named[k].first +
                                      " became non-finite after update");
            }
        }
    }
}

}  // namespace

TrainStepResult train_step(ModelParams& params, OptimizerState& opt,
                           const std::vector<world::Sample>& batch, const LossWeights& weights,
                           std::size_t point_budget, SplitMix64& rng) {
    if (batch.empty()) throw DomainError("train_step: empty batch");
    const std::size_t hw = params.config.image_size * params.config.image_size;
    const std::size_t n_m = params.config.n_queries;
    const std::size_t no_object = params.config.n_classes;

    Tensor ce_sum, sdice_sum, evi_sum;
    for (const world::Sample& sample : batch) {
        if (sample.image.size() != 3 * hw) {
            throw DimensionError("train_step: image size mismatch");
        }
        Tensor image = Tensor::from_data({3, hw}, sample.image);
        auto [pixels, queries] = forward(params, image);
        EvidenceMaps evidence = compute_evidence(queries, pixels);

        world::BinaryMasks gt = world::to_binary_masks(sample.label);
        std::vector<std::size_t> match_sample = uniform_sample(hw, point_budget, rng);
        CostMatrix costs = build_cost(evidence, queries.class_logits, gt.masks, gt.classes,
                                      match_sample, weights.lambda_ce, weights.lambda_sdice);
        auto pairs = hungarian(costs);

        std::vector<std::size_t> targets(n_m, no_object);
        Tensor mask_evi_sum, mask_sdice_sum;
        for (const auto& [i, j] : pairs) {
            targets[i] = static_cast<std::size_t>(gt.classes[j]);

            std::vector<double> row(evidence.evi_uncertainty.data().begin() + i * hw,
                                    evidence.evi_uncertainty.data().begin() + (i + 1) * hw);
            std::vector<std::size_t> points = evidential_sample(row, point_budget, rng);
            std::vector<std::size_t> flat(points.size());
            std::vector<double> y(points.size());
            for (std::size_t k = 0; k < points.size(); ++k) {
                flat[k] = i * hw + points[k];
                y[k] = static_cast<double>(gt.masks[j][points[k]]);
            }
            Tensor a = gather(evidence.alpha, flat);
            Tensor b = gather(evidence.beta, flat);
            Tensor yt = Tensor::from_data({points.size()}, std::move(y));
            Tensor evi = beta_nll(a, b, yt);
            Tensor sd = symmetric_dice(a, b, yt);
            mask_evi_sum = mask_evi_sum.defined() ? add(mask_evi_sum, evi) : evi;
            mask_sdice_sum = mask_sdice_sum.defined() ? add(mask_sdice_sum, sd) : sd;
        }
        const double inv_matched = pairs.empty() ? 0.0 : 1.0 / static_cast<double>(pairs.size());
        Tensor evi_mean = mask_evi_sum.defined() ? mul_scalar(mask_evi_sum, inv_matched)
                                                 : Tensor::scalar(0.0);
        Tensor sdice_mean = mask_sdice_sum.defined() ? mul_scalar(mask_sdice_sum, inv_matched)
                                                     : Tensor::scalar(0.0);
        Tensor ce = classification_ce(queries.class_logits, targets, weights.no_object_coeff);

        ce_sum = ce_sum.defined() ? add(ce_sum, ce) : ce;
        sdice_sum = sdice_sum.defined() ? add(sdice_sum, sdice_mean) : sdice_mean;
        evi_sum = evi_sum.defined() ? add(evi_sum, evi_mean) : evi_mean;
    }
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    Tensor ce = mul_scalar(ce_sum, inv_batch);
    Tensor sdice = mul_scalar(sdice_sum, inv_batch);
    Tensor evi = mul_scalar(evi_sum, inv_batch);
    Tensor total = total_loss(ce, sdice, evi, weights);

    TrainStepResult result{ce.value(), sdice.value(), evi.value(), total.value()};
    if (!std::isfinite(result.ce)) throw EvaluationError("train_step: non-finite ce loss");
    if (!std::isfinite(result.sdice)) throw EvaluationError("train_step: non-finite sdice loss");
    if (!std::isfinite(result.evi)) throw EvaluationError("train_step: non-finite evi loss");
    if (!std::isfinite(result.total)) throw EvaluationError("train_step: non-finite total loss");

    total.backward();
    apply_adamw(params, opt);
    return result;
}

namespace {

constexpr char kMagic[4] = {'P', '2', 'F', 'M'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::vector<unsigned char>& buf, std::uint16_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xFF));
    buf.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
}

struct Reader {
    const std::vector<unsigned char>& buf;
    const std::string& path;
    std::size_t pos = 0;

    void need(std::size_t n, const char* what) const {
        if (pos + n > buf.size()) {
            throw ParseError(path + ": truncated " + what + " at byte " + std::to_string(pos));
        }
    }
    std::uint16_t u16() {
        need(2, "u16");
        const std::uint16_t v =
            static_cast<std::uint16_t>(buf[pos] | (buf[pos + 1] << 8));
        pos += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
};

}  // namespace

void save_model(const ModelParams& params, const std::string& path) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u16(buf, kVersion);
    for (const auto& [name, t] : params.named()) {
        put_u16(buf, static_cast<std::uint16_t>(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        buf.push_back(static_cast<unsigned char>(t->shape().size()));
        for (std::size_t d : t->shape()) put_u32(buf, static_cast<std::uint32_t>(d));
        const std::size_t off = buf.size();
        buf.resize(off + 8 * t->size());
        std::memcpy(buf.data() + off, t->data().data(), 8 * t->size());
    }
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_model: cannot open " + path);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("save_model: write failed for " + path);
}

ModelParams load_model(const std::string& path, std::size_t image_size) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_model: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 10) throw ParseError(path + ": file too short (" +
                                          std::to_string(buf.size()) + " bytes)");
    const std::uint32_t stored = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                 (static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8) |
                                 (static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24);
    const std::uint32_t actual = static_cast<std::uint32_t>(crc32(
        0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
    if (stored != actual) {
        throw ParseError(path + ": checksum mismatch at byte " + std::to_string(buf.size() - 4));
    }

    Reader r{buf, path};
    r.need(4, "magic");
    if (std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw ParseError(path + ": bad magic at byte 0");
    }
    r.pos = 4;
    const std::uint16_t version = r.u16();
    if (version != kVersion) {
        throw ParseError(path + ": unsupported format version " + std::to_string(version));
    }

    std::map<std::string, Tensor> records;
    while (r.pos < buf.size() - 4) {
        const std::size_t name_len = r.u16();
        r.need(name_len, "record name");
        std::string name(buf.begin() + r.pos, buf.begin() + r.pos + name_len);
        r.pos += name_len;
        r.need(1, "rank");
        const std::size_t rank = buf[r.pos++];
        Shape shape(rank);
        std::size_t count = 1;
        for (std::size_t d = 0; d < rank; ++d) {
            shape[d] = r.u32();
            count *= shape[d];
        }
        r.need(8 * count, "payload");
        std::vector<double> data(count);
        std::memcpy(data.data(), buf.data() + r.pos, 8 * count);
        r.pos += 8 * count;
        if (!records.emplace(name, Tensor::from_data(std::move(shape), std::move(data), true))
                 .second) {
            throw ParseError(path + ": duplicate record '" + name + "'");
        }
    }

    ModelParams params;
    for (auto& [name, slot] : params.named()) {
        auto it = records.find(name);
        if (it == records.end()) throw ParseError(path + ": missing record '" + name + "'");
        *slot = it->second;
        records.erase(it);
    }
    if (!records.empty()) {
        throw ParseError(path + ": unknown record '" + records.begin()->first + "'");
    }

    ModelConfig cfg;
    cfg.image_size = image_size;
    if (params.conv1_w.shape().size() != 2 || params.query_bank.shape().size() != 2 ||
        params.mlp1_w.shape().size() != 2 || params.mlp2_w.shape().size() != 2) {
        throw ParseError(path + ": parameter rank mismatch");
    }
    cfg.embed_dim = params.conv1_w.shape()[0];
    cfg.n_queries = params.query_bank.shape()[0];
    cfg.query_dim = params.query_bank.shape()[1];
    cfg.mlp_hidden = params.mlp1_w.shape()[1];
    const std::size_t out_cols = params.mlp2_w.shape()[1];
    if (out_cols <= 2 * cfg.embed_dim + 1) {
        throw ParseError(path + ": mlp output narrower than the evidence split");
    }
    cfg.n_classes = out_cols - 2 * cfg.embed_dim - 1;
    params.config = cfg;
    return params;
}

}  // namespace p2f
