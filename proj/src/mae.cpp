#include "maelab/mae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maelab {

namespace ops_ = maelab::ops;

std::string to_string(LossKind k) { return k == LossKind::ma_error ? "ma_error" : "mse"; }

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "ma_error") return LossKind::ma_error;
    if (s == "mse") return LossKind::mse;
    throw ConfigError("unknown loss kind '" + s + "'");
}

void MaeConfig::validate() const {
    if (patch_size <= 0) throw ConfigError("mae: patch_size must be positive");
    if (encoder_dim <= 0 || decoder_dim <= 0) throw ConfigError("mae: dims must be positive");
    if (encoder_depth < 0 || decoder_depth < 0) throw ConfigError("mae: negative depth");
    if (encoder_heads <= 0 || encoder_dim % encoder_heads != 0) {
        throw ConfigError("mae: encoder_dim must be divisible by encoder_heads");
    }
    if (decoder_heads <= 0 || decoder_dim % decoder_heads != 0) {
        throw ConfigError("mae: decoder_dim must be divisible by decoder_heads");
    }
    if (mlp_ratio <= 0) throw ConfigError("mae: mlp_ratio must be positive");
    if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
        throw ConfigError("mae: mask_ratio must be in (0, 1)");
    }
    if (!(high_saliency_share > 0.0 && high_saliency_share < 1.0)) {
        throw ConfigError("mae: high_saliency_share must be in (0, 1)");
    }
}

namespace {

constexpr double kInitStd = 0.05;
constexpr double kLnEps = 1e-5;
constexpr double kTargetNormEps = 1e-6;

void add_block_params(ParamSet& params, const std::string& prefix, int dim, int mlp_ratio,
                      Rng& rng) {
    const int hidden = dim * mlp_ratio;
    params.add(prefix + ".ln1.g", Tensor::full(1, dim, 1.0, true));
    params.add(prefix + ".ln1.b", Tensor::zeros(1, dim, true));
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
        params.add(prefix + ".attn." + std::string(w), Tensor::randn(rng, dim, dim, kInitStd, true));
    }
    for (const char* b : {"bq", "bk", "bv", "bo"}) {
        params.add(prefix + ".attn." + std::string(b), Tensor::zeros(1, dim, true));
    }
    params.add(prefix + ".ln2.g", Tensor::full(1, dim, 1.0, true));
    params.add(prefix + ".ln2.b", Tensor::zeros(1, dim, true));
    params.add(prefix + ".ffn.w1", Tensor::randn(rng, dim, hidden, kInitStd, true));
    params.add(prefix + ".ffn.b1", Tensor::zeros(1, hidden, true));
    params.add(prefix + ".ffn.w2", Tensor::randn(rng, hidden, dim, kInitStd, true));
    params.add(prefix + ".ffn.b2", Tensor::zeros(1, dim, true));
}

Tensor layer_norm_affine(const ParamSet& params, const std::string& prefix, const Tensor& x) {
    return ops_::layer_norm_affine(x, params.at(prefix + ".g"), params.at(prefix + ".b"), kLnEps);
}

Tensor attention(const ParamSet& params, const std::string& prefix, const Tensor& x, int heads) {
    const int dim = x.cols();
    const int head_dim = dim / heads;
    Tensor q = ops_::linear(x, params.at(prefix + ".wq"), params.at(prefix + ".bq"));
    Tensor k = ops_::linear(x, params.at(prefix + ".wk"), params.at(prefix + ".bk"));
    Tensor v = ops_::linear(x, params.at(prefix + ".wv"), params.at(prefix + ".bv"));

    std::vector<Tensor> head_outputs;
    head_outputs.reserve(heads);
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = ops_::slice_cols(q, h * head_dim, head_dim);
        Tensor kh = ops_::slice_cols(k, h * head_dim, head_dim);
        Tensor vh = ops_::slice_cols(v, h * head_dim, head_dim);
        Tensor scores = ops_::scale(ops_::matmul_nt(qh, kh), inv_sqrt);
        Tensor weights = ops_::softmax_rows(scores);
        head_outputs.push_back(ops_::matmul(weights, vh));
    }
    Tensor merged = heads == 1 ? head_outputs[0] : ops_::concat_cols(head_outputs);
    return ops_::linear(merged, params.at(prefix + ".wo"), params.at(prefix + ".bo"));
}

// Pre-norm transformer block: x + Attn(LN(x)), then x + FFN(LN(x)).
Tensor block_forward(const ParamSet& params, const std::string& prefix, const Tensor& x,
                     int heads) {
    Tensor h = ops_::add(x, attention(params, prefix + ".attn",
                                      layer_norm_affine(params, prefix + ".ln1", x), heads));
    Tensor ffn_in = layer_norm_affine(params, prefix + ".ln2", h);
    Tensor ffn = ops_::linear(
        ops_::gelu(ops_::linear(ffn_in, params.at(prefix + ".ffn.w1"), params.at(prefix + ".ffn.b1"))),
        params.at(prefix + ".ffn.w2"), params.at(prefix + ".ffn.b2"));
    return ops_::add(h, ffn);
}

Tensor encoder_trunk(const MaeModel& model, Tensor tokens) {
    for (int i = 0; i < model.cfg.encoder_depth; ++i) {
        tokens = block_forward(model.params, "enc.blk" + std::to_string(i), tokens,
                               model.cfg.encoder_heads);
    }
    return layer_norm_affine(model.params, "enc.norm", tokens);
}

}  // namespace

namespace {

// Flat learnable positional table; with a known grid the init is the
// sum of a row pattern and a column pattern.
Tensor positional_init(Rng& rng, int n_patches, int dim, int grid_cols) {
    if (grid_cols <= 0 || n_patches % grid_cols != 0) {
        return Tensor::randn(rng, n_patches, dim, kInitStd, true);
    }
    const int grid_rows = n_patches / grid_cols;
    Tensor rows = Tensor::randn(rng, grid_rows, dim, kInitStd);
    Tensor cols = Tensor::randn(rng, grid_cols, dim, kInitStd);
    Tensor pos = Tensor::zeros(n_patches, dim, true);
    for (int p = 0; p < n_patches; ++p) {
        for (int e = 0; e < dim; ++e) {
            pos.at(p, e) = rows.at(p / grid_cols, e) + cols.at(p % grid_cols, e);
        }
    }
    return pos;
}

}  // namespace

MaeModel init_mae(const MaeConfig& cfg, int n_patches, uint64_t seed, int grid_cols) {
    cfg.validate();
    if (n_patches < 2) throw ConfigError("mae: need at least 2 patches");

    MaeModel model;
    model.cfg = cfg;
    model.n_patches = n_patches;
    Rng rng(seed);
    const int k = cfg.patch_size * cfg.patch_size;

    ParamSet& p = model.params;
    p.add("enc.input_stats", Tensor::from_values({0.0, 1.0}, 1, 2, false));
    p.add("enc.patch_proj.w", Tensor::randn(rng, k, cfg.encoder_dim, kInitStd, true));
    p.add("enc.patch_proj.b", Tensor::zeros(1, cfg.encoder_dim, true));
    p.add("enc.pos", positional_init(rng, n_patches, cfg.encoder_dim, grid_cols));
    for (int i = 0; i < cfg.encoder_depth; ++i) {
        add_block_params(p, "enc.blk" + std::to_string(i), cfg.encoder_dim, cfg.mlp_ratio, rng);
    }
    p.add("enc.norm.g", Tensor::full(1, cfg.encoder_dim, 1.0, true));
    p.add("enc.norm.b", Tensor::zeros(1, cfg.encoder_dim, true));

    p.add("dec.embed.w", Tensor::randn(rng, cfg.encoder_dim, cfg.decoder_dim, kInitStd, true));
    p.add("dec.embed.b", Tensor::zeros(1, cfg.decoder_dim, true));
    p.add("dec.mask_token", Tensor::randn(rng, 1, cfg.decoder_dim, kInitStd, true));
    p.add("dec.pos", positional_init(rng, n_patches, cfg.decoder_dim, grid_cols));
    for (int i = 0; i < cfg.decoder_depth; ++i) {
        add_block_params(p, "dec.blk" + std::to_string(i), cfg.decoder_dim, cfg.mlp_ratio, rng);
    }
    p.add("dec.norm.g", Tensor::full(1, cfg.decoder_dim, 1.0, true));
    p.add("dec.norm.b", Tensor::zeros(1, cfg.decoder_dim, true));
    p.add("dec.head.w", Tensor::randn(rng, cfg.decoder_dim, k, kInitStd, true));
    p.add("dec.head.b", Tensor::zeros(1, k, true));
    return model;
}

MaeModel clone_model(const MaeModel& model) {
    MaeModel copy = init_mae(model.cfg, model.n_patches, 0);  // values overwritten below
    copy.params.restore(model.params.snapshot());
    return copy;
}

void set_input_stats(MaeModel& model, const std::vector<PatchGrid>& corpus) {
    double mean = 0.0;
    size_t count = 0;
    for (const PatchGrid& g : corpus) {
        for (double v : g.values) mean += v;
        count += g.values.size();
    }
    if (count == 0) throw TensorError("input_stats: empty corpus");
    mean /= static_cast<double>(count);
    double var = 0.0;
    for (const PatchGrid& g : corpus) {
        for (double v : g.values) var += (v - mean) * (v - mean);
    }
    var /= static_cast<double>(count);
    Tensor& stats = model.params.at("enc.input_stats");
    (*stats.data)[0] = mean;
    (*stats.data)[1] = std::max(std::sqrt(var), 1e-6);
}

namespace {

// Dataset-level standardisation in front of the patch projection.
Tensor standardize_input(const MaeModel& model, const Tensor& patches) {
    const Tensor& stats = model.params.at("enc.input_stats");
    const double mean = (*stats.data)[0];
    const double stddev = (*stats.data)[1];
    if (mean == 0.0 && stddev == 1.0) return patches;
    return ops_::scale(ops_::add_scalar(patches, -mean), 1.0 / stddev);
}

}  // namespace

Tensor encode_visible(const MaeModel& model, const Tensor& patches, const MaskPlan& plan) {
    const int k = model.cfg.patch_size * model.cfg.patch_size;
    if (patches.rows() != plan.n_total || plan.n_total != model.n_patches) {
        throw TensorError("encode_visible: patch count " + std::to_string(patches.rows()) +
                          " does not match plan/model (" + std::to_string(plan.n_total) + "/" +
                          std::to_string(model.n_patches) + ")");
    }
    if (patches.cols() != k) {
        throw TensorError("encode_visible: patch width " + std::to_string(patches.cols()) +
                          " != patch_size^2 " + std::to_string(k));
    }
    Tensor visible = standardize_input(model, ops_::gather_rows(patches, plan.visible));
    Tensor tokens = ops_::linear(visible, model.params.at("enc.patch_proj.w"),
                                 model.params.at("enc.patch_proj.b"));
    tokens = ops_::add(tokens, ops_::gather_rows(model.params.at("enc.pos"), plan.visible));
    return encoder_trunk(model, tokens);
}

Tensor decode_reconstruct(const MaeModel& model, const Tensor& encoded, const MaskPlan& plan) {
    if (encoded.rows() != static_cast<int>(plan.visible.size())) {
        throw TensorError("decode_reconstruct: token count " + std::to_string(encoded.rows()) +
                          " does not match plan visible count " +
                          std::to_string(plan.visible.size()));
    }
    Tensor tokens = ops_::linear(encoded, model.params.at("dec.embed.w"),
                                 model.params.at("dec.embed.b"));
    Tensor mask_rows =
        ops_::repeat_row(model.params.at("dec.mask_token"), static_cast<int>(plan.masked.size()));
    Tensor stacked = ops_::concat_rows(tokens, mask_rows);

    // Position p reads row rank(p | visible) or |visible| + rank(p | masked).
    std::vector<int> source_row(plan.n_total);
    size_t vi = 0, mi = 0;
    for (int pos = 0; pos < plan.n_total; ++pos) {
        if (vi < plan.visible.size() && plan.visible[vi] == pos) {
            source_row[pos] = static_cast<int>(vi++);
        } else {
            source_row[pos] = static_cast<int>(plan.visible.size() + mi);
            if (mi < plan.masked.size() && plan.masked[mi] == pos) ++mi;
        }
    }
    Tensor full = ops_::gather_rows(stacked, source_row);
    full = ops_::add(full, model.params.at("dec.pos"));
    for (int i = 0; i < model.cfg.decoder_depth; ++i) {
        full = block_forward(model.params, "dec.blk" + std::to_string(i), full,
                             model.cfg.decoder_heads);
    }
    full = layer_norm_affine(model.params, "dec.norm", full);
    return ops_::linear(full, model.params.at("dec.head.w"), model.params.at("dec.head.b"));
}

Tensor recon_loss(const Tensor& pred, const Tensor& target_patches, const MaskPlan& plan,
                  LossKind kind, bool norm_targets) {
    if (plan.masked.empty()) throw TensorError("recon_loss: plan has no masked patches");
    if (pred.shape != target_patches.shape || pred.rows() != plan.n_total) {
        throw TensorError("recon_loss: prediction/target shapes do not match the plan");
    }
    const int k = pred.cols();
    const int m = static_cast<int>(plan.masked.size());

    std::vector<double> target(static_cast<size_t>(m) * k);
    for (int r = 0; r < m; ++r) {
        const double* src = target_patches.data->data() +
                            static_cast<size_t>(plan.masked[r]) * k;
        double* dst = target.data() + static_cast<size_t>(r) * k;
        if (norm_targets) {
            NormalizedPatch np = patch_normalize(src, k, kTargetNormEps);
            std::copy(np.values.begin(), np.values.end(), dst);
        } else {
            std::copy(src, src + k, dst);
        }
    }
    Tensor target_tensor = Tensor::from_values(std::move(target), m, k);
    Tensor diff = ops_::sub(ops_::gather_rows(pred, plan.masked), target_tensor);
    return kind == LossKind::ma_error ? ops_::mean_all(ops_::abs_val(diff))
                                      : ops_::mean_all(ops_::mul(diff, diff));
}

Tensor extract_feature_tensor(const MaeModel& model, const Tensor& patches) {
    if (patches.rows() != model.n_patches) {
        throw TensorError("extract_feature: patch count does not match model");
    }
    Tensor tokens = ops_::linear(standardize_input(model, patches),
                                 model.params.at("enc.patch_proj.w"),
                                 model.params.at("enc.patch_proj.b"));
    tokens = ops_::add(tokens, model.params.at("enc.pos"));
    return ops_::mean_over_rows(encoder_trunk(model, tokens));
}

std::vector<double> extract_feature(const MaeModel& model, const PatchGrid& patches) {
    NoGradGuard no_grad;
    Tensor feature = extract_feature_tensor(model, patches_to_tensor(patches));
    return *feature.data;
}

PretrainResult pretrain(MaeModel& model, const std::vector<PatchGrid>& corpus,
                        const PretrainConfig& cfg, uint64_t seed,
                        const MaskPlanHook& plan_hook) {
    if (corpus.empty()) throw TensorError("pretrain: empty corpus");
    if (cfg.batch_size < 1) throw ConfigError("pretrain: batch_size must be >= 1");
    for (const PatchGrid& g : corpus) {
        if (g.n_patches() != model.n_patches) {
            throw TensorError("pretrain: corpus patch grid does not match model");
        }
    }

    set_input_stats(model, corpus);

    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.base_lr;
    opt_cfg.weight_decay = cfg.weight_decay;
    AdamW optimizer(opt_cfg);

    std::vector<Tensor> patch_tensors;
    patch_tensors.reserve(corpus.size());
    for (const PatchGrid& g : corpus) patch_tensors.push_back(patches_to_tensor(g));

    PretrainResult result;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double warm = cfg.warmup_epochs > 0
                                ? std::min(1.0, static_cast<double>(epoch) / cfg.warmup_epochs)
                                : 1.0;
        double schedule = warm;
        if (cfg.cosine_decay && epoch > cfg.warmup_epochs && cfg.epochs > cfg.warmup_epochs) {
            const double progress = static_cast<double>(epoch - cfg.warmup_epochs) /
                                    static_cast<double>(cfg.epochs - cfg.warmup_epochs);
            schedule = 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
        }
        optimizer.set_lr(cfg.base_lr * schedule);

        std::vector<int> order(corpus.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(mix_seed(seed, 1000 + static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double epoch_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            model.params.zero_grad();
            for (size_t i = start; i < end; ++i) {
                const int sample = order[i];
                const uint64_t plan_seed =
                    mix_seed(mix_seed(seed, static_cast<uint64_t>(epoch)),
                             static_cast<uint64_t>(sample));
                MaskPlan plan =
                    model.cfg.mask_strategy == MaskStrategy::content_aware
                        ? content_aware_mask(corpus[sample].per_patch_var, model.cfg.mask_ratio,
                                             plan_seed, model.cfg.high_saliency_share)
                        : random_mask(model.n_patches, model.cfg.mask_ratio, plan_seed);
                if (plan_hook) plan_hook(epoch, sample, plan);

                try {
                    Tensor encoded = encode_visible(model, patch_tensors[sample], plan);
                    Tensor pred = decode_reconstruct(model, encoded, plan);
                    Tensor loss = recon_loss(pred, patch_tensors[sample], plan,
                                             model.cfg.loss_kind, model.cfg.norm_targets);
                    epoch_sum += loss.scalar();
                    backward(ops_::scale(loss, inv_batch));
                } catch (const NumericError& e) {
                    throw NumericError("pretrain: epoch " + std::to_string(epoch) + ", sample " +
                                       std::to_string(sample) + ": " + e.what());
                }
            }
            optimizer.step(model.params);
        }
        result.epoch_loss.push_back(epoch_sum / static_cast<double>(order.size()));
    }
    return result;
}

}  // namespace maelab
