#include "maelab/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace maelab {

namespace ops_ = maelab::ops;

Standardizer fit_standardizer(const std::vector<LabeledSample>& train) {
    if (train.empty()) throw TensorError("standardizer: empty training split");
    const size_t dim = train[0].static_features.size();
    Standardizer s;
    s.mean.assign(dim, 0.0);
    s.stddev.assign(dim, 0.0);
    for (const auto& sample : train) {
        for (size_t d = 0; d < dim; ++d) s.mean[d] += sample.static_features[d];
    }
    for (double& m : s.mean) m /= static_cast<double>(train.size());
    for (const auto& sample : train) {
        for (size_t d = 0; d < dim; ++d) {
            const double diff = sample.static_features[d] - s.mean[d];
            s.stddev[d] += diff * diff;
        }
    }
    for (double& v : s.stddev) {
        v = std::max(std::sqrt(v / static_cast<double>(train.size())), 1e-6);
    }
    return s;
}

std::vector<double> standardize(const Standardizer& s, const std::vector<double>& features) {
    if (features.size() != s.mean.size()) {
        throw TensorError("standardizer: feature length mismatch");
    }
    std::vector<double> out(features.size());
    for (size_t d = 0; d < features.size(); ++d) {
        out[d] = (features[d] - s.mean[d]) / s.stddev[d];
    }
    return out;
}

FusedVector fuse(const std::vector<double>& deep, const std::vector<double>& statics,
                 const Standardizer& standardizer) {
    FusedVector fused;
    fused.deep_dim = static_cast<int>(deep.size());
    fused.static_dim = static_cast<int>(statics.size());
    fused.values = deep;
    const std::vector<double> z = standardize(standardizer, statics);
    fused.values.insert(fused.values.end(), z.begin(), z.end());
    return fused;
}

AttentionFfnn init_head(const HeadConfig& cfg, uint64_t seed) {
    if (cfg.input_dim <= 0) throw ConfigError("head: input_dim must be positive");
    AttentionFfnn head;
    head.cfg = cfg;
    Rng rng(seed);
    const double std_attn = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
    ParamSet& p = head.params;
    p.add("head.attn.w", Tensor::randn(rng, cfg.input_dim, cfg.input_dim, std_attn, true));
    p.add("head.attn.b", Tensor::zeros(1, cfg.input_dim, true));
    p.add("head.fc1.w", Tensor::randn(rng, cfg.input_dim, cfg.hidden1, std_attn, true));
    p.add("head.fc1.b", Tensor::zeros(1, cfg.hidden1, true));
    p.add("head.fc2.w",
          Tensor::randn(rng, cfg.hidden1, cfg.hidden2,
                        1.0 / std::sqrt(static_cast<double>(cfg.hidden1)), true));
    p.add("head.fc2.b", Tensor::zeros(1, cfg.hidden2, true));
    p.add("head.out.w",
          Tensor::randn(rng, cfg.hidden2, cfg.n_labels,
                        1.0 / std::sqrt(static_cast<double>(cfg.hidden2)), true));
    p.add("head.out.b", Tensor::zeros(1, cfg.n_labels, true));
    return head;
}

AttentionFfnn clone_head(const AttentionFfnn& head) {
    AttentionFfnn copy = init_head(head.cfg, 0);
    copy.params.restore(head.params.snapshot());
    return copy;
}

Tensor attention_weights(const AttentionFfnn& head, const Tensor& fused) {
    return ops_::sigmoid(
        ops_::linear(fused, head.params.at("head.attn.w"), head.params.at("head.attn.b")));
}

Tensor head_forward(const AttentionFfnn& head, const Tensor& fused) {
    if (fused.cols() != head.cfg.input_dim) {
        throw TensorError("head: fused width " + std::to_string(fused.cols()) +
                          " != input_dim " + std::to_string(head.cfg.input_dim));
    }
    Tensor gate = attention_weights(head, fused);
    Tensor weighted = ops_::mul(gate, fused);
    Tensor h1 = ops_::gelu(
        ops_::linear(weighted, head.params.at("head.fc1.w"), head.params.at("head.fc1.b")));
    Tensor h2 = ops_::gelu(
        ops_::linear(h1, head.params.at("head.fc2.w"), head.params.at("head.fc2.b")));
    return ops_::linear(h2, head.params.at("head.out.w"), head.params.at("head.out.b"));
}

Tensor focal_loss(const Tensor& logits, const std::vector<LabelSet>& labels, double gamma) {
    if (gamma < 0.0) throw TensorError("focal_loss: gamma must be >= 0");
    if (logits.rows() != static_cast<int>(labels.size()) || logits.cols() != kNumLabels) {
        throw TensorError("focal_loss: logits shape does not match labels");
    }
    // Margin form: m = y ? z : -z, so p_t = sigmoid(m),
    // -log(p_t) = softplus(-m) and (1 - p_t) = sigmoid(-m).
    std::vector<double> signs(logits.numel());
    for (size_t i = 0; i < labels.size(); ++i) {
        for (int k = 0; k < kNumLabels; ++k) {
            signs[i * kNumLabels + k] = labels[i][k] ? 1.0 : -1.0;
        }
    }
    Tensor sign_tensor = Tensor::from_values(std::move(signs), logits.rows(), logits.cols());
    Tensor neg_margin = ops_::scale(ops_::mul(logits, sign_tensor), -1.0);
    Tensor ce = ops_::softplus(neg_margin);
    Tensor modulator = ops_::pow_scalar(ops_::sigmoid(neg_margin), gamma);
    return ops_::mean_all(ops_::mul(modulator, ce));
}

namespace {

Tensor fused_tensor(const MaeModel* encoder, const Standardizer& standardizer,
                    const LabeledSample& sample, bool freeze_encoder) {
    std::vector<double> statics = standardize(standardizer, sample.static_features);
    if (encoder == nullptr) {
        return Tensor::from_values(std::move(statics), 1, static_cast<int>(statics.size()));
    }
    Tensor static_t =
        Tensor::from_values(std::move(statics), 1, static_cast<int>(statics.size()));
    if (freeze_encoder) {
        NoGradGuard no_grad;
        Tensor feat = extract_feature_tensor(*encoder, sample.patch_tensor);
        return ops_::concat_cols({feat, static_t});
    }
    Tensor feat = extract_feature_tensor(*encoder, sample.patch_tensor);
    return ops_::concat_cols({feat, static_t});
}

}  // namespace

EvalBatch evaluate(const MaeModel* encoder, const AttentionFfnn& head,
                   const Standardizer& standardizer, const std::vector<LabeledSample>& samples) {
    NoGradGuard no_grad;
    EvalBatch batch;
    batch.probabilities.reserve(samples.size());
    batch.labels.reserve(samples.size());
    for (const LabeledSample& sample : samples) {
        Tensor fused = fused_tensor(encoder, standardizer, sample, true);
        Tensor probs = ops_::sigmoid(head_forward(head, fused));
        std::array<double, kNumLabels> row{};
        for (int k = 0; k < kNumLabels; ++k) row[k] = (*probs.data)[k];
        batch.probabilities.push_back(row);
        batch.labels.push_back(sample.labels);
    }
    return batch;
}

FinetuneResult finetune(MaeModel* encoder, AttentionFfnn& head, const Standardizer& standardizer,
                        const std::vector<LabeledSample>& train,
                        const std::vector<LabeledSample>& val, const FinetuneConfig& cfg,
                        uint64_t seed) {
    if (train.empty() || val.empty()) throw ConfigError("finetune: empty train or val split");
    if (cfg.patience < 1 || cfg.max_epochs < 1) {
        throw ConfigError("finetune: patience and max_epochs must be >= 1");
    }

    // One optimizer over head (+ encoder when it is trained). Tensor
    // handles share storage, so stepping the combined set updates the
    // originals.
    ParamSet trainable;
    for (size_t i = 0; i < head.params.size(); ++i) {
        trainable.add(head.params.name(i), head.params.tensor(i));
    }
    const bool train_encoder = encoder != nullptr && !cfg.freeze_encoder;
    if (train_encoder) {
        for (size_t i = 0; i < encoder->params.size(); ++i) {
            trainable.add(encoder->params.name(i), encoder->params.tensor(i));
        }
    }

    AdamWConfig opt_cfg;
    opt_cfg.lr = cfg.lr;
    opt_cfg.weight_decay = cfg.weight_decay;
    AdamW optimizer(opt_cfg);

    FinetuneResult result;
    auto best_snapshot = trainable.snapshot();
    EarlyStopper stopper(cfg.patience);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<int> order(train.size());
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng(mix_seed(seed, 2000 + static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            const double inv_batch = 1.0 / static_cast<double>(end - start);
            trainable.zero_grad();
            for (size_t i = start; i < end; ++i) {
                const LabeledSample& sample = train[order[i]];
                Tensor fused =
                    fused_tensor(encoder, standardizer, sample, cfg.freeze_encoder);
                Tensor logits = head_forward(head, fused);
                Tensor loss = focal_loss(logits, {sample.labels}, cfg.gamma);
                loss_sum += loss.scalar();
                backward(ops_::scale(loss, inv_batch));
            }
            optimizer.step(trainable);
        }

        EvalBatch val_batch = evaluate(encoder, head, standardizer, val);
        const double val_f1 = metric_panel(val_batch).macro_f1;

        const bool should_stop = stopper.observe(val_f1);
        if (stopper.best_epoch() == epoch) {
            best_snapshot = trainable.snapshot();
        }
        result.best_val_macro_f1 = stopper.best();
        result.best_epoch = stopper.best_epoch();
        result.history.push_back({epoch, loss_sum / static_cast<double>(train.size()), val_f1,
                                  stopper.best()});
        if (should_stop) break;
    }

    trainable.restore(best_snapshot);
    return result;
}

}  // namespace maelab
