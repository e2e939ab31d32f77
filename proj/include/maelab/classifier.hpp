#pragma once

#include <cstdint>
#include <vector>

#include "maelab/dataset.hpp"
#include "maelab/mae.hpp"
#include "maelab/metrics.hpp"

namespace maelab {

// Per-dimension standardisation of the static features, fit on the
// training split only and reused verbatim everywhere else so no test
// statistics leak into the model.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> stddev;  // floored at 1e-6
};

Standardizer fit_standardizer(const std::vector<LabeledSample>& train);
std::vector<double> standardize(const Standardizer& s, const std::vector<double>& features);

// Deep features first, standardised static features after.
struct FusedVector {
    std::vector<double> values;
    int deep_dim = 0;
    int static_dim = 0;
};

FusedVector fuse(const std::vector<double>& deep, const std::vector<double>& statics,
                 const Standardizer& standardizer);

// Feature-level attention (elementwise logistic gate) followed by a
// small feed-forward network producing one logit per label. Sigmoid is
// applied downstream: labels are independent, not competing.
struct HeadConfig {
    int input_dim = 0;
    int hidden1 = 256;
    int hidden2 = 64;
    int n_labels = kNumLabels;
};

struct AttentionFfnn {
    HeadConfig cfg;
    ParamSet params;
};

AttentionFfnn init_head(const HeadConfig& cfg, uint64_t seed);
AttentionFfnn clone_head(const AttentionFfnn& head);

// fused: [batch, input_dim] -> logits [batch, n_labels].
Tensor head_forward(const AttentionFfnn& head, const Tensor& fused);

// Per-label gate on the attention module output, for inspection.
Tensor attention_weights(const AttentionFfnn& head, const Tensor& fused);

// Mean over batch x labels of -(1 - p_t)^gamma * log(p_t) in the
// numerically stable margin form; gamma = 0 reduces exactly to mean
// binary cross-entropy.
Tensor focal_loss(const Tensor& logits, const std::vector<LabelSet>& labels, double gamma = 2.0);

struct FinetuneConfig {
    double lr = 1e-3;
    int batch_size = 32;
    int max_epochs = 40;
    int patience = 10;
    bool freeze_encoder = false;
    double gamma = 2.0;
    double weight_decay = 0.05;
};

// Patience bookkeeping: stops after `patience` observations without a
// strict improvement; the first observation always becomes the best.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // Returns true when training should stop after this score.
    bool observe(double score) {
        ++epoch_;
        if (epoch_ == 1 || score > best_) {
            best_ = score;
            best_epoch_ = epoch_;
            since_best_ = 0;
        } else {
            ++since_best_;
        }
        return since_best_ >= patience_;
    }

    double best() const { return best_; }
    int best_epoch() const { return best_epoch_; }
    int epochs_seen() const { return epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_best_ = 0;
    double best_ = 0.0;
};

struct FinetuneEpoch {
    int epoch = 0;
    double train_loss = 0.0;
    double val_macro_f1 = 0.0;
    double best_so_far = 0.0;
};

struct FinetuneResult {
    std::vector<FinetuneEpoch> history;
    int best_epoch = 0;
    double best_val_macro_f1 = 0.0;
};

// Joint fine-tuning of encoder + head (encoder updates unless frozen;
// pass encoder == nullptr for the static-features-only variant).
// Validation Macro F1 is monitored each epoch; training stops after
// `patience` epochs without strict improvement and the best-epoch
// parameters are restored before returning.
FinetuneResult finetune(MaeModel* encoder, AttentionFfnn& head, const Standardizer& standardizer,
                        const std::vector<LabeledSample>& train,
                        const std::vector<LabeledSample>& val, const FinetuneConfig& cfg,
                        uint64_t seed);

// Probabilities for a sample set under the current parameters.
EvalBatch evaluate(const MaeModel* encoder, const AttentionFfnn& head,
                   const Standardizer& standardizer, const std::vector<LabeledSample>& samples);

}  // namespace maelab
