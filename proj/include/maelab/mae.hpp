#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "maelab/adamw.hpp"
#include "maelab/masking.hpp"
#include "maelab/ops.hpp"
#include "maelab/params.hpp"
#include "maelab/patches.hpp"

namespace maelab {

enum class LossKind { ma_error, mse };

std::string to_string(LossKind k);
LossKind loss_kind_from_string(const std::string& s);

// Architecture and objective switches for the masked-autoencoder stage.
//
// The default dims are the desk profile: a configuration sized so the
// whole 8-cell ablation pre-trains in minutes on one CPU core. Larger
// dims (e.g. encoder 768/12/12, decoder 256/4/8) are plain config
// values away; nothing in the code assumes the desk sizes.
struct MaeConfig {
    int patch_size = 16;
    int encoder_dim = 64;
    int encoder_depth = 2;
    int encoder_heads = 4;
    int decoder_dim = 32;
    int decoder_depth = 2;
    int decoder_heads = 2;
    int mlp_ratio = 2;
    double mask_ratio = 0.75;
    bool norm_targets = true;
    LossKind loss_kind = LossKind::ma_error;
    MaskStrategy mask_strategy = MaskStrategy::content_aware;
    double high_saliency_share = 0.7;

    void validate() const;
};

// Parameter bundle. Names carry "enc." / "dec." prefixes so checkpoints
// support encoder-only loading after the decoder is discarded.
//
// "enc.input_stats" holds a fixed dataset-level (mean, std) applied to
// patch values before projection, the usual spectrogram-transformer
// input standardisation. It is not trainable and is distinct from the
// ablated per-patch target normalisation; reconstruction targets stay
// raw.
struct MaeModel {
    MaeConfig cfg;
    int n_patches = 0;
    ParamSet params;
};

// Computes mean/std of all patch values and fixes them in the model.
void set_input_stats(MaeModel& model, const std::vector<PatchGrid>& corpus);

// grid_cols > 0 initialises positional embeddings factorised as
// row-pattern + column-pattern (they stay flat and learnable), which
// hands attention the grid geometry from the first step.
MaeModel init_mae(const MaeConfig& cfg, int n_patches, uint64_t seed, int grid_cols = 0);

// Deep copy (fresh parameter storage, same values).
MaeModel clone_model(const MaeModel& model);

// Embeds only the visible patches (projection + positional embedding at
// the original patch position) and runs the encoder. Output rows follow
// ascending visible index; masked patch contents are never read.
Tensor encode_visible(const MaeModel& model, const Tensor& patches, const MaskPlan& plan);

// Projects encoder tokens into the decoder width, inserts the learnable
// mask token at masked positions, adds decoder positional embeddings,
// and reconstructs every position: [n_total, patch_size^2].
Tensor decode_reconstruct(const MaeModel& model, const Tensor& encoded, const MaskPlan& plan);

// Reconstruction objective over masked positions only, reported as a
// per-element mean so the two loss kinds are directly comparable. With
// norm_targets each target patch is standardised by its own statistics
// before comparison.
Tensor recon_loss(const Tensor& pred, const Tensor& target_patches, const MaskPlan& plan,
                  LossKind kind, bool norm_targets);

// Full (unmasked) sequence through the encoder, mean-pooled over
// tokens. The encoder always consumes raw patch values; target
// normalisation applies to the reconstruction objective only.
Tensor extract_feature_tensor(const MaeModel& model, const Tensor& patches);
std::vector<double> extract_feature(const MaeModel& model, const PatchGrid& patches);

struct PretrainConfig {
    int epochs = 30;
    int batch_size = 32;
    double base_lr = 2e-3;
    int warmup_epochs = 5;  // linear warmup
    bool cosine_decay = false;  // after warmup: cosine to zero instead of constant
    double weight_decay = 0.05;
};

struct PretrainResult {
    std::vector<double> epoch_loss;  // mean per-sample loss per epoch
};

// Observer for mask-plan audit logs; sample is the corpus index.
using MaskPlanHook = std::function<void(int epoch, int sample, const MaskPlan& plan)>;

// One fresh MaskPlan per sample per epoch, strategy from the model
// config; deterministic given the seed. Aborts with diagnostics if the
// loss goes non-finite.
PretrainResult pretrain(MaeModel& model, const std::vector<PatchGrid>& corpus,
                        const PretrainConfig& cfg, uint64_t seed,
                        const MaskPlanHook& plan_hook = {});

}  // namespace maelab
