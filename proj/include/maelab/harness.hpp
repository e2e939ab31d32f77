#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "maelab/classifier.hpp"
#include "maelab/mae.hpp"
#include "maelab/manifest.hpp"

namespace maelab {

// Participant-level split: every recording of a participant lands on
// one side; test participant count = round(test_fraction * P), clamped
// so both sides are non-empty. Record order within each side follows
// the input manifest order.
struct Split {
    std::vector<Record> train;
    std::vector<Record> test;
    std::vector<std::string> train_participants;  // sorted
    std::vector<std::string> test_participants;   // sorted
};

Split participant_split(const std::vector<Record>& records, double test_fraction, uint64_t seed);

// FNV-1a over the sorted participant lists; identifies a split.
std::string split_hash(const Split& split);

// Participants dealt into `folds` disjoint groups covering everyone.
std::vector<std::vector<std::string>> kfold_participants(const std::vector<Record>& records,
                                                         int folds, uint64_t seed);

struct HyperCell {
    double lr = 1e-3;
    int batch_size = 32;
};

// fit_eval(train, val, cell) -> validation Macro F1 for one fold fit;
// refit(full_train, cell) trains the final model on everything.
using FoldFit = std::function<double(const std::vector<Record>&, const std::vector<Record>&,
                                     const HyperCell&)>;
using Refit = std::function<void(const std::vector<Record>&, const HyperCell&)>;

// Participant-level k-fold cross-validation over the grid; selects the
// cell with the best mean validation score (first in grid order on
// ties) and always refits it on the full training data.
HyperCell tune_hyperparameters(const std::vector<Record>& records,
                               const std::vector<HyperCell>& grid, int folds, uint64_t seed,
                               const FoldFit& fit_eval, const Refit& refit);

// ---- ablation over {loss} x {norm} x {mask} ----

struct AblationCellSpec {
    std::string id;        // e.g. "ma_error+norm+ca"
    std::string display;   // e.g. "SSL-AST (MA-Error + Norm + CA)"
    LossKind loss = LossKind::ma_error;
    bool norm_targets = true;
    MaskStrategy mask = MaskStrategy::content_aware;
};

// The 8 cells in canonical order.
std::vector<AblationCellSpec> ablation_grid();

struct AblationConfig {
    MaeConfig mae;  // shared backbone; loss/norm/mask come from the cell
    PretrainConfig pretrain;
    FinetuneConfig finetune;
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    uint64_t master_seed = 7;
    double test_fraction = 0.2;
    double val_fraction = 0.2;
    int target_frames = 256;
    std::vector<std::string> cell_filter;  // ids; empty = every cell
    bool include_baselines = true;
    bool skip_finetune = false;  // pre-train only (loss histories, no CSV rows)
};

struct CellResult {
    std::string id;
    std::string display;
    std::string split_hash;
    std::vector<double> pretrain_loss;
    std::vector<MetricsReport> seed_reports;
    double mean_macro_f1 = 0.0;
    std::string error;  // non-empty if the cell failed; run continues
};

struct AblationReport {
    std::string csv;
    std::string metadata_json;
    std::string split_hash;
    std::vector<CellResult> cells;  // canonical order, baselines last
};

// Protocol: one participant split and one fine-tune seed list shared by
// every cell; one pre-training per cell (fixed seed, identical for all
// cells so only the three ablated factors differ); |seeds| fine-tunings
// per cell; metric panel on the held-out test split; rows sorted by
// mean Macro F1 descending. Baselines: a random-init encoder fine-tuned
// under the identical protocol, and the static-features-only head.
AblationReport run_ablation(const AblationConfig& cfg, const std::vector<Record>& records,
                            const std::filesystem::path& manifest_dir);

// Canonical JSON used for the config hash and the echoed provenance.
std::string ablation_config_json(const AblationConfig& cfg);

std::string git_describe();

}  // namespace maelab
