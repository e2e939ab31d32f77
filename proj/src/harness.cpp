#include "maelab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "json.hpp"
#include "maelab/dataset.hpp"
#include "maelab/threads.hpp"

namespace maelab {

using nlohmann::json;

Split participant_split(const std::vector<Record>& records, double test_fraction,
                        uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw ConfigError("split: test_fraction must be in (0, 1)");
    }
    std::set<std::string> unique_ids;
    for (const Record& r : records) unique_ids.insert(r.participant_id);
    std::vector<std::string> ids(unique_ids.begin(), unique_ids.end());
    const int p = static_cast<int>(ids.size());
    if (p < 2) throw ConfigError("split: need at least 2 participants, got " + std::to_string(p));

    Rng rng(seed);
    rng.shuffle(ids);
    int n_test = static_cast<int>(std::lround(test_fraction * p));
    n_test = std::clamp(n_test, 1, p - 1);

    std::set<std::string> test_ids(ids.begin(), ids.begin() + n_test);
    Split split;
    for (const Record& r : records) {
        (test_ids.count(r.participant_id) ? split.test : split.train).push_back(r);
    }
    split.test_participants.assign(test_ids.begin(), test_ids.end());
    for (const std::string& id : unique_ids) {
        if (!test_ids.count(id)) split.train_participants.push_back(id);
    }
    return split;
}

std::string split_hash(const Split& split) {
    std::string canonical = "train=";
    for (const auto& id : split.train_participants) canonical += id + ",";
    canonical += ";test=";
    for (const auto& id : split.test_participants) canonical += id + ",";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical)));
    return buf;
}

std::vector<std::vector<std::string>> kfold_participants(const std::vector<Record>& records,
                                                         int folds, uint64_t seed) {
    if (folds < 2) throw ConfigError("kfold: folds must be >= 2");
    std::set<std::string> unique_ids;
    for (const Record& r : records) unique_ids.insert(r.participant_id);
    std::vector<std::string> ids(unique_ids.begin(), unique_ids.end());
    if (static_cast<int>(ids.size()) < folds) {
        throw ConfigError("kfold: fewer participants than folds");
    }
    Rng rng(seed);
    rng.shuffle(ids);
    std::vector<std::vector<std::string>> groups(folds);
    for (size_t i = 0; i < ids.size(); ++i) {
        groups[i % folds].push_back(ids[i]);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());
    return groups;
}

HyperCell tune_hyperparameters(const std::vector<Record>& records,
                               const std::vector<HyperCell>& grid, int folds, uint64_t seed,
                               const FoldFit& fit_eval, const Refit& refit) {
    if (grid.empty()) throw ConfigError("tune: empty hyperparameter grid");
    const auto groups = kfold_participants(records, folds, seed);

    HyperCell best = grid[0];
    double best_score = -1.0;
    for (const HyperCell& cell : grid) {
        double score_sum = 0.0;
        for (const auto& held_out : groups) {
            std::set<std::string> val_ids(held_out.begin(), held_out.end());
            std::vector<Record> train, val;
            for (const Record& r : records) {
                (val_ids.count(r.participant_id) ? val : train).push_back(r);
            }
            score_sum += fit_eval(train, val, cell);
        }
        const double mean_score = score_sum / folds;
        if (mean_score > best_score) {
            best_score = mean_score;
            best = cell;
        }
    }
    refit(records, best);
    return best;
}

std::vector<AblationCellSpec> ablation_grid() {
    std::vector<AblationCellSpec> cells;
    for (LossKind loss : {LossKind::ma_error, LossKind::mse}) {
        for (bool norm : {true, false}) {
            for (MaskStrategy mask : {MaskStrategy::content_aware, MaskStrategy::random}) {
                AblationCellSpec cell;
                cell.loss = loss;
                cell.norm_targets = norm;
                cell.mask = mask;
                const std::string loss_name = loss == LossKind::ma_error ? "MA-Error" : "MSE";
                std::string suffix;
                if (norm) suffix += " + Norm";
                if (mask == MaskStrategy::content_aware) suffix += " + CA";
                if (suffix.empty()) suffix = " (Base)";
                cell.display = "SSL-AST (" + loss_name + suffix + ")";
                cell.id = to_string(loss);
                if (norm) cell.id += "+norm";
                if (mask == MaskStrategy::content_aware) cell.id += "+ca";
                cells.push_back(std::move(cell));
            }
        }
    }
    return cells;
}

std::string ablation_config_json(const AblationConfig& cfg) {
    json j;
    j["mae"] = {{"patch_size", cfg.mae.patch_size},
                {"encoder_dim", cfg.mae.encoder_dim},
                {"encoder_depth", cfg.mae.encoder_depth},
                {"encoder_heads", cfg.mae.encoder_heads},
                {"decoder_dim", cfg.mae.decoder_dim},
                {"decoder_depth", cfg.mae.decoder_depth},
                {"decoder_heads", cfg.mae.decoder_heads},
                {"mlp_ratio", cfg.mae.mlp_ratio},
                {"mask_ratio", cfg.mae.mask_ratio},
                {"high_saliency_share", cfg.mae.high_saliency_share}};
    j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                     {"batch_size", cfg.pretrain.batch_size},
                     {"base_lr", cfg.pretrain.base_lr},
                     {"warmup_epochs", cfg.pretrain.warmup_epochs},
                     {"weight_decay", cfg.pretrain.weight_decay}};
    j["finetune"] = {{"lr", cfg.finetune.lr},
                     {"batch_size", cfg.finetune.batch_size},
                     {"max_epochs", cfg.finetune.max_epochs},
                     {"patience", cfg.finetune.patience},
                     {"freeze_encoder", cfg.finetune.freeze_encoder},
                     {"gamma", cfg.finetune.gamma},
                     {"weight_decay", cfg.finetune.weight_decay}};
    j["seeds"] = cfg.seeds;
    j["master_seed"] = cfg.master_seed;
    j["test_fraction"] = cfg.test_fraction;
    j["val_fraction"] = cfg.val_fraction;
    j["target_frames"] = cfg.target_frames;
    j["cell_filter"] = cfg.cell_filter;
    j["include_baselines"] = cfg.include_baselines;
    j["skip_finetune"] = cfg.skip_finetune;
    return j.dump();
}

std::string git_describe() {
    FILE* pipe = popen("git describe --always --dirty 2>/dev/null", "r");
    if (!pipe) return "unknown";
    char buf[128] = {};
    std::string out;
    if (fgets(buf, sizeof(buf), pipe)) out = buf;
    pclose(pipe);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out.empty() ? "unknown" : out;
}

namespace {

constexpr uint64_t kPretrainStream = 0xCE11;
constexpr uint64_t kRandomInitStream = 0xBA5E;
constexpr uint64_t kHeadStream = 0x4EAD;

double mean_macro_f1(const std::vector<MetricsReport>& reports) {
    double sum = 0.0;
    for (const auto& r : reports) sum += r.macro_f1;
    return sum / static_cast<double>(reports.size());
}

// Fine-tune |seeds| times from the given starting encoder (nullptr for
// the static-only head) and evaluate each run on the test split.
void finetune_and_score(CellResult& result, const MaeModel* start_encoder,
                        bool random_init_per_seed, const AblationConfig& cfg, int n_patches,
                        const Standardizer& standardizer,
                        const std::vector<LabeledSample>& ft_train,
                        const std::vector<LabeledSample>& ft_val,
                        const std::vector<LabeledSample>& test) {
    for (uint64_t seed : cfg.seeds) {
        HeadConfig head_cfg;
        head_cfg.input_dim = (start_encoder || random_init_per_seed)
                                 ? cfg.mae.encoder_dim + kStaticDim
                                 : kStaticDim;
        AttentionFfnn head = init_head(head_cfg, mix_seed(kHeadStream, seed));

        MaeModel encoder_storage;
        MaeModel* encoder = nullptr;
        if (random_init_per_seed) {
            encoder_storage =
                init_mae(cfg.mae, n_patches, mix_seed(cfg.master_seed, kRandomInitStream + seed));
            encoder = &encoder_storage;
        } else if (start_encoder) {
            encoder_storage = clone_model(*start_encoder);
            encoder = &encoder_storage;
        }

        finetune(encoder, head, standardizer, ft_train, ft_val, cfg.finetune, seed);
        result.seed_reports.push_back(
            metric_panel(evaluate(encoder, head, standardizer, test)));
    }
    result.mean_macro_f1 = mean_macro_f1(result.seed_reports);
}

}  // namespace

AblationReport run_ablation(const AblationConfig& cfg, const std::vector<Record>& records,
                            const std::filesystem::path& manifest_dir) {
    if (records.empty()) throw ConfigError("ablation: empty manifest");
    if (!cfg.skip_finetune && cfg.seeds.empty()) {
        throw ConfigError("ablation: seed list must be non-empty");
    }
    cfg.mae.validate();

    const Split split = participant_split(records, cfg.test_fraction, cfg.master_seed);
    const std::string hash = split_hash(split);
    const Split ft_split =
        participant_split(split.train, cfg.val_fraction, mix_seed(cfg.master_seed, 1));

    const auto train_samples =
        load_samples(split.train, manifest_dir, cfg.target_frames, cfg.mae.patch_size);
    const auto ft_train =
        load_samples(ft_split.train, manifest_dir, cfg.target_frames, cfg.mae.patch_size);
    const auto ft_val =
        load_samples(ft_split.test, manifest_dir, cfg.target_frames, cfg.mae.patch_size);
    const auto test_samples =
        load_samples(split.test, manifest_dir, cfg.target_frames, cfg.mae.patch_size);

    if (train_samples.empty()) throw ConfigError("ablation: empty training split");
    const int n_patches = train_samples[0].patches.n_patches();

    // Self-supervised pre-training sees the full training split (labels
    // unused); the classifier's standardizer comes from its own
    // training subset only.
    std::vector<PatchGrid> pretrain_corpus;
    pretrain_corpus.reserve(train_samples.size());
    for (const auto& s : train_samples) pretrain_corpus.push_back(s.patches);
    const Standardizer standardizer = fit_standardizer(ft_train);

    std::vector<AblationCellSpec> cells = ablation_grid();
    if (!cfg.cell_filter.empty()) {
        std::vector<AblationCellSpec> kept;
        for (const auto& cell : cells) {
            for (const auto& want : cfg.cell_filter) {
                if (cell.id == want) {
                    kept.push_back(cell);
                    break;
                }
            }
        }
        if (kept.empty()) throw ConfigError("ablation: cell filter matches nothing");
        cells = std::move(kept);
    }

    AblationReport report;
    report.split_hash = hash;
    report.cells.resize(cells.size() + (cfg.include_baselines && !cfg.skip_finetune ? 2 : 0));

    std::vector<std::function<void()>> tasks;
    for (size_t c = 0; c < cells.size(); ++c) {
        tasks.push_back([&, c] {
            CellResult& result = report.cells[c];
            result.id = cells[c].id;
            result.display = cells[c].display;
            result.split_hash = hash;
            try {
                MaeConfig cell_cfg = cfg.mae;
                cell_cfg.loss_kind = cells[c].loss;
                cell_cfg.norm_targets = cells[c].norm_targets;
                cell_cfg.mask_strategy = cells[c].mask;

                // Identical pre-train seed in every cell: cells differ
                // only in the three ablated factors.
                MaeModel model =
                    init_mae(cell_cfg, n_patches, mix_seed(cfg.master_seed, kPretrainStream));
                PretrainResult pretrained = pretrain(model, pretrain_corpus, cfg.pretrain,
                                                     mix_seed(cfg.master_seed, kPretrainStream));
                result.pretrain_loss = pretrained.epoch_loss;

                if (!cfg.skip_finetune) {
                    finetune_and_score(result, &model, false, cfg, n_patches, standardizer,
                                       ft_train, ft_val, test_samples);
                }
            } catch (const std::exception& e) {
                result.error = e.what();
            }
        });
    }
    if (cfg.include_baselines && !cfg.skip_finetune) {
        const size_t random_slot = cells.size();
        const size_t static_slot = cells.size() + 1;
        tasks.push_back([&, random_slot] {
            CellResult& result = report.cells[random_slot];
            result.id = "baseline_random_init";
            result.display = "Random-init encoder (no pre-training)";
            result.split_hash = hash;
            try {
                finetune_and_score(result, nullptr, true, cfg, n_patches, standardizer, ft_train,
                                   ft_val, test_samples);
            } catch (const std::exception& e) {
                result.error = e.what();
            }
        });
        tasks.push_back([&, static_slot] {
            CellResult& result = report.cells[static_slot];
            result.id = "baseline_static_only";
            result.display = "Static features only (131-d)";
            result.split_hash = hash;
            try {
                finetune_and_score(result, nullptr, false, cfg, n_patches, standardizer, ft_train,
                                   ft_val, test_samples);
            } catch (const std::exception& e) {
                result.error = e.what();
            }
        });
    }
    parallel_tasks(std::move(tasks));

    // CSV rows sorted by mean Macro F1 descending, name ascending on ties.
    std::vector<const CellResult*> rows;
    for (const CellResult& r : report.cells) {
        if (r.error.empty() && !r.seed_reports.empty()) rows.push_back(&r);
    }
    std::sort(rows.begin(), rows.end(), [](const CellResult* a, const CellResult* b) {
        if (a->mean_macro_f1 != b->mean_macro_f1) return a->mean_macro_f1 > b->mean_macro_f1;
        return a->display < b->display;
    });

    report.csv = std::string(kCsvHeader) + "\n";
    for (const CellResult* r : rows) {
        if (r->seed_reports.size() >= 2) {
            report.csv += csv_row(r->display, seed_aggregate(r->seed_reports)) + "\n";
        } else {
            report.csv += csv_row(r->display, r->seed_reports[0]) + "\n";
        }
    }

    json meta;
    meta["master_seed"] = cfg.master_seed;
    meta["split_hash"] = hash;
    char cfg_hash[32];
    std::snprintf(cfg_hash, sizeof(cfg_hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a(ablation_config_json(cfg))));
    meta["config_hash"] = cfg_hash;
    meta["git_describe"] = git_describe();
    meta["seeds"] = cfg.seeds;
    json row_meta = json::array();
    for (const CellResult* r : rows) {
        row_meta.push_back({{"model", r->display},
                            {"id", r->id},
                            {"split_hash", r->split_hash},
                            {"mean_macro_f1", r->mean_macro_f1}});
    }
    meta["rows"] = row_meta;
    json failures = json::array();
    for (const CellResult& r : report.cells) {
        if (!r.error.empty()) failures.push_back({{"id", r.id}, {"error", r.error}});
    }
    meta["failed_cells"] = failures;
    report.metadata_json = meta.dump(2);
    return report;
}

}  // namespace maelab
