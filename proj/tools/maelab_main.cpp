// maelab: masked-autoencoder spectrogram lab.
//
// Subcommands drive the full pipeline: synth (corpus generation),
// pretrain (stage 1), finetune (stage 2), ablate (the 8-cell grid plus
// baselines), report (human-readable tables and plot data). One JSON
// config file feeds every stage; command-line flags override it and the
// resolved config is echoed into the output directory for provenance.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "maelab/checkpoint.hpp"
#include "maelab/classifier.hpp"
#include "maelab/dataset.hpp"
#include "maelab/harness.hpp"
#include "maelab/mae.hpp"
#include "maelab/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maelab;

namespace {

struct RunConfig {
    uint64_t master_seed = 7;
    std::string out_dir = "maelab_out";
    std::string manifest;  // optional; synth/ablate can create a corpus

    SynthConfig synth;
    MaeConfig mae;
    PretrainConfig pretrain;
    FinetuneConfig finetune;

    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    double test_fraction = 0.2;
    double val_fraction = 0.2;
    int target_frames = 256;
    std::vector<std::string> cells;
    bool include_baselines = true;

    bool synth_seed_given = false;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read_into(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;

    std::ifstream is(path);
    if (!is) throw FormatError("config: cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: bad JSON in '" + path + "': " + e.what());
    }

    check_keys(j,
               {"master_seed", "out_dir", "manifest", "synth", "mae", "pretrain", "finetune",
                "ablation"},
               "config root");
    read_into(j, "master_seed", cfg.master_seed);
    read_into(j, "out_dir", cfg.out_dir);
    read_into(j, "manifest", cfg.manifest);

    if (j.contains("synth")) {
        const json& s = j["synth"];
        check_keys(s,
                   {"n_participants", "recordings_per_participant", "n_mels", "n_frames", "seed",
                    "shimmer_depth", "breath_noise_floor", "jitter_depth", "tremor_depth",
                    "tremor_rate_hz", "feature_noise_sigma"},
                   "synth");
        read_into(s, "n_participants", cfg.synth.n_participants);
        read_into(s, "recordings_per_participant", cfg.synth.recordings_per_participant);
        read_into(s, "n_mels", cfg.synth.n_mels);
        read_into(s, "n_frames", cfg.synth.n_frames);
        if (s.contains("seed")) {
            cfg.synth.seed = s["seed"].get<uint64_t>();
            cfg.synth_seed_given = true;
        }
        read_into(s, "shimmer_depth", cfg.synth.shimmer_depth);
        read_into(s, "breath_noise_floor", cfg.synth.breath_noise_floor);
        read_into(s, "jitter_depth", cfg.synth.jitter_depth);
        read_into(s, "tremor_depth", cfg.synth.tremor_depth);
        read_into(s, "tremor_rate_hz", cfg.synth.tremor_rate_hz);
        read_into(s, "feature_noise_sigma", cfg.synth.feature_noise_sigma);
    }
    if (j.contains("mae")) {
        const json& m = j["mae"];
        check_keys(m,
                   {"patch_size", "encoder_dim", "encoder_depth", "encoder_heads", "decoder_dim",
                    "decoder_depth", "decoder_heads", "mlp_ratio", "mask_ratio", "norm_targets",
                    "loss", "mask_strategy", "high_saliency_share"},
                   "mae");
        read_into(m, "patch_size", cfg.mae.patch_size);
        read_into(m, "encoder_dim", cfg.mae.encoder_dim);
        read_into(m, "encoder_depth", cfg.mae.encoder_depth);
        read_into(m, "encoder_heads", cfg.mae.encoder_heads);
        read_into(m, "decoder_dim", cfg.mae.decoder_dim);
        read_into(m, "decoder_depth", cfg.mae.decoder_depth);
        read_into(m, "decoder_heads", cfg.mae.decoder_heads);
        read_into(m, "mlp_ratio", cfg.mae.mlp_ratio);
        read_into(m, "mask_ratio", cfg.mae.mask_ratio);
        read_into(m, "norm_targets", cfg.mae.norm_targets);
        read_into(m, "high_saliency_share", cfg.mae.high_saliency_share);
        if (m.contains("loss")) cfg.mae.loss_kind = loss_kind_from_string(m["loss"]);
        if (m.contains("mask_strategy")) {
            cfg.mae.mask_strategy = mask_strategy_from_string(m["mask_strategy"]);
        }
    }
    if (j.contains("pretrain")) {
        const json& p = j["pretrain"];
        check_keys(p, {"epochs", "batch_size", "base_lr", "warmup_epochs", "weight_decay"},
                   "pretrain");
        read_into(p, "epochs", cfg.pretrain.epochs);
        read_into(p, "batch_size", cfg.pretrain.batch_size);
        read_into(p, "base_lr", cfg.pretrain.base_lr);
        read_into(p, "warmup_epochs", cfg.pretrain.warmup_epochs);
        read_into(p, "weight_decay", cfg.pretrain.weight_decay);
    }
    if (j.contains("finetune")) {
        const json& f = j["finetune"];
        check_keys(f,
                   {"lr", "batch_size", "max_epochs", "patience", "freeze_encoder", "gamma",
                    "weight_decay"},
                   "finetune");
        read_into(f, "lr", cfg.finetune.lr);
        read_into(f, "batch_size", cfg.finetune.batch_size);
        read_into(f, "max_epochs", cfg.finetune.max_epochs);
        read_into(f, "patience", cfg.finetune.patience);
        read_into(f, "freeze_encoder", cfg.finetune.freeze_encoder);
        read_into(f, "gamma", cfg.finetune.gamma);
        read_into(f, "weight_decay", cfg.finetune.weight_decay);
    }
    if (j.contains("ablation")) {
        const json& a = j["ablation"];
        check_keys(a,
                   {"seeds", "test_fraction", "val_fraction", "target_frames", "cells",
                    "include_baselines"},
                   "ablation");
        read_into(a, "seeds", cfg.seeds);
        read_into(a, "test_fraction", cfg.test_fraction);
        read_into(a, "val_fraction", cfg.val_fraction);
        read_into(a, "target_frames", cfg.target_frames);
        read_into(a, "cells", cfg.cells);
        read_into(a, "include_baselines", cfg.include_baselines);
    }
    return cfg;
}

json resolved_config_json(const RunConfig& cfg) {
    json j;
    j["master_seed"] = cfg.master_seed;
    j["out_dir"] = cfg.out_dir;
    j["manifest"] = cfg.manifest;
    j["synth"] = {{"n_participants", cfg.synth.n_participants},
                  {"recordings_per_participant", cfg.synth.recordings_per_participant},
                  {"n_mels", cfg.synth.n_mels},
                  {"n_frames", cfg.synth.n_frames},
                  {"seed", cfg.synth.seed},
                  {"shimmer_depth", cfg.synth.shimmer_depth},
                  {"breath_noise_floor", cfg.synth.breath_noise_floor},
                  {"jitter_depth", cfg.synth.jitter_depth},
                  {"tremor_depth", cfg.synth.tremor_depth},
                  {"tremor_rate_hz", cfg.synth.tremor_rate_hz},
                  {"feature_noise_sigma", cfg.synth.feature_noise_sigma}};
    j["mae"] = {{"patch_size", cfg.mae.patch_size},
                {"encoder_dim", cfg.mae.encoder_dim},
                {"encoder_depth", cfg.mae.encoder_depth},
                {"encoder_heads", cfg.mae.encoder_heads},
                {"decoder_dim", cfg.mae.decoder_dim},
                {"decoder_depth", cfg.mae.decoder_depth},
                {"decoder_heads", cfg.mae.decoder_heads},
                {"mlp_ratio", cfg.mae.mlp_ratio},
                {"mask_ratio", cfg.mae.mask_ratio},
                {"norm_targets", cfg.mae.norm_targets},
                {"loss", to_string(cfg.mae.loss_kind)},
                {"mask_strategy", to_string(cfg.mae.mask_strategy)},
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
    j["ablation"] = {{"seeds", cfg.seeds},
                     {"test_fraction", cfg.test_fraction},
                     {"val_fraction", cfg.val_fraction},
                     {"target_frames", cfg.target_frames},
                     {"cells", cfg.cells},
                     {"include_baselines", cfg.include_baselines}};
    return j;
}

void echo_config(const RunConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream os(fs::path(cfg.out_dir) / "config.json");
    os << resolved_config_json(cfg).dump(2) << "\n";
}

fs::path require_manifest(const RunConfig& cfg) {
    if (cfg.manifest.empty()) {
        throw ConfigError("a manifest is required; pass --manifest or set \"manifest\"");
    }
    fs::path p(cfg.manifest);
    if (!fs::exists(p)) throw FormatError("manifest '" + cfg.manifest + "' does not exist");
    return p;
}

AblationConfig make_ablation_config(const RunConfig& cfg) {
    AblationConfig a;
    a.mae = cfg.mae;
    a.pretrain = cfg.pretrain;
    a.finetune = cfg.finetune;
    a.seeds = cfg.seeds;
    a.master_seed = cfg.master_seed;
    a.test_fraction = cfg.test_fraction;
    a.val_fraction = cfg.val_fraction;
    a.target_frames = cfg.target_frames;
    a.cell_filter = cfg.cells;
    a.include_baselines = cfg.include_baselines;
    return a;
}

int cmd_synth(const RunConfig& cfg) {
    echo_config(cfg);
    const fs::path corpus_dir = fs::path(cfg.out_dir) / "corpus";
    const auto records = generate_corpus(cfg.synth, corpus_dir);
    std::array<long, kNumLabels> positives{};
    for (const Record& r : records) {
        for (int k = 0; k < kNumLabels; ++k) positives[k] += r.labels[k] ? 1 : 0;
    }
    std::cout << "wrote " << records.size() << " recordings to " << corpus_dir.string() << "\n";
    std::cout << "manifest: " << (corpus_dir / "manifest.jsonl").string() << "\n";
    for (int k = 0; k < kNumLabels; ++k) {
        std::cout << "  " << kLabelNames[k] << ": "
                  << 100.0 * positives[k] / static_cast<double>(records.size()) << "%\n";
    }
    return 0;
}

int cmd_pretrain(const RunConfig& cfg) {
    echo_config(cfg);
    const fs::path manifest_path = require_manifest(cfg);
    const auto records = read_manifest(manifest_path);
    const auto samples = load_samples(records, manifest_path.parent_path(), cfg.target_frames,
                                      cfg.mae.patch_size);
    if (samples.empty()) throw ConfigError("pretrain: manifest has no records");

    std::vector<PatchGrid> corpus;
    corpus.reserve(samples.size());
    for (const auto& s : samples) corpus.push_back(s.patches);

    MaeModel model = init_mae(cfg.mae, corpus[0].n_patches(), cfg.master_seed);

    const std::string config_hash = std::to_string(fnv1a(resolved_config_json(cfg).dump()));
    std::ofstream mask_log(fs::path(cfg.out_dir) / "mask_log.jsonl");
    auto hook = [&](int epoch, int sample, const MaskPlan& plan) {
        mask_log << "{\"epoch\":" << epoch << ","
                 << mask_plan_json(plan, samples[sample].record_id).substr(1) << "\n";
    };

    PretrainResult result = pretrain(model, corpus, cfg.pretrain, cfg.master_seed, hook);

    std::ofstream loss_log(fs::path(cfg.out_dir) / "pretrain_log.jsonl");
    for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
        json line = {{"epoch", e + 1},
                     {"loss", result.epoch_loss[e]},
                     {"config_hash", config_hash}};
        loss_log << line.dump() << "\n";
    }
    write_checkpoint(fs::path(cfg.out_dir) / "encoder_decoder.tgck", model.params);
    std::cout << "pre-trained " << cfg.pretrain.epochs << " epochs on " << corpus.size()
              << " recordings\n";
    if (!result.epoch_loss.empty()) {
        std::cout << "loss: " << result.epoch_loss.front() << " -> " << result.epoch_loss.back()
                  << "\n";
    }
    std::cout << "checkpoint: " << (fs::path(cfg.out_dir) / "encoder_decoder.tgck").string()
              << "\n";
    return 0;
}

int cmd_finetune(const RunConfig& cfg, const std::string& encoder_path, bool random_init) {
    echo_config(cfg);
    if (encoder_path.empty() && !random_init) {
        throw ConfigError("finetune needs --encoder PATH or --random-init");
    }
    const fs::path manifest_path = require_manifest(cfg);
    const auto records = read_manifest(manifest_path);

    const Split split = participant_split(records, cfg.test_fraction, cfg.master_seed);
    const Split ft_split =
        participant_split(split.train, cfg.val_fraction, mix_seed(cfg.master_seed, 1));
    const fs::path dir = manifest_path.parent_path();
    const auto ft_train = load_samples(ft_split.train, dir, cfg.target_frames, cfg.mae.patch_size);
    const auto ft_val = load_samples(ft_split.test, dir, cfg.target_frames, cfg.mae.patch_size);
    const auto test = load_samples(split.test, dir, cfg.target_frames, cfg.mae.patch_size);
    if (ft_train.empty() || ft_val.empty()) throw ConfigError("finetune: split too small");

    const int n_patches = ft_train[0].patches.n_patches();
    MaeModel encoder = init_mae(cfg.mae, n_patches, mix_seed(cfg.master_seed, 0xF17));
    if (!random_init) {
        if (!fs::exists(encoder_path)) {
            throw FormatError("encoder checkpoint '" + encoder_path + "' does not exist");
        }
        load_checkpoint(encoder.params, encoder_path, "enc.");
    }

    const Standardizer standardizer = fit_standardizer(ft_train);
    HeadConfig head_cfg;
    head_cfg.input_dim = cfg.mae.encoder_dim + kStaticDim;
    AttentionFfnn head = init_head(head_cfg, mix_seed(cfg.master_seed, 0x4EAD));

    FinetuneResult result = finetune(&encoder, head, standardizer, ft_train, ft_val,
                                     cfg.finetune, cfg.master_seed);

    std::ofstream history(fs::path(cfg.out_dir) / "finetune_log.jsonl");
    for (const FinetuneEpoch& e : result.history) {
        json line = {{"epoch", e.epoch},
                     {"train_loss", e.train_loss},
                     {"val_macro_f1", e.val_macro_f1},
                     {"best_so_far", e.best_so_far}};
        history << line.dump() << "\n";
    }

    const MetricsReport report = metric_panel(evaluate(&encoder, head, standardizer, test));
    const std::string model_name = random_init ? "Random-init encoder"
                                   : cfg.finetune.freeze_encoder ? "Linear probe"
                                                                 : "Fine-tuned encoder";
    std::ofstream metrics_csv(fs::path(cfg.out_dir) / "metrics.csv");
    metrics_csv << kCsvHeader << "\n" << csv_row(model_name, report) << "\n";

    ParamSet to_save;
    for (size_t i = 0; i < encoder.params.size(); ++i) {
        to_save.add(encoder.params.name(i), encoder.params.tensor(i));
    }
    for (size_t i = 0; i < head.params.size(); ++i) {
        to_save.add(head.params.name(i), head.params.tensor(i));
    }
    to_save.add("head.static_mean",
                Tensor::from_values(standardizer.mean, 1, kStaticDim));
    to_save.add("head.static_std",
                Tensor::from_values(standardizer.stddev, 1, kStaticDim));
    write_checkpoint(fs::path(cfg.out_dir) / "model.tgck", to_save);

    std::cout << "best epoch " << result.best_epoch << " (val Macro F1 "
              << result.best_val_macro_f1 << ")\n";
    std::cout << "test: " << csv_row(model_name, report) << "\n";
    return 0;
}

int cmd_ablate(RunConfig cfg) {
    if (cfg.manifest.empty()) {
        // No corpus supplied: generate one under the run directory.
        const fs::path corpus_dir = fs::path(cfg.out_dir) / "corpus";
        generate_corpus(cfg.synth, corpus_dir);
        cfg.manifest = (corpus_dir / "manifest.jsonl").string();
    }
    echo_config(cfg);
    const fs::path manifest_path = require_manifest(cfg);
    const auto records = read_manifest(manifest_path);

    const AblationReport report =
        run_ablation(make_ablation_config(cfg), records, manifest_path.parent_path());

    std::ofstream csv(fs::path(cfg.out_dir) / "ablation.csv");
    csv << report.csv;
    std::ofstream meta(fs::path(cfg.out_dir) / "ablation_meta.json");
    meta << report.metadata_json << "\n";
    std::ofstream losses(fs::path(cfg.out_dir) / "pretrain_losses.jsonl");
    for (const CellResult& cell : report.cells) {
        for (size_t e = 0; e < cell.pretrain_loss.size(); ++e) {
            json line = {{"cell", cell.id}, {"epoch", e + 1}, {"loss", cell.pretrain_loss[e]}};
            losses << line.dump() << "\n";
        }
    }
    std::cout << report.csv;
    std::cout << "split hash: " << report.split_hash << "\n";
    for (const CellResult& cell : report.cells) {
        if (!cell.error.empty()) {
            std::cout << "cell " << cell.id << " FAILED: " << cell.error << "\n";
        }
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const fs::path dir(run_dir);
    if (!fs::exists(dir)) throw FormatError("run directory '" + run_dir + "' does not exist");
    bool found = false;

    if (fs::exists(dir / "ablation.csv")) {
        found = true;
        std::ifstream csv(dir / "ablation.csv");
        std::string line;
        std::cout << "== ablation results ==\n";
        while (std::getline(csv, line)) {
            // Pad the model column for terminal reading.
            const size_t comma = line.find(',');
            if (comma == std::string::npos) continue;
            std::string model = line.substr(0, comma);
            model.resize(std::max<size_t>(model.size(), 42), ' ');
            std::cout << model << " " << line.substr(comma + 1) << "\n";
        }
    }
    for (const char* log_name : {"pretrain_log.jsonl", "pretrain_losses.jsonl"}) {
        if (!fs::exists(dir / log_name)) continue;
        found = true;
        std::ifstream is(dir / log_name);
        std::ofstream plot(dir / "plot_epoch_loss.csv");
        plot << "cell,epoch,loss\n";
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            plot << (j.contains("cell") ? j["cell"].get<std::string>() : std::string("pretrain"))
                 << "," << j["epoch"] << "," << j["loss"] << "\n";
        }
        std::cout << "wrote " << (dir / "plot_epoch_loss.csv").string() << "\n";
    }
    if (fs::exists(dir / "finetune_log.jsonl")) {
        found = true;
        std::ifstream is(dir / "finetune_log.jsonl");
        std::ofstream plot(dir / "plot_val_f1.csv");
        plot << "epoch,val_macro_f1\n";
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            plot << j["epoch"] << "," << j["val_macro_f1"] << "\n";
        }
        std::cout << "wrote " << (dir / "plot_val_f1.csv").string() << "\n";
    }
    if (!found) throw FormatError("no run logs found in '" + run_dir + "'");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maelab: masked-autoencoder spectrogram lab"};
    app.require_subcommand(1);

    std::string config_path, out_dir, manifest, encoder_path, run_dir, cells_arg;
    uint64_t seed = 0;
    int seeds_n = 0;
    bool seed_given = false, out_given = false, manifest_given = false;
    bool freeze_encoder = false, random_init = false;

    app.add_option("--config", config_path, "JSON run configuration");
    auto* seed_opt = app.add_option("--seed", seed, "master seed override");
    auto* out_opt = app.add_option("--out", out_dir, "output directory override");
    auto* manifest_opt = app.add_option("--manifest", manifest, "manifest path override");
    app.add_option("--cells", cells_arg, "comma-separated ablation cell ids");
    app.add_option("--seeds", seeds_n, "use fine-tune seeds 1..N");
    app.add_flag("--freeze-encoder", freeze_encoder, "linear-probe fine-tuning");

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate the synthetic corpus");
    CLI::App* pretrain_cmd = app.add_subcommand("pretrain", "stage-1 masked pre-training");
    CLI::App* finetune_cmd = app.add_subcommand("finetune", "stage-2 classifier fine-tuning");
    finetune_cmd->add_option("--encoder", encoder_path, "TGCK checkpoint with enc.* entries");
    finetune_cmd->add_flag("--random-init", random_init, "skip pre-trained weights");
    CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the ablation grid");
    CLI::App* report_cmd = app.add_subcommand("report", "summarize run logs, emit plot data");
    report_cmd->add_option("--run", run_dir, "run directory (defaults to out_dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    seed_given = seed_opt->count() > 0;
    out_given = out_opt->count() > 0;
    manifest_given = manifest_opt->count() > 0;

    try {
        RunConfig cfg = load_config(config_path);
        if (seed_given) cfg.master_seed = seed;
        if (out_given) cfg.out_dir = out_dir;
        if (manifest_given) cfg.manifest = manifest;
        if (!cfg.synth_seed_given) cfg.synth.seed = cfg.master_seed;
        if (freeze_encoder) cfg.finetune.freeze_encoder = true;
        if (seeds_n > 0) {
            cfg.seeds.clear();
            for (int s = 1; s <= seeds_n; ++s) cfg.seeds.push_back(static_cast<uint64_t>(s));
        }
        if (!cells_arg.empty()) {
            cfg.cells.clear();
            std::string token;
            for (char c : cells_arg + ",") {
                if (c == ',') {
                    if (!token.empty()) cfg.cells.push_back(token);
                    token.clear();
                } else {
                    token += c;
                }
            }
        }

        if (synth_cmd->parsed()) return cmd_synth(cfg);
        if (pretrain_cmd->parsed()) return cmd_pretrain(cfg);
        if (finetune_cmd->parsed()) return cmd_finetune(cfg, encoder_path, random_init);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg);
        if (report_cmd->parsed()) return cmd_report(run_dir.empty() ? cfg.out_dir : run_dir);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: input: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "error: numeric: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
