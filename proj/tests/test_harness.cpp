#include "doctest.h"

#include <filesystem>
#include <set>
#include <sstream>

#include "json.hpp"
#include "maelab/harness.hpp"
#include "maelab/synth.hpp"

using namespace maelab;
namespace fs = std::filesystem;

namespace {

std::vector<Record> fake_records(int participants, int recs_each) {
    std::vector<Record> records;
    for (int p = 0; p < participants; ++p) {
        for (int r = 0; r < recs_each; ++r) {
            Record rec;
            rec.participant_id = "p" + std::to_string(p);
            rec.record_id = rec.participant_id + "_r" + std::to_string(r);
            rec.path = rec.record_id + ".spgm";
            rec.static_features.assign(kStaticDim, 0.0);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

}  // namespace

TEST_CASE("participant_split: 48 participants give 10 test, 38 train") {
    const auto records = fake_records(48, 2);
    const Split split = participant_split(records, 0.2, 7);
    CHECK(split.test_participants.size() == 10);
    CHECK(split.train_participants.size() == 38);
    CHECK(split.train.size() + split.test.size() == records.size());

    std::set<std::string> train_set(split.train_participants.begin(),
                                    split.train_participants.end());
    for (const auto& id : split.test_participants) CHECK(train_set.count(id) == 0);
    for (const Record& r : split.test) {
        CHECK(std::find(split.test_participants.begin(), split.test_participants.end(),
                        r.participant_id) != split.test_participants.end());
    }
}

TEST_CASE("participant_split: deterministic per seed, different across seeds") {
    const auto records = fake_records(20, 3);
    const Split a = participant_split(records, 0.2, 5);
    const Split b = participant_split(records, 0.2, 5);
    const Split c = participant_split(records, 0.2, 6);
    CHECK(a.test_participants == b.test_participants);
    CHECK(split_hash(a) == split_hash(b));
    CHECK(split_hash(a) != split_hash(c));
}

TEST_CASE("participant_split input validation") {
    CHECK_THROWS_AS(participant_split(fake_records(1, 3), 0.2, 1), ConfigError);
    CHECK_THROWS_AS(participant_split(fake_records(10, 1), 0.0, 1), ConfigError);
}

TEST_CASE("kfold_participants: folds partition the participants") {
    const auto records = fake_records(17, 2);
    const auto folds = kfold_participants(records, 5, 3);
    REQUIRE(folds.size() == 5);
    std::set<std::string> seen;
    size_t total = 0;
    for (const auto& fold : folds) {
        CHECK(!fold.empty());
        total += fold.size();
        for (const auto& id : fold) CHECK(seen.insert(id).second);
    }
    CHECK(total == 17);
    CHECK_THROWS_AS(kfold_participants(fake_records(3, 1), 5, 1), ConfigError);
    CHECK_THROWS_AS(kfold_participants(records, 1, 1), ConfigError);
}

TEST_CASE("tune_hyperparameters: 3x3 grid runs exactly 45 fold-fits then one refit") {
    const auto records = fake_records(15, 2);
    std::vector<HyperCell> grid;
    for (double lr : {1e-3, 5e-4, 1e-4}) {
        for (int batch : {32, 64, 128}) grid.push_back({lr, batch});
    }
    int fold_fits = 0, refits = 0;
    HyperCell refit_cell{};
    const HyperCell best = tune_hyperparameters(
        records, grid, 5, 11,
        [&](const std::vector<Record>& train, const std::vector<Record>& val,
            const HyperCell& cell) {
            ++fold_fits;
            CHECK(!train.empty());
            CHECK(!val.empty());
            CHECK(train.size() + val.size() == records.size());
            // Favor lr 5e-4 with batch 64.
            return (cell.lr == 5e-4 ? 0.5 : 0.0) + (cell.batch_size == 64 ? 0.25 : 0.0);
        },
        [&](const std::vector<Record>& full, const HyperCell& cell) {
            ++refits;
            refit_cell = cell;
            CHECK(full.size() == records.size());
        });
    CHECK(fold_fits == 45);
    CHECK(refits == 1);
    CHECK(best.lr == 5e-4);
    CHECK(best.batch_size == 64);
    CHECK(refit_cell.lr == best.lr);
}

TEST_CASE("tune_hyperparameters: single-cell grid still refits") {
    const auto records = fake_records(10, 1);
    int fold_fits = 0, refits = 0;
    tune_hyperparameters(
        records, {HyperCell{1e-3, 32}}, 5, 2,
        [&](const auto&, const auto&, const HyperCell&) {
            ++fold_fits;
            return 0.5;
        },
        [&](const auto&, const HyperCell&) { ++refits; });
    CHECK(fold_fits == 5);
    CHECK(refits == 1);
}

TEST_CASE("ablation_grid: exactly 8 distinct cells") {
    const auto cells = ablation_grid();
    CHECK(cells.size() == 8);
    std::set<std::string> ids;
    int ca = 0, norm = 0, ma = 0;
    for (const auto& cell : cells) {
        CHECK(ids.insert(cell.id).second);
        ca += cell.mask == MaskStrategy::content_aware;
        norm += cell.norm_targets;
        ma += cell.loss == LossKind::ma_error;
    }
    CHECK(ca == 4);
    CHECK(norm == 4);
    CHECK(ma == 4);
}

TEST_CASE("run_ablation: tiny end-to-end run is reproducible and complete") {
    // Tiny corpus on disk.
    SynthConfig synth;
    synth.n_participants = 8;
    synth.recordings_per_participant = 2;
    synth.n_mels = 32;
    synth.n_frames = 32;
    synth.seed = 19;
    const fs::path dir = fs::temp_directory_path() / "maelab_harness_test";
    fs::remove_all(dir);
    const auto records = generate_corpus(synth, dir);

    AblationConfig cfg;
    cfg.mae.patch_size = 16;
    cfg.mae.encoder_dim = 8;
    cfg.mae.encoder_depth = 1;
    cfg.mae.encoder_heads = 2;
    cfg.mae.decoder_dim = 8;
    cfg.mae.decoder_depth = 1;
    cfg.mae.decoder_heads = 2;
    cfg.pretrain.epochs = 2;
    cfg.pretrain.batch_size = 4;
    cfg.finetune.max_epochs = 2;
    cfg.finetune.batch_size = 4;
    cfg.seeds = {1, 2};
    cfg.master_seed = 23;
    cfg.target_frames = 32;

    const AblationReport report = run_ablation(cfg, records, dir);

    // 8 cells + 2 baselines, none failed.
    CHECK(report.cells.size() == 10);
    for (const CellResult& cell : report.cells) {
        CAPTURE(cell.id);
        CHECK(cell.error.empty());
        CHECK(cell.seed_reports.size() == 2);
        CHECK(cell.split_hash == report.split_hash);
    }

    std::istringstream csv(report.csv);
    std::string line;
    std::getline(csv, line);
    CHECK(line == kCsvHeader);
    int rows = 0;
    while (std::getline(csv, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 10);

    // Same master seed reproduces the CSV byte-for-byte.
    const AblationReport again = run_ablation(cfg, records, dir);
    CHECK(report.csv == again.csv);
    CHECK(report.split_hash == again.split_hash);

    // Metadata carries the split hash in every row.
    const auto meta = nlohmann::json::parse(report.metadata_json);
    CHECK(meta.at("split_hash") == report.split_hash);
    REQUIRE(meta.at("rows").size() == 10);
    for (const auto& row : meta.at("rows")) {
        CHECK(row.at("split_hash") == report.split_hash);
    }
    CHECK(meta.at("failed_cells").empty());

    // Cell filter narrows the grid; baselines still run.
    AblationConfig filtered = cfg;
    filtered.cell_filter = {"ma_error+norm+ca"};
    const AblationReport partial = run_ablation(filtered, records, dir);
    CHECK(partial.cells.size() == 3);

    // Pre-train-only mode: histories but no CSV rows.
    AblationConfig pretrain_only = cfg;
    pretrain_only.skip_finetune = true;
    const AblationReport histories = run_ablation(pretrain_only, records, dir);
    CHECK(histories.cells.size() == 8);
    for (const CellResult& cell : histories.cells) {
        CHECK(cell.pretrain_loss.size() == 2);
        CHECK(cell.seed_reports.empty());
    }
}

TEST_CASE("ablation config hash is order-stable") {
    AblationConfig cfg;
    const std::string a = ablation_config_json(cfg);
    const std::string b = ablation_config_json(cfg);
    CHECK(a == b);
    cfg.master_seed += 1;
    CHECK(ablation_config_json(cfg) != a);
}
