#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "transmusic/dataset.hpp"
#include "transmusic/errors.hpp"
#include "transmusic/losses.hpp"
#include "transmusic/model.hpp"
#include "transmusic/nn/checkpoint.hpp"
#include "transmusic/trainer.hpp"

using namespace transmusic;

namespace {

ModelConfig tiny_model() {
    ModelConfig c;
    c.num_antennas = 4;
    c.encoder_blocks = 1;
    c.attention_heads = 2;
    c.ffn_hidden = 8;
    c.subspace_hidden = {16};
    c.spectrum_grid = 41;
    c.peak_hidden = {16};
    c.source_count_hidden = {8};
    return c;
}

// Eight easy single-source records at high SNR.
std::string tiny_dataset(const test_support::TempDir& dir, std::uint64_t seed) {
    DatasetGenConfig g;
    g.count = 8;
    g.num_antennas = 4;
    g.num_snapshots = 8;
    g.snr_db_set = {20.0};
    g.k_min = 1;
    g.k_max = 1;
    g.base_seed = seed;
    const std::string path = dir.file("tiny.ds");
    write_dataset(g, path);
    return path;
}

} // namespace

TEST_CASE("train config validation") {
    TrainConfig c;
    c.validate();

    TrainConfig bad = c;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.epochs = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.learning_rate = -1e-3;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.ce_weight = -0.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.validation_fraction = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.validation_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.metric_sample_cap = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("train config json round trip") {
    TrainConfig c;
    c.batch_size = 16;
    c.epochs = 3;
    c.learning_rate = 5e-4;
    c.ce_weight = 0.25;
    c.seed = 99;
    c.validation_fraction = 0.2;
    c.quantization = Quantization::Unquantized;
    c.max_records = 123;
    c.metric_sample_cap = 7;

    const TrainConfig back = TrainConfig::from_json(c.to_json());
    CHECK(back.batch_size == c.batch_size);
    CHECK(back.epochs == c.epochs);
    CHECK(back.learning_rate == c.learning_rate);
    CHECK(back.ce_weight == c.ce_weight);
    CHECK(back.seed == c.seed);
    CHECK(back.validation_fraction == c.validation_fraction);
    CHECK(back.quantization == Quantization::Unquantized);
    CHECK(back.max_records == c.max_records);
    CHECK(back.metric_sample_cap == c.metric_sample_cap);

    const TrainConfig defaulted = TrainConfig::from_json("{}");
    CHECK(defaulted.quantization == Quantization::OneBit);
    CHECK(defaulted.batch_size == 64);
    CHECK(defaulted.learning_rate == 1e-3);

    CHECK_THROWS_AS(TrainConfig::from_json("{\"quantization\": \"two-bit\"}"), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json("{\"epochs\": 0}"), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json("not json"), ConfigError);
}

TEST_CASE("loss report csv format") {
    test_support::TempDir dir("tmk_losses");
    const std::string path = dir.file("losses.csv");

    std::vector<LossReport> reports(2);
    reports[0].epoch = 0;
    reports[0].train_rmspe = 0.5;
    reports[0].train_ce = 1.25;
    reports[0].val_rmspe = 0.75;
    reports[0].val_sn_accuracy = 0.125;
    reports[1].epoch = 1;
    reports[1].train_rmspe = 0.25;
    reports[1].train_ce = 1.0;
    reports[1].val_rmspe = 0.5;
    reports[1].val_sn_accuracy = 0.5;
    write_loss_reports(path, reports);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,train_rmspe,train_ce,val_rmspe,val_sn_acc");
    std::getline(in, line);
    CHECK(line == "0,0.5,1.25,0.75,0.125");
    std::getline(in, line);
    CHECK(line == "1,0.25,1,0.5,0.5");
    CHECK_FALSE(std::getline(in, line));

    std::vector<LossReport> poisoned = reports;
    poisoned[1].val_rmspe = std::nan("");
    CHECK_THROWS_AS(write_loss_reports(dir.file("bad.csv"), poisoned), NumericError);
    CHECK_THROWS_AS(write_loss_reports(dir.path(), reports), IoError);
}

TEST_CASE("evaluate model aggregates per-record scores") {
    test_support::TempDir dir("tmk_eval");
    const std::string path = tiny_dataset(dir, 301);
    DatasetReader data(path);
    TransMusicModel model(tiny_model(), 3);

    const std::vector<std::uint64_t> indexes = {0, 1, 2, 3, 4, 5};
    const EvalMetrics m = evaluate_model(model, data, indexes, Quantization::Unquantized);
    CHECK(m.count == 6);
    CHECK(m.mean_rmspe >= 0.0);
    CHECK(m.sn_accuracy >= 0.0);
    CHECK(m.sn_accuracy <= 1.0);

    // Reference aggregation over the same records.
    std::vector<double> errors;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::uint64_t i : indexes) {
        const DatasetRecord rec = data.read(i);
        const ModelOutput out = model.infer(rec.snapshots);
        const std::size_t k = rec.scenario.thetas.size();
        const std::vector<double> head(out.doas.begin(),
                                       out.doas.begin() + static_cast<std::ptrdiff_t>(k));
        errors.push_back(rmspe(rec.scenario.thetas, head));
        sum += errors.back();
        hits += out.estimated_sources() == k ? 1 : 0;
    }
    CHECK(m.mean_rmspe == sum / 6.0);
    CHECK(m.sn_accuracy == static_cast<double>(hits) / 6.0);
    std::sort(errors.begin(), errors.end());
    CHECK(m.median_rmspe == 0.5 * (errors[2] + errors[3]));

    const EvalMetrics again = evaluate_model(model, data, indexes, Quantization::Unquantized);
    CHECK(again.mean_rmspe == m.mean_rmspe);
    CHECK(again.median_rmspe == m.median_rmspe);
    CHECK(again.sn_accuracy == m.sn_accuracy);

    CHECK_THROWS_AS(evaluate_model(model, data, {}, Quantization::Unquantized), ConfigError);
}

TEST_CASE("quantized evaluation differs from unquantized") {
    test_support::TempDir dir("tmk_eval_q");
    const std::string path = tiny_dataset(dir, 302);
    DatasetReader data(path);
    TransMusicModel model(tiny_model(), 4);
    const std::vector<std::uint64_t> indexes = {0, 1, 2, 3};
    const EvalMetrics plain = evaluate_model(model, data, indexes, Quantization::Unquantized);
    const EvalMetrics one_bit = evaluate_model(model, data, indexes, Quantization::OneBit);
    CHECK(plain.mean_rmspe != one_bit.mean_rmspe);
}

TEST_CASE("trainer constructor validation") {
    test_support::TempDir dir("tmk_trainer_cfg");
    const std::string path = tiny_dataset(dir, 303);

    TrainConfig bad;
    bad.batch_size = 0;
    CHECK_THROWS_AS(Trainer(tiny_model(), bad, path), ConfigError);

    ModelConfig wrong = tiny_model();
    wrong.num_antennas = 6;
    TrainConfig ok;
    CHECK_THROWS_AS(Trainer(wrong, ok, path), ConfigError);

    TrainConfig starved;
    starved.max_records = 1;
    CHECK_THROWS_AS(Trainer(tiny_model(), starved, path), ConfigError);

    CHECK_THROWS_AS(Trainer(tiny_model(), ok, dir.file("absent.ds")), IoError);
}

TEST_CASE("training overfits a small single-source set") {
    test_support::TempDir dir("tmk_overfit");
    const std::string path = tiny_dataset(dir, 304);

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 400;
    tc.learning_rate = 3e-3;
    tc.seed = 1;
    tc.validation_fraction = 0.125;
    tc.quantization = Quantization::Unquantized;

    Trainer trainer(tiny_model(), tc, path);
    const std::vector<LossReport> reports = trainer.run("");
    REQUIRE(reports.size() == tc.epochs + 1);
    CHECK(reports.front().epoch == 0);
    CHECK(reports.back().epoch == tc.epochs);

    const double start = reports.front().train_rmspe;
    double best = start;
    for (const LossReport& r : reports) best = std::min(best, r.train_rmspe);
    CHECK(start > 0.0);
    CHECK(best < start / 5.0);
}

TEST_CASE("zero classifier weight freezes the source-count head") {
    test_support::TempDir dir("tmk_freeze");
    const std::string path = tiny_dataset(dir, 305);

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 3;
    tc.seed = 2;
    tc.validation_fraction = 0.125;
    tc.ce_weight = 0.0;

    Trainer trainer(tiny_model(), tc, path);
    std::map<std::string, std::vector<double>> before;
    for (const auto& [name, entry] : trainer.model().params().entries())
        before[name] = entry.value;

    trainer.run("");

    bool encoder_moved = false;
    for (const auto& [name, entry] : trainer.model().params().entries()) {
        if (name.rfind("sn.", 0) == 0) {
            CHECK(entry.value == before[name]);
        } else if (entry.value != before[name]) {
            encoder_moved = true;
        }
    }
    CHECK(encoder_moved);
}

TEST_CASE("training is deterministic across runs") {
    test_support::TempDir dir("tmk_determinism");
    const std::string path = tiny_dataset(dir, 306);

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 4;
    tc.seed = 3;
    tc.validation_fraction = 0.125;

    auto run_once = [&](const std::string& out) {
        Trainer trainer(tiny_model(), tc, path);
        return trainer.run(out);
    };
    const std::string out_a = dir.file("a.ck");
    const std::string out_b = dir.file("b.ck");
    const std::vector<LossReport> a = run_once(out_a);
    const std::vector<LossReport> b = run_once(out_b);

    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].epoch == b[i].epoch);
        CHECK(a[i].train_rmspe == b[i].train_rmspe);
        CHECK(a[i].train_ce == b[i].train_ce);
        CHECK(a[i].val_rmspe == b[i].val_rmspe);
        CHECK(a[i].val_sn_accuracy == b[i].val_sn_accuracy);
    }
    CHECK(test_support::hash_file(out_a) == test_support::hash_file(out_b));
    CHECK(test_support::hash_file(out_a + ".last") == test_support::hash_file(out_b + ".last"));
    CHECK(test_support::hash_file(out_a + ".losses.csv") ==
          test_support::hash_file(out_b + ".losses.csv"));
}

TEST_CASE("checkpoint artifacts and reload") {
    test_support::TempDir dir("tmk_artifacts");
    const std::string path = tiny_dataset(dir, 307);

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 2;
    tc.seed = 4;
    tc.validation_fraction = 0.125;
    tc.quantization = Quantization::Unquantized;

    const std::string out = dir.file("model.ck");
    Trainer trainer(tiny_model(), tc, path);
    const std::vector<LossReport> reports = trainer.run(out);

    CHECK(std::filesystem::exists(out));
    CHECK(std::filesystem::exists(out + ".json"));
    CHECK(std::filesystem::exists(out + ".last"));
    CHECK(std::filesystem::exists(out + ".losses.csv"));

    // Best weights ship without optimizer state, the newest with it.
    CHECK_FALSE(nn::load_checkpoint(out).has_optimizer);
    CHECK(nn::load_checkpoint(out + ".last").has_optimizer);

    const TrainedModel loaded = load_trained_model(out);
    CHECK(loaded.model.config().num_antennas == 4);
    CHECK(loaded.model.config().spectrum_grid == 41);
    CHECK(loaded.train.quantization == Quantization::Unquantized);
    CHECK(loaded.train.epochs == tc.epochs);

    // The loss table on disk is exactly the report list.
    const std::string rewritten = dir.file("rewritten.csv");
    write_loss_reports(rewritten, reports);
    CHECK(test_support::read_file_bytes(out + ".losses.csv") ==
          test_support::read_file_bytes(rewritten));

    // The best-validation weights equal the running best by construction.
    double best = reports.front().val_rmspe;
    for (const LossReport& r : reports) best = std::min(best, r.val_rmspe);
    CHECK(trainer.best_validation_rmspe() == best);
}

TEST_CASE("epoch callback can stop training early") {
    test_support::TempDir dir("tmk_early");
    const std::string path = tiny_dataset(dir, 308);

    TrainConfig tc;
    tc.batch_size = 4;
    tc.epochs = 50;
    tc.seed = 5;
    tc.validation_fraction = 0.125;

    Trainer trainer(tiny_model(), tc, path);
    std::size_t calls = 0;
    const std::vector<LossReport> reports = trainer.run("", [&](const LossReport& r) {
        ++calls;
        return r.epoch < 2;
    });
    CHECK(calls == 3);       // epochs 0, 1, 2
    CHECK(reports.size() == 3);
    CHECK(reports.back().epoch == 2);
}

TEST_CASE("trained model loader rejects broken sidecars") {
    test_support::TempDir dir("tmk_sidecar");
    CHECK_THROWS_AS(load_trained_model(dir.file("absent.ck")), IoError);

    const std::string ck = dir.file("model.ck");
    std::ofstream(ck + ".json") << "not json";
    CHECK_THROWS_AS(load_trained_model(ck), ConfigError);

    std::ofstream(ck + ".json", std::ios::trunc) << "{\"model\": {}}";
    CHECK_THROWS_AS(load_trained_model(ck), ConfigError);

    // Valid sidecar but the checkpoint itself is absent.
    std::ofstream(ck + ".json", std::ios::trunc)
        << "{\"model\": " << tiny_model().to_json() << ", \"train\": " << TrainConfig().to_json()
        << "}";
    CHECK_THROWS_AS(load_trained_model(ck), IoError);
}
