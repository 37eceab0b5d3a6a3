// Command-line front end. Every failure path funnels through Error so the
// process exit code always reflects the error category.
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "transmusic/classical.hpp"
#include "transmusic/dataset.hpp"
#include "transmusic/errors.hpp"
#include "transmusic/hermitian_eig.hpp"
#include "transmusic/losses.hpp"
#include "transmusic/sweep.hpp"
#include "transmusic/threading.hpp"
#include "transmusic/trainer.hpp"

namespace {

using namespace transmusic;

std::string read_text_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoError("cannot open " + path);
    std::string text;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    const bool bad = std::ferror(f) != 0;
    std::fclose(f);
    if (bad) throw IoError("read failed: " + path);
    return text;
}

Quantization parse_quantization(const std::string& name) {
    if (name == "one-bit") return Quantization::OneBit;
    if (name == "unquantized") return Quantization::Unquantized;
    throw ConfigError("unknown quantization mode: " + name);
}

void run_gen_data(const std::string& config_path, const std::string& out_path) {
    const DatasetGenConfig config = DatasetGenConfig::from_json_file(config_path);
    write_dataset(config, out_path);
    std::cout << "wrote " << config.count << " records to " << out_path << "\n";
}

// Config file holds optional "model" and "train" objects; absent fields keep
// their defaults, matching the sidecar written next to every checkpoint.
void run_train(const std::string& config_path, const std::string& data_path,
               const std::string& out_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(config_path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    ModelConfig mc;
    TrainConfig tc;
    if (j.contains("model")) mc = ModelConfig::from_json(j["model"].dump());
    if (j.contains("train")) tc = TrainConfig::from_json(j["train"].dump());

    Trainer trainer(mc, tc, data_path);
    const auto reports = trainer.run(out_path, [](const LossReport& r) {
        std::printf("epoch %zu  train_rmspe %.6f  train_ce %.6f  val_rmspe %.6f  val_sn_acc %.4f\n",
                    r.epoch, r.train_rmspe, r.train_ce, r.val_rmspe, r.val_sn_accuracy);
        std::fflush(stdout);
        return true;
    });
    std::cout << "finished " << (reports.size() - 1) << " epochs, best val_rmspe "
              << trainer.best_validation_rmspe() << ", checkpoint " << out_path << "\n";
}

void run_eval(const std::string& ckpt_path, const std::string& data_path,
              const std::string& quant_override) {
    const TrainedModel tm = load_trained_model(ckpt_path);
    const Quantization quant = quant_override.empty() ? tm.train.quantization
                                                      : parse_quantization(quant_override);
    const DatasetReader data(data_path);
    if (data.size() == 0) throw ConfigError("eval: dataset is empty");
    std::vector<std::uint64_t> indexes(data.size());
    for (std::uint64_t i = 0; i < data.size(); ++i) indexes[i] = i;
    const EvalMetrics m = evaluate_model(tm.model, data, indexes, quant);
    std::printf("records %zu  rmspe_mean %.6f  rmspe_median %.6f  sn_accuracy %.4f\n", m.count,
                m.mean_rmspe, m.median_rmspe, m.sn_accuracy);
}

void run_sweep_cmd(const std::string& config_path, const std::string& out_dir) {
    const SweepConfig config = SweepConfig::from_json_file(config_path);
    const auto results = run_sweep(config);
    const auto summaries = aggregate(results);
    emit(results, summaries, out_dir, config.debug_scenario_hash);
    std::cout << "wrote " << results.size() << " rows over " << summaries.size()
              << " cells to " << out_dir << "\n";
}

void run_baseline(const std::string& method, const std::string& data_path) {
    if (is_learned_method(method))
        throw ConfigError("baseline: " + method + " needs a checkpoint, use the sweep command");
    const auto& known = known_methods();
    if (std::find(known.begin(), known.end(), method) == known.end())
        throw ConfigError("baseline: unknown method: " + method);

    const DatasetReader data(data_path);
    if (data.size() == 0) throw ConfigError("baseline: dataset is empty");

    struct Row {
        double rmspe = 0.0;
        bool correct = false;
    };
    std::vector<Row> rows(data.size());
    parallel_for_indexed(data.size(), [&](std::size_t i) {
        const DatasetRecord rec = data.read(i);
        const ArrayGeometry geometry = ArrayGeometry::ula(rec.snapshots.num_antennas());
        const std::size_t k = rec.scenario.num_sources();
        std::vector<double> angles;
        std::size_t k_hat = 0;
        if (method == "beamformer") {
            const BeamformerResult bf =
                beamformer_estimate(rec.snapshots, geometry, kClassicalGridSize);
            k_hat = bf.estimated_sources;
            angles = find_peaks(bf.spectrum, k);
        } else {
            const ComplexMatrix r =
                method == "music"
                    ? sample_covariance(rec.snapshots.samples)
                    : arcsine_covariance(
                          sample_covariance(quantize_one_bit(rec.snapshots).samples));
            const EigenDecomposition eig = hermitian_evd(r);
            k_hat = estimate_source_count_eigen(eig.eigenvalues);
            angles = find_peaks(music_spectrum(noise_subspace(eig, k), geometry,
                                               kClassicalGridSize),
                                k);
        }
        rows[i].rmspe = rmspe(rec.scenario.thetas, angles);
        rows[i].correct = k_hat == k;
    });

    double sum = 0.0;
    std::size_t correct = 0;
    std::vector<double> sorted(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sum += rows[i].rmspe;
        sorted[i] = rows[i].rmspe;
        if (rows[i].correct) ++correct;
    }
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    std::printf("method %s  records %zu  rmspe_mean %.6f  rmspe_median %.6f  sn_accuracy %.4f\n",
                method.c_str(), rows.size(), sum / static_cast<double>(rows.size()), median,
                static_cast<double>(correct) / static_cast<double>(rows.size()));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"DOA estimation toolkit: simulation, training, and benchmark sweeps"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, ckpt_path, method, quant_override;

    auto* gen = app.add_subcommand("gen-data", "Generate a snapshot dataset file");
    gen->add_option("--config", config_path, "Generation config (JSON)")->required();
    gen->add_option("--out", out_path, "Output dataset path")->required();

    auto* train = app.add_subcommand("train", "Train the estimator on a dataset");
    train->add_option("--config", config_path, "Model/train config (JSON)")->required();
    train->add_option("--data", data_path, "Training dataset path")->required();
    train->add_option("--out", out_path, "Checkpoint output path")->required();

    auto* eval = app.add_subcommand("eval", "Score a checkpoint against a dataset");
    eval->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
    eval->add_option("--data", data_path, "Evaluation dataset path")->required();
    eval->add_option("--quant", quant_override, "Override input arm: one-bit or unquantized");

    auto* sweep = app.add_subcommand("sweep", "Run a benchmark sweep and emit CSVs and plots");
    sweep->add_option("--config", config_path, "Sweep config (JSON)")->required();
    sweep->add_option("--out", out_path, "Output directory")->required();

    auto* baseline = app.add_subcommand("baseline", "Score one classical method on a dataset");
    baseline->add_option("--method", method, "music, one_bit_music, or beamformer")->required();
    baseline->add_option("--data", data_path, "Evaluation dataset path")->required();

    try {
        app.parse(argc, argv);
        if (gen->parsed()) run_gen_data(config_path, out_path);
        if (train->parsed()) run_train(config_path, data_path, out_path);
        if (eval->parsed()) run_eval(ckpt_path, data_path, quant_override);
        if (sweep->parsed()) run_sweep_cmd(config_path, out_path);
        if (baseline->parsed()) run_baseline(method, data_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const transmusic::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
