#include "transmusic/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "transmusic/errors.hpp"
#include "transmusic/losses.hpp"
#include "transmusic/nn/checkpoint.hpp"
#include "transmusic/rng.hpp"
#include "transmusic/threading.hpp"

namespace transmusic {

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("train config: batch size must be positive");
    if (epochs == 0) throw ConfigError("train config: need at least one epoch");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train config: learning rate must be positive");
    if (!(ce_weight >= 0.0) || !std::isfinite(ce_weight))
        throw ConfigError("train config: classifier weight must be non-negative");
    if (!(validation_fraction > 0.0) || !(validation_fraction < 1.0))
        throw ConfigError("train config: validation fraction must lie in (0, 1)");
    if (metric_sample_cap == 0) throw ConfigError("train config: metric sample cap must be positive");
}

std::string TrainConfig::to_json() const {
    nlohmann::json j;
    j["batch_size"] = batch_size;
    j["epochs"] = epochs;
    j["learning_rate"] = learning_rate;
    j["ce_weight"] = ce_weight;
    j["seed"] = seed;
    j["validation_fraction"] = validation_fraction;
    j["quantization"] = quantization == Quantization::OneBit ? "one-bit" : "unquantized";
    j["max_records"] = max_records;
    j["metric_sample_cap"] = metric_sample_cap;
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    TrainConfig c;
    try {
        if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
        if (j.contains("learning_rate")) c.learning_rate = j["learning_rate"].get<double>();
        if (j.contains("ce_weight")) c.ce_weight = j["ce_weight"].get<double>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("validation_fraction"))
            c.validation_fraction = j["validation_fraction"].get<double>();
        if (j.contains("max_records")) c.max_records = j["max_records"].get<std::size_t>();
        if (j.contains("metric_sample_cap"))
            c.metric_sample_cap = j["metric_sample_cap"].get<std::size_t>();
        if (j.contains("quantization")) {
            const std::string q = j["quantization"].get<std::string>();
            if (q == "one-bit")
                c.quantization = Quantization::OneBit;
            else if (q == "unquantized")
                c.quantization = Quantization::Unquantized;
            else
                throw ConfigError("train config: unknown quantization mode: " + q);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

void write_loss_reports(const std::string& path, const std::vector<LossReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("loss report: cannot open for writing: " + path);
    out << "epoch,train_rmspe,train_ce,val_rmspe,val_sn_acc\n";
    char line[256];
    for (const LossReport& r : reports) {
        if (!std::isfinite(r.train_rmspe) || !std::isfinite(r.train_ce) ||
            !std::isfinite(r.val_rmspe) || !std::isfinite(r.val_sn_accuracy))
            throw NumericError("loss report: non-finite loss value");
        std::snprintf(line, sizeof(line), "%zu,%.10g,%.10g,%.10g,%.10g\n", r.epoch, r.train_rmspe,
                      r.train_ce, r.val_rmspe, r.val_sn_accuracy);
        out << line;
    }
    out.flush();
    if (!out) throw IoError("loss report: write failed: " + path);
}

namespace {

SnapshotMatrix prepare(const DatasetRecord& rec, Quantization quant) {
    if (quant == Quantization::OneBit) return quantize_one_bit(rec.snapshots);
    return rec.snapshots;
}

} // namespace

EvalMetrics evaluate_model(const TransMusicModel& model, const DatasetReader& data,
                           const std::vector<std::uint64_t>& indexes, Quantization quant) {
    if (indexes.empty()) throw ConfigError("evaluate: empty index set");
    std::vector<double> errors(indexes.size());
    std::vector<char> correct(indexes.size());
    parallel_for_indexed(indexes.size(), [&](std::size_t slot) {
        const DatasetRecord rec = data.read(indexes[slot]);
        const ModelOutput out = model.infer(prepare(rec, quant));
        const std::size_t k = rec.scenario.thetas.size();
        const std::vector<double> head(out.doas.begin(),
                                       out.doas.begin() + static_cast<std::ptrdiff_t>(k));
        errors[slot] = rmspe(rec.scenario.thetas, head);
        correct[slot] = out.estimated_sources() == k ? 1 : 0;
    });

    EvalMetrics m;
    m.count = indexes.size();
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < indexes.size(); ++i) {
        sum += errors[i];
        hits += correct[i];
    }
    m.mean_rmspe = sum / static_cast<double>(m.count);
    m.sn_accuracy = static_cast<double>(hits) / static_cast<double>(m.count);
    std::sort(errors.begin(), errors.end());
    m.median_rmspe = m.count % 2 == 1
                         ? errors[m.count / 2]
                         : 0.5 * (errors[m.count / 2 - 1] + errors[m.count / 2]);
    return m;
}

TrainedModel load_trained_model(const std::string& checkpoint_path) {
    std::ifstream side(checkpoint_path + ".json");
    if (!side) throw IoError("cannot open checkpoint sidecar: " + checkpoint_path + ".json");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(side);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint sidecar: ") + e.what());
    }
    if (!j.contains("model") || !j.contains("train"))
        throw ConfigError("checkpoint sidecar: missing model or train section");
    const ModelConfig mc = ModelConfig::from_json(j["model"].dump());
    const TrainConfig tc = TrainConfig::from_json(j["train"].dump());
    nn::LoadedCheckpoint ckpt = nn::load_checkpoint(checkpoint_path);
    return TrainedModel{TransMusicModel(mc, std::move(ckpt.store)), tc};
}

Trainer::Trainer(ModelConfig model_config, TrainConfig train_config, const std::string& dataset_path)
    : train_config_(train_config),
      model_(model_config, split_seed(train_config.seed, 0)),
      data_(dataset_path),
      best_val_rmspe_(std::numeric_limits<double>::infinity()) {
    train_config_.validate();

    std::uint64_t n = data_.size();
    if (train_config_.max_records > 0) n = std::min<std::uint64_t>(n, train_config_.max_records);
    if (n < 2) throw ConfigError("trainer: need at least two records");

    const DatasetRecord probe = data_.read(0);
    if (probe.snapshots.samples.rows() != model_config.num_antennas)
        throw ConfigError("trainer: dataset antenna count does not match the model");

    auto val_count = static_cast<std::uint64_t>(
        std::llround(static_cast<double>(n) * train_config_.validation_fraction));
    val_count = std::clamp<std::uint64_t>(val_count, 1, n - 1);
    const std::uint64_t train_count = n - val_count;
    train_indexes_.resize(train_count);
    for (std::uint64_t i = 0; i < train_count; ++i) train_indexes_[i] = i;
    val_indexes_.resize(val_count);
    for (std::uint64_t i = 0; i < val_count; ++i) val_indexes_[i] = train_count + i;
}

std::vector<LossReport> Trainer::run(const std::string& out_checkpoint,
                                     const EpochCallback& on_epoch) {
    nn::ParamStore& store = model_.params();
    const Quantization quant = train_config_.quantization;

    // Flat gradient layout in entry map order; map nodes keep their address.
    std::vector<std::pair<nn::ParamStore::Entry*, std::size_t>> layout;
    std::map<const nn::ParamStore::Entry*, std::size_t> offset_of;
    std::size_t total_values = 0;
    for (auto& [name, e] : store.entries()) {
        layout.push_back({&e, total_values});
        offset_of[&e] = total_values;
        total_values += e.value.size();
    }

    const std::string sidecar = out_checkpoint.empty() ? "" : out_checkpoint + ".json";
    const std::string last_path = out_checkpoint.empty() ? "" : out_checkpoint + ".last";
    const std::string losses_path = out_checkpoint.empty() ? "" : out_checkpoint + ".losses.csv";
    if (!sidecar.empty()) {
        std::ofstream side(sidecar, std::ios::trunc);
        if (!side) throw IoError("trainer: cannot write sidecar: " + sidecar);
        side << "{\n\"model\": " << model_.config().to_json() << ",\n\"train\": "
             << train_config_.to_json() << "\n}\n";
    }

    std::vector<LossReport> reports;
    auto train_metrics_untrained = [&]() {
        const std::size_t cap = std::min<std::size_t>(train_indexes_.size(),
                                                      train_config_.metric_sample_cap);
        std::vector<double> rm(cap), ce(cap);
        parallel_for_indexed(cap, [&](std::size_t slot) {
            const DatasetRecord rec = data_.read(train_indexes_[slot]);
            const ModelOutput out = model_.infer(prepare(rec, quant));
            const std::size_t k = rec.scenario.thetas.size();
            const std::vector<double> head(out.doas.begin(),
                                           out.doas.begin() + static_cast<std::ptrdiff_t>(k));
            rm[slot] = rmspe(rec.scenario.thetas, head);
            ce[slot] = cross_entropy(k, out.sn_probs);
        });
        double rs = 0.0, cs = 0.0;
        for (std::size_t i = 0; i < cap; ++i) {
            rs += rm[i];
            cs += ce[i];
        }
        return std::pair<double, double>(rs / static_cast<double>(cap),
                                         cs / static_cast<double>(cap));
    };

    {
        LossReport r0;
        r0.epoch = 0;
        const auto [tr, tc] = train_metrics_untrained();
        r0.train_rmspe = tr;
        r0.train_ce = tc;
        const EvalMetrics val = evaluate_model(model_, data_, val_indexes_, quant);
        r0.val_rmspe = val.mean_rmspe;
        r0.val_sn_accuracy = val.sn_accuracy;
        reports.push_back(r0);
        best_val_rmspe_ = r0.val_rmspe;
        if (!out_checkpoint.empty()) {
            nn::save_checkpoint(out_checkpoint, store, false);
            nn::save_checkpoint(last_path, store, true);
            write_loss_reports(losses_path, reports);
        }
        if (on_epoch && !on_epoch(r0)) return reports;
    }

    struct ItemOut {
        std::vector<double> grads;
        double rmspe_value = 0.0;
        double ce_value = 0.0;
    };

    std::vector<std::uint64_t> order = train_indexes_;
    for (std::size_t epoch = 1; epoch <= train_config_.epochs; ++epoch) {
        SplitMix64 shuffle_rng(split_seed(train_config_.seed, epoch));
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::uint64_t j = shuffle_rng.below(i);
            std::swap(order[i - 1], order[j]);
        }

        double epoch_rmspe = 0.0, epoch_ce = 0.0;
        const std::size_t batches = (order.size() + train_config_.batch_size - 1) /
                                    train_config_.batch_size;
        for (std::size_t batch = 0; batch < batches; ++batch) {
            const std::size_t begin = batch * train_config_.batch_size;
            const std::size_t count = std::min(train_config_.batch_size, order.size() - begin);
            std::vector<ItemOut> items(count);
            parallel_for_indexed(count, [&](std::size_t slot) {
                const DatasetRecord rec = data_.read(order[begin + slot]);
                const SnapshotMatrix snaps = prepare(rec, quant);
                nn::Tape tape;
                const TransMusicModel::Forward fwd = model_.forward(tape, snaps);
                nn::Tensor rl = rmspe_loss(tape, rec.scenario.thetas, fwd.doas);
                nn::Tensor cl = cross_entropy_loss(tape, rec.scenario.thetas.size(), fwd.sn_probs);
                nn::Tensor loss = tape.add(rl, tape.scale(cl, train_config_.ce_weight));
                tape.backward(loss);

                ItemOut& out = items[slot];
                out.rmspe_value = rl.scalar();
                out.ce_value = cl.scalar();
                out.grads.assign(total_values, 0.0);
                for (const auto& [entry, tensor] : fwd.bound) {
                    const std::vector<double>& g = tape.grad(tensor);
                    if (g.empty()) continue;
                    std::copy(g.begin(), g.end(), out.grads.begin() +
                              static_cast<std::ptrdiff_t>(offset_of.at(entry)));
                }
            });

            const double inv_batch = 1.0 / static_cast<double>(count);
            for (const ItemOut& item : items) {
                for (const auto& [entry, offset] : layout)
                    store.accumulate(*entry, item.grads.data() + offset, entry->value.size(),
                                     inv_batch);
                epoch_rmspe += item.rmspe_value;
                epoch_ce += item.ce_value;
            }
            store.adam_step(train_config_.learning_rate);
        }

        LossReport r;
        r.epoch = epoch;
        r.train_rmspe = epoch_rmspe / static_cast<double>(order.size());
        r.train_ce = epoch_ce / static_cast<double>(order.size());
        const EvalMetrics val = evaluate_model(model_, data_, val_indexes_, quant);
        r.val_rmspe = val.mean_rmspe;
        r.val_sn_accuracy = val.sn_accuracy;
        if (!std::isfinite(r.train_rmspe) || !std::isfinite(r.train_ce) || !std::isfinite(r.val_rmspe))
            throw NumericError("trainer: non-finite epoch loss");
        reports.push_back(r);

        if (!out_checkpoint.empty()) {
            nn::save_checkpoint(last_path, store, true);
            if (r.val_rmspe < best_val_rmspe_) nn::save_checkpoint(out_checkpoint, store, false);
            write_loss_reports(losses_path, reports);
        }
        if (r.val_rmspe < best_val_rmspe_) best_val_rmspe_ = r.val_rmspe;
        if (on_epoch && !on_epoch(r)) break;
    }
    return reports;
}

} // namespace transmusic
