#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "transmusic/dataset.hpp"
#include "transmusic/model.hpp"

namespace transmusic {

struct TrainConfig {
    std::size_t batch_size = 64;
    std::size_t epochs = 50;
    double learning_rate = 1e-3;
    double ce_weight = 1.0;
    std::uint64_t seed = 0;
    double validation_fraction = 0.1;
    Quantization quantization = Quantization::OneBit;
    std::size_t max_records = 0;       // 0 uses the whole dataset
    std::size_t metric_sample_cap = 2048; // records scored for the pre-training row

    void validate() const;
    std::string to_json() const;
    static TrainConfig from_json(const std::string& text);
};

struct LossReport {
    std::size_t epoch = 0; // 0 is the pre-training evaluation
    double train_rmspe = 0.0;
    double train_ce = 0.0;
    double val_rmspe = 0.0;
    double val_sn_accuracy = 0.0;
};

// CSV with header epoch,train_rmspe,train_ce,val_rmspe,val_sn_acc.
void write_loss_reports(const std::string& path, const std::vector<LossReport>& reports);

struct EvalMetrics {
    double mean_rmspe = 0.0;
    double median_rmspe = 0.0;
    double sn_accuracy = 0.0;
    std::size_t count = 0;
};

// Scores records in parallel; sums run in index order so the result does not
// depend on the worker count.
EvalMetrics evaluate_model(const TransMusicModel& model, const DatasetReader& data,
                           const std::vector<std::uint64_t>& indexes, Quantization quant);

struct TrainedModel {
    TransMusicModel model;
    TrainConfig train;
};

// Rebuilds a model from a checkpoint plus its <ckpt>.json config sidecar.
TrainedModel load_trained_model(const std::string& checkpoint_path);

// Minibatch Adam over a dataset split into a leading train part and trailing
// validation part. Gradients from every batch item are applied in item order,
// which keeps updates bit-identical for any TMK_THREADS setting.
class Trainer {
public:
    Trainer(ModelConfig model_config, TrainConfig train_config, const std::string& dataset_path);

    // Called after the pre-training evaluation and after every epoch; return
    // false to stop early. The epoch-0 row scores the untrained model.
    using EpochCallback = std::function<bool(const LossReport&)>;

    // When out_checkpoint is non-empty, writes the best-validation weights
    // there (plus a config sidecar at <out>.json), the newest weights with
    // optimizer state at <out>.last, and the loss table at <out>.losses.csv.
    // A non-finite loss aborts with a numeric error; checkpoints from
    // completed epochs stay on disk.
    std::vector<LossReport> run(const std::string& out_checkpoint, const EpochCallback& on_epoch = {});

    TransMusicModel& model() { return model_; }
    const TrainConfig& train_config() const { return train_config_; }
    double best_validation_rmspe() const { return best_val_rmspe_; }

private:
    TrainConfig train_config_;
    TransMusicModel model_;
    DatasetReader data_;
    std::vector<std::uint64_t> train_indexes_;
    std::vector<std::uint64_t> val_indexes_;
    double best_val_rmspe_;
};

} // namespace transmusic
