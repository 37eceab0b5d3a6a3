#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "transmusic/array_sim.hpp"
#include "transmusic/nn/layers.hpp"
#include "transmusic/nn/param_store.hpp"
#include "transmusic/nn/tensor.hpp"
#include "transmusic/spectrum.hpp"

namespace transmusic {

struct ModelConfig {
    std::size_t num_antennas = 8;
    std::size_t encoder_blocks = 2;
    std::size_t attention_heads = 2;
    std::size_t ffn_hidden = 64;
    std::vector<std::size_t> subspace_hidden = {128};
    std::size_t spectrum_grid = 361;
    std::vector<std::size_t> peak_hidden = {256};
    std::vector<std::size_t> source_count_hidden = {64};

    std::size_t model_width() const { return 2 * num_antennas; }
    std::size_t subspace_size() const { return 2 * num_antennas * num_antennas; }
    std::size_t max_sources() const { return num_antennas - 1; }

    void validate() const;
    std::string to_json() const;
    static ModelConfig from_json(const std::string& text);
};

struct ModelOutput {
    std::vector<double> doas;      // M-1 angles in (-pi/2, pi/2)
    std::vector<double> sn_probs;  // softmax over source counts 1..M-1
    ComplexMatrix subspace;        // augmented M x M estimate
    SpectrumOnGrid spectrum;       // peak-normalized
    std::size_t estimated_sources() const; // argmax + 1, first max on ties
};

// Encoder token rows, one per snapshot: the M real parts of that time step
// followed by its M imaginary parts. Row-major [L, 2M].
std::vector<double> snapshot_tokens(const SnapshotMatrix& snapshots);

// Snapshot sequence -> encoder -> subspace head -> differentiable spectrum
// -> peak head. The source-count branch reads the flattened subspace vector
// through a gradient stop, so its loss never reaches the subspace weights.
class TransMusicModel {
public:
    TransMusicModel(ModelConfig config, std::uint64_t init_seed);
    TransMusicModel(ModelConfig config, nn::ParamStore&& params);

    const ModelConfig& config() const { return config_; }
    nn::ParamStore& params() { return params_; }
    const nn::ParamStore& params() const { return params_; }

    struct Forward {
        nn::Tensor subspace_vec; // [2 M^2]
        nn::Tensor spectrum;     // [G], peak-normalized
        nn::Tensor doas;         // [M-1]
        nn::Tensor sn_probs;     // [M-1]
        std::vector<std::pair<nn::ParamStore::Entry*, nn::Tensor>> bound;
    };

    // Builds the graph for one snapshot matrix on the caller's tape.
    Forward forward(nn::Tape& tape, const SnapshotMatrix& snapshots) const;

    // Forward pass without gradient plumbing.
    ModelOutput infer(const SnapshotMatrix& snapshots) const;

    // Every parameter the architecture expects, in creation order.
    static std::vector<std::pair<std::string, nn::Shape>> expected_parameters(const ModelConfig&);

private:
    ModelConfig config_;
    mutable nn::ParamStore params_;
    std::shared_ptr<const ComplexMatrix> steering_; // spectrum_grid x M
};

} // namespace transmusic
