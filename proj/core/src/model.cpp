#include "transmusic/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "transmusic/errors.hpp"

namespace transmusic {

void ModelConfig::validate() const {
    if (num_antennas < 2) throw ConfigError("model: need at least two antennas");
    if (encoder_blocks == 0) throw ConfigError("model: need at least one encoder block");
    if (attention_heads == 0 || model_width() % attention_heads != 0)
        throw ConfigError("model: head count must divide the model width");
    if (ffn_hidden == 0) throw ConfigError("model: ffn width must be positive");
    if (spectrum_grid < 2) throw ConfigError("model: spectrum grid too small");
    for (std::size_t w : subspace_hidden)
        if (w == 0) throw ConfigError("model: zero subspace width");
    for (std::size_t w : peak_hidden)
        if (w == 0) throw ConfigError("model: zero peak width");
    for (std::size_t w : source_count_hidden)
        if (w == 0) throw ConfigError("model: zero source-count width");
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["num_antennas"] = num_antennas;
    j["encoder_blocks"] = encoder_blocks;
    j["attention_heads"] = attention_heads;
    j["ffn_hidden"] = ffn_hidden;
    j["subspace_hidden"] = subspace_hidden;
    j["spectrum_grid"] = spectrum_grid;
    j["peak_hidden"] = peak_hidden;
    j["source_count_hidden"] = source_count_hidden;
    return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    ModelConfig c;
    try {
        if (j.contains("num_antennas")) c.num_antennas = j["num_antennas"].get<std::size_t>();
        if (j.contains("encoder_blocks")) c.encoder_blocks = j["encoder_blocks"].get<std::size_t>();
        if (j.contains("attention_heads")) c.attention_heads = j["attention_heads"].get<std::size_t>();
        if (j.contains("ffn_hidden")) c.ffn_hidden = j["ffn_hidden"].get<std::size_t>();
        if (j.contains("subspace_hidden"))
            c.subspace_hidden = j["subspace_hidden"].get<std::vector<std::size_t>>();
        if (j.contains("spectrum_grid")) c.spectrum_grid = j["spectrum_grid"].get<std::size_t>();
        if (j.contains("peak_hidden")) c.peak_hidden = j["peak_hidden"].get<std::vector<std::size_t>>();
        if (j.contains("source_count_hidden"))
            c.source_count_hidden = j["source_count_hidden"].get<std::vector<std::size_t>>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

namespace {

void append_stack(std::vector<std::pair<std::string, nn::Shape>>& out, const std::string& prefix,
                  std::size_t in, const std::vector<std::size_t>& hidden, std::size_t final_out) {
    std::size_t prev = in;
    std::size_t index = 0;
    for (std::size_t width : hidden) {
        out.push_back({prefix + std::to_string(index) + ".w", {prev, width}});
        out.push_back({prefix + std::to_string(index) + ".b", {width}});
        prev = width;
        ++index;
    }
    out.push_back({prefix + std::to_string(index) + ".w", {prev, final_out}});
    out.push_back({prefix + std::to_string(index) + ".b", {final_out}});
}

} // namespace

std::vector<double> snapshot_tokens(const SnapshotMatrix& snapshots) {
    const std::size_t m = snapshots.samples.rows();
    const std::size_t len = snapshots.samples.cols();
    const std::size_t d = 2 * m;
    std::vector<double> tokens(len * d);
    for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t i = 0; i < m; ++i) {
            const cdouble v = snapshots.samples(i, t);
            tokens[t * d + i] = v.real();
            tokens[t * d + m + i] = v.imag();
        }
    }
    return tokens;
}

std::vector<std::pair<std::string, nn::Shape>> TransMusicModel::expected_parameters(
    const ModelConfig& c) {
    const std::size_t d = c.model_width();
    std::vector<std::pair<std::string, nn::Shape>> out;
    for (std::size_t b = 0; b < c.encoder_blocks; ++b) {
        const std::string enc = "enc" + std::to_string(b) + ".";
        out.push_back({enc + "norm1.gain", {d}});
        out.push_back({enc + "norm1.bias", {d}});
        for (const char* head : {"q", "k", "v", "o"}) {
            out.push_back({enc + "attn." + head + ".w", {d, d}});
            out.push_back({enc + "attn." + head + ".b", {d}});
        }
        out.push_back({enc + "norm2.gain", {d}});
        out.push_back({enc + "norm2.bias", {d}});
        out.push_back({enc + "ffn.0.w", {d, c.ffn_hidden}});
        out.push_back({enc + "ffn.0.b", {c.ffn_hidden}});
        out.push_back({enc + "ffn.1.w", {c.ffn_hidden, d}});
        out.push_back({enc + "ffn.1.b", {d}});
    }
    append_stack(out, "subspace.", d, c.subspace_hidden, c.subspace_size());
    append_stack(out, "peak.", c.spectrum_grid, c.peak_hidden, c.max_sources());
    append_stack(out, "sn.", c.subspace_size(), c.source_count_hidden, c.max_sources());
    return out;
}

TransMusicModel::TransMusicModel(ModelConfig config, std::uint64_t init_seed)
    : config_(std::move(config)) {
    config_.validate();
    SplitMix64 rng(init_seed);
    for (const auto& [name, shape] : expected_parameters(config_)) {
        if (shape.size() == 2) {
            const double bound = std::sqrt(1.0 / static_cast<double>(shape[0]));
            std::vector<double> w(shape[0] * shape[1]);
            for (double& v : w) v = rng.uniform_range(-bound, bound);
            params_.add(name, shape, std::move(w));
        } else if (name.size() >= 5 && name.compare(name.size() - 5, 5, ".gain") == 0) {
            params_.add(name, shape, std::vector<double>(shape[0], 1.0));
        } else {
            params_.add(name, shape, std::vector<double>(shape[0], 0.0));
        }
    }
    steering_ = std::make_shared<const ComplexMatrix>(
        steering_table(make_angle_grid(config_.spectrum_grid), ArrayGeometry::ula(config_.num_antennas)));
}

TransMusicModel::TransMusicModel(ModelConfig config, nn::ParamStore&& params)
    : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
    const auto expected = expected_parameters(config_);
    if (params_.entries().size() != expected.size())
        throw ConfigError("model: parameter count does not match the architecture");
    for (const auto& [name, shape] : expected) {
        if (!params_.contains(name)) throw ConfigError("model: missing parameter " + name);
        if (params_.at(name).shape != shape)
            throw ConfigError("model: shape mismatch for " + name);
    }
    steering_ = std::make_shared<const ComplexMatrix>(
        steering_table(make_angle_grid(config_.spectrum_grid), ArrayGeometry::ula(config_.num_antennas)));
}

TransMusicModel::Forward TransMusicModel::forward(nn::Tape& tape,
                                                  const SnapshotMatrix& snapshots) const {
    const std::size_t m = config_.num_antennas;
    if (snapshots.samples.rows() != m) throw ConfigError("model: snapshot row count != antennas");
    const std::size_t len = snapshots.samples.cols();
    if (len == 0) throw ConfigError("model: empty snapshot matrix");
    const std::size_t d = config_.model_width();

    Forward fwd;
    auto bind = [&](const std::string& name) {
        nn::ParamStore::Entry& e = params_.at(name);
        nn::Tensor t = tape.leaf(e.shape, e.value);
        fwd.bound.push_back({&e, t});
        return t;
    };
    auto bind_linear = [&](const std::string& name) {
        return nn::LinearTensors{bind(name + ".w"), bind(name + ".b")};
    };

    nn::Tensor x = tape.constant({len, d}, snapshot_tokens(snapshots));

    for (std::size_t b = 0; b < config_.encoder_blocks; ++b) {
        const std::string enc = "enc" + std::to_string(b) + ".";
        nn::Tensor h1 = tape.layer_norm(x, bind(enc + "norm1.gain"), bind(enc + "norm1.bias"));
        nn::MhaTensors attn{bind_linear(enc + "attn.q"), bind_linear(enc + "attn.k"),
                            bind_linear(enc + "attn.v"), bind_linear(enc + "attn.o")};
        x = tape.add(x, nn::multi_head_attention(tape, h1, attn, config_.attention_heads));
        nn::Tensor h2 = tape.layer_norm(x, bind(enc + "norm2.gain"), bind(enc + "norm2.bias"));
        nn::Tensor f = nn::linear(tape, h2, bind_linear(enc + "ffn.0"));
        f = nn::linear(tape, tape.relu(f), bind_linear(enc + "ffn.1"));
        x = tape.add(x, f);
    }

    nn::Tensor pooled = tape.mean_rows(x);

    auto run_stack = [&](nn::Tensor input, const std::string& prefix, std::size_t layers) {
        nn::Tensor h = input;
        for (std::size_t i = 0; i + 1 < layers; ++i)
            h = tape.relu(nn::linear(tape, h, bind_linear(prefix + std::to_string(i))));
        return nn::linear(tape, h, bind_linear(prefix + std::to_string(layers - 1)));
    };

    fwd.subspace_vec = run_stack(pooled, "subspace.", config_.subspace_hidden.size() + 1);
    nn::Tensor raw_spectrum = tape.subspace_spectrum(fwd.subspace_vec, steering_, kSpectrumFloor);
    fwd.spectrum = tape.normalize_by_max(raw_spectrum);

    nn::Tensor peaks = run_stack(fwd.spectrum, "peak.", config_.peak_hidden.size() + 1);
    fwd.doas = tape.scale(tape.tanh_activation(peaks), std::numbers::pi / 2.0);

    nn::Tensor detached = tape.stop_gradient(fwd.subspace_vec);
    nn::Tensor logits = run_stack(detached, "sn.", config_.source_count_hidden.size() + 1);
    fwd.sn_probs = tape.softmax_rows(logits);
    return fwd;
}

ModelOutput TransMusicModel::infer(const SnapshotMatrix& snapshots) const {
    nn::Tape tape;
    Forward fwd = forward(tape, snapshots);

    ModelOutput out;
    out.doas = fwd.doas.values();
    out.sn_probs = fwd.sn_probs.values();

    const std::size_t m = config_.num_antennas;
    const std::vector<double>& e = fwd.subspace_vec.values();
    out.subspace = ComplexMatrix(m, m);
    for (std::size_t k = 0; k < m; ++k)
        for (std::size_t i = 0; i < m; ++i)
            out.subspace(i, k) = cdouble(e[k * m + i], e[m * m + k * m + i]);

    out.spectrum.angles = make_angle_grid(config_.spectrum_grid);
    out.spectrum.values = fwd.spectrum.values();
    return out;
}

std::size_t ModelOutput::estimated_sources() const {
    if (sn_probs.empty()) throw ConfigError("empty source-count distribution");
    std::size_t best = 0;
    for (std::size_t i = 1; i < sn_probs.size(); ++i)
        if (sn_probs[i] > sn_probs[best]) best = i;
    return best + 1;
}

} // namespace transmusic
