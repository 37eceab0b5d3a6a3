#include "transmusic/nn/layers.hpp"

#include <cmath>

#include "transmusic/errors.hpp"

namespace transmusic::nn {

Tensor linear(Tape& tape, Tensor x, const LinearTensors& p) {
    return tape.add_row(tape.matmul(x, p.weight), p.bias);
}

Tensor multi_head_attention(Tape& tape, Tensor x, const MhaTensors& p, std::size_t heads) {
    const Shape& s = x.shape();
    if (s.size() != 2) throw ConfigError("attention input must be [L, d]");
    const std::size_t d = s[1];
    if (heads == 0 || d % heads != 0) throw ConfigError("head count must divide the model width");
    const std::size_t dh = d / heads;

    Tensor q = linear(tape, x, p.query);
    Tensor k = linear(tape, x, p.key);
    Tensor v = linear(tape, x, p.value);

    std::vector<Tensor> contexts;
    contexts.reserve(heads);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = tape.slice_columns(q, h * dh, dh);
        Tensor kh = tape.slice_columns(k, h * dh, dh);
        Tensor vh = tape.slice_columns(v, h * dh, dh);
        Tensor scores = tape.scale(tape.matmul(qh, tape.transpose(kh)), inv_scale);
        Tensor weights = tape.softmax_rows(scores);
        contexts.push_back(tape.matmul(weights, vh));
    }
    Tensor merged = heads == 1 ? contexts[0] : tape.concat_columns(contexts);
    return linear(tape, merged, p.output);
}

void init_linear(ParamStore& store, SplitMix64& rng, const std::string& name, std::size_t in,
                 std::size_t out) {
    if (in == 0 || out == 0) throw ConfigError("linear layer with zero width: " + name);
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.uniform_range(-bound, bound);
    store.add(name + ".w", {in, out}, std::move(w));
    store.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

void init_layer_norm(ParamStore& store, const std::string& name, std::size_t width) {
    store.add(name + ".gain", {width}, std::vector<double>(width, 1.0));
    store.add(name + ".bias", {width}, std::vector<double>(width, 0.0));
}

} // namespace transmusic::nn
