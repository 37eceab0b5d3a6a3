#pragma once

#include <string>

#include "transmusic/nn/param_store.hpp"
#include "transmusic/nn/tensor.hpp"
#include "transmusic/rng.hpp"

namespace transmusic::nn {

// Weights for one affine map, already bound to a tape.
struct LinearTensors {
    Tensor weight; // [in, out]
    Tensor bias;   // [out]
};

struct MhaTensors {
    LinearTensors query, key, value, output;
};

Tensor linear(Tape& tape, Tensor x, const LinearTensors& p);

// Scaled dot-product attention over `heads` equal slices of the model width.
// Input [L, d]; output [L, d].
Tensor multi_head_attention(Tape& tape, Tensor x, const MhaTensors& p, std::size_t heads);

// Parameter registration with the shared init scheme: weights uniform in
// +-sqrt(1/fan_in) drawn row-major, biases zero, norm gains one.
void init_linear(ParamStore& store, SplitMix64& rng, const std::string& name, std::size_t in,
                 std::size_t out);
void init_layer_norm(ParamStore& store, const std::string& name, std::size_t width);

} // namespace transmusic::nn
