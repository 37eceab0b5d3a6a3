#pragma once

#include <cstddef>
#include <vector>

#include "transmusic/nn/tensor.hpp"

namespace transmusic {

// Difference folded into [-pi/2, pi/2); a half-turn grating ambiguity away
// counts as zero error.
double wrap_half_turn(double x);

// Permutation-matched root-mean-square periodic error. Brute force over the
// K! pairings, so K is capped at 5.
double rmspe(const std::vector<double>& truth, const std::vector<double>& estimate);

inline constexpr std::size_t kMaxRmspeSources = 5;

// Differentiable RMSPE: the best pairing is chosen from values, then the
// error is built through that fixed pairing. Only the first K model outputs
// participate; the rest get zero gradient.
nn::Tensor rmspe_loss(nn::Tape& tape, const std::vector<double>& truth, nn::Tensor doas);

inline constexpr double kCrossEntropyFloor = 1e-12;

// -log P(K); probs index i holds P(K = i + 1).
double cross_entropy(std::size_t true_sources, const std::vector<double>& probs);
nn::Tensor cross_entropy_loss(nn::Tape& tape, std::size_t true_sources, nn::Tensor sn_probs);

} // namespace transmusic
