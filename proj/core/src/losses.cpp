#include "transmusic/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "transmusic/errors.hpp"

namespace transmusic {

double wrap_half_turn(double x) {
    const double pi = std::numbers::pi;
    return x - pi * std::floor(x / pi + 0.5);
}

namespace {

// Best assignment of estimates to truths, by mean squared periodic error.
std::vector<std::size_t> best_pairing(const std::vector<double>& truth,
                                      const std::vector<double>& estimate) {
    const std::size_t k = truth.size();
    if (k == 0) throw ConfigError("rmspe: empty angle set");
    if (estimate.size() != k) throw ConfigError("rmspe: angle count mismatch");
    if (k > kMaxRmspeSources) throw ConfigError("rmspe: more sources than the pairing search supports");
    for (double v : truth)
        if (!std::isfinite(v)) throw NumericError("rmspe: non-finite truth angle");
    for (double v : estimate)
        if (!std::isfinite(v)) throw NumericError("rmspe: non-finite estimate");

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<std::size_t> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            const double d = wrap_half_turn(truth[i] - estimate[perm[i]]);
            cost += d * d;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

} // namespace

double rmspe(const std::vector<double>& truth, const std::vector<double>& estimate) {
    const std::vector<std::size_t> pairing = best_pairing(truth, estimate);
    const std::size_t k = truth.size();
    double cost = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double d = wrap_half_turn(truth[i] - estimate[pairing[i]]);
        cost += d * d;
    }
    return std::sqrt(cost / static_cast<double>(k));
}

nn::Tensor rmspe_loss(nn::Tape& tape, const std::vector<double>& truth, nn::Tensor doas) {
    const std::size_t k = truth.size();
    if (doas.shape().size() != 1 || doas.size() < k)
        throw ConfigError("rmspe loss: need at least K estimates");

    const std::vector<double>& est = doas.values();
    const std::vector<double> head(est.begin(), est.begin() + static_cast<std::ptrdiff_t>(k));
    const std::vector<std::size_t> pairing = best_pairing(truth, head);

    nn::Tensor picked = tape.gather(doas, pairing);
    nn::Tensor target = tape.constant({k}, truth);
    nn::Tensor wrapped = tape.wrap_half_turn(tape.subtract(target, picked));
    return tape.sqrt_clamped(tape.mean_all(tape.square(wrapped)));
}

double cross_entropy(std::size_t true_sources, const std::vector<double>& probs) {
    if (true_sources < 1 || true_sources > probs.size())
        throw ConfigError("cross entropy: source count outside the class range");
    const double p = probs[true_sources - 1];
    if (!std::isfinite(p)) throw NumericError("cross entropy: non-finite probability");
    return -std::log(std::max(p, kCrossEntropyFloor));
}

nn::Tensor cross_entropy_loss(nn::Tape& tape, std::size_t true_sources, nn::Tensor sn_probs) {
    if (sn_probs.shape().size() != 1) throw ConfigError("cross entropy: probabilities must be rank-1");
    if (true_sources < 1 || true_sources > sn_probs.size())
        throw ConfigError("cross entropy: source count outside the class range");
    nn::Tensor p = tape.select(sn_probs, true_sources - 1);
    return tape.scale(tape.log_clamped(p, kCrossEntropyFloor), -1.0);
}

} // namespace transmusic
