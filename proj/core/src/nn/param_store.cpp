#include "transmusic/nn/param_store.hpp"

#include <cmath>

#include "transmusic/errors.hpp"

namespace transmusic::nn {

namespace {

std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

} // namespace

ParamStore::Entry& ParamStore::add(const std::string& name, Shape shape, std::vector<double> init) {
    if (name.empty()) throw ConfigError("parameter name must not be empty");
    if (entries_.count(name)) throw ConfigError("duplicate parameter: " + name);
    if (init.size() != shape_size(shape)) throw ConfigError("parameter init size mismatch: " + name);
    Entry e;
    e.shape = std::move(shape);
    e.value = std::move(init);
    e.grad.assign(e.value.size(), 0.0);
    e.moment1.assign(e.value.size(), 0.0);
    e.moment2.assign(e.value.size(), 0.0);
    return entries_.emplace(name, std::move(e)).first->second;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

std::size_t ParamStore::total_values() const {
    std::size_t n = 0;
    for (const auto& [name, e] : entries_) n += e.value.size();
    return n;
}

void ParamStore::accumulate(Entry& entry, const std::vector<double>& grad, double scale) {
    if (grad.empty()) return;
    accumulate(entry, grad.data(), grad.size(), scale);
}

void ParamStore::accumulate(Entry& entry, const double* grad, std::size_t count, double scale) {
    if (count != entry.grad.size()) throw ConfigError("gradient size mismatch");
    for (std::size_t i = 0; i < count; ++i) entry.grad[i] += scale * grad[i];
    pending_gradients_ = true;
}

void ParamStore::zero_gradients() {
    for (auto& [name, e] : entries_)
        std::fill(e.grad.begin(), e.grad.end(), 0.0);
    pending_gradients_ = false;
}

void ParamStore::adam_step(double learning_rate, const AdamSettings& s) {
    if (!pending_gradients_) throw ConfigError("adam_step without accumulated gradients");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    step_ += 1;
    const double t = static_cast<double>(step_);
    const double corr1 = 1.0 - std::pow(s.beta1, t);
    const double corr2 = 1.0 - std::pow(s.beta2, t);
    for (auto& [name, e] : entries_) {
        for (std::size_t i = 0; i < e.value.size(); ++i) {
            const double g = e.grad[i];
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);
            e.moment1[i] = s.beta1 * e.moment1[i] + (1.0 - s.beta1) * g;
            e.moment2[i] = s.beta2 * e.moment2[i] + (1.0 - s.beta2) * g * g;
            const double mhat = e.moment1[i] / corr1;
            const double vhat = e.moment2[i] / corr2;
            e.value[i] -= learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
        }
        std::fill(e.grad.begin(), e.grad.end(), 0.0);
    }
    pending_gradients_ = false;
}

} // namespace transmusic::nn
