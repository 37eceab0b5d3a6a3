#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "transmusic/nn/tensor.hpp"

namespace transmusic::nn {

struct AdamSettings {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Named parameter set plus first/second moment state. Entries iterate in
// name order, which keeps every serialization and update walk deterministic.
class ParamStore {
public:
    struct Entry {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<double> moment1;
        std::vector<double> moment2;
    };

    Entry& add(const std::string& name, Shape shape, std::vector<double> init);
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;
    bool contains(const std::string& name) const { return entries_.count(name) != 0; }

    std::map<std::string, Entry>& entries() { return entries_; }
    const std::map<std::string, Entry>& entries() const { return entries_; }
    std::size_t total_values() const;

    std::uint64_t step() const { return step_; }
    void set_step(std::uint64_t s) { step_ = s; }

    // Adds scale * grad into the entry's gradient buffer.
    void accumulate(Entry& entry, const std::vector<double>& grad, double scale);
    void accumulate(Entry& entry, const double* grad, std::size_t count, double scale);
    void zero_gradients();
    bool has_pending_gradients() const { return pending_gradients_; }

    // One Adam update over every entry (bias-corrected moments). Gradients
    // are consumed and reset; calling without accumulated gradients is an
    // error.
    void adam_step(double learning_rate, const AdamSettings& settings = {});

private:
    std::map<std::string, Entry> entries_;
    std::uint64_t step_ = 0;
    bool pending_gradients_ = false;
};

} // namespace transmusic::nn
