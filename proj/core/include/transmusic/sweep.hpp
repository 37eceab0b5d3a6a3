#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "transmusic/classical.hpp"

namespace transmusic {

// Scenario generation for sweeps that do not read a dataset file.
struct SweepGenSpec {
    std::uint32_t num_antennas = 8;
    std::uint32_t k_min = 2;
    std::uint32_t k_max = 5;
    bool separation_guard = true;
    double min_separation_rad = 0.1;

    void validate() const;
};

struct SweepConfig {
    std::vector<std::string> methods;
    std::vector<double> snr_db = {0.0, 5.0, 10.0};
    std::vector<std::uint32_t> snapshot_counts = {200};
    std::size_t trials = 200;
    std::string dataset_path;          // when set, scenarios come from the file
    SweepGenSpec generation;           // used otherwise
    std::map<std::string, std::string> checkpoints; // learned method -> path
    std::uint64_t seed = 0;
    std::size_t grid_size = kClassicalGridSize;
    bool debug_scenario_hash = false;  // adds a pairing-proof column to the raw CSV

    void validate() const;
    std::string to_json() const;
    static SweepConfig from_json(const std::string& text);
    static SweepConfig from_json_file(const std::string& path);
};

struct SweepResult {
    std::string method;
    double snr_db = 0.0;
    std::uint32_t snapshots = 0;
    std::size_t trial = 0;
    std::size_t k_true = 0;
    std::size_t k_hat = 0;
    double rmspe_rad = 0.0;   // NaN marks a failed trial
    double wall_time_ms = 0.0;
    std::uint64_t scenario_hash = 0; // filled in debug mode
};

struct SweepSummary {
    std::string method;
    double snr_db = 0.0;
    std::uint32_t snapshots = 0;
    std::size_t trials = 0; // successful rows aggregated
    double rmspe_median = 0.0;
    double rmspe_mean = 0.0;
    double rmspe_median_ci = 0.0; // bootstrap 95% half-widths
    double rmspe_mean_ci = 0.0;
    double sn_accuracy = 0.0;
    double sn_accuracy_ci = 0.0;
};

const std::vector<std::string>& known_methods();
bool is_learned_method(const std::string& method);

// One row per (method, SNR cell, L cell, trial). Within a cell every method
// sees the same scenario and snapshot realization; one-bit methods get the
// quantized arm. A trial's source angles are shared across cells so curves
// differ only through noise and snapshot count.
std::vector<SweepResult> run_sweep(const SweepConfig& config);

// Per (method, snr_db, L) summary. Failed trials are left out; the bootstrap
// is seeded by group position, so reruns reproduce the intervals.
std::vector<SweepSummary> aggregate(const std::vector<SweepResult>& results);

// raw.csv, summary.csv, and the four figure analogues (RMSPE and source-count
// accuracy, each against SNR and L) as standalone SVGs. RMSPE axes are
// log-scale; plots draw the median.
void emit(const std::vector<SweepResult>& results, const std::vector<SweepSummary>& summaries,
          const std::string& out_dir, bool scenario_hash_column = false);

} // namespace transmusic
