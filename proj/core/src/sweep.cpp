#include "transmusic/sweep.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <tuple>

#include <json.hpp>

#include "transmusic/dataset.hpp"
#include "transmusic/errors.hpp"
#include "transmusic/hermitian_eig.hpp"
#include "transmusic/losses.hpp"
#include "transmusic/svg_plot.hpp"
#include "transmusic/threading.hpp"
#include "transmusic/trainer.hpp"

namespace transmusic {

namespace {

const std::vector<std::string> kKnownMethods = {"music", "one_bit_music", "beamformer",
                                                "transmusic_1bit", "transmusic_unquantized"};

std::uint64_t fnv1a(std::uint64_t hash, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        hash ^= p[i];
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

std::uint64_t scenario_hash(const Scenario& sc, const ComplexMatrix& unquantized) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    const auto k = static_cast<std::uint32_t>(sc.thetas.size());
    h = fnv1a(h, &k, sizeof(k));
    h = fnv1a(h, sc.thetas.data(), sc.thetas.size() * sizeof(double));
    h = fnv1a(h, &sc.snr_db, sizeof(sc.snr_db));
    const auto l = static_cast<std::uint32_t>(sc.num_snapshots);
    h = fnv1a(h, &l, sizeof(l));
    h = fnv1a(h, unquantized.data(), unquantized.rows() * unquantized.cols() * sizeof(cdouble));
    return h;
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

const std::vector<std::string>& known_methods() { return kKnownMethods; }

bool is_learned_method(const std::string& method) {
    return method == "transmusic_1bit" || method == "transmusic_unquantized";
}

void SweepGenSpec::validate() const {
    if (num_antennas < 2) throw ConfigError("sweep: need at least two antennas");
    if (k_min < 1 || k_min > k_max) throw ConfigError("sweep: invalid source-count range");
    if (k_max > num_antennas - 1) throw ConfigError("sweep: source-count range exceeds M-1");
    if (separation_guard && min_separation_rad < 0.0)
        throw ConfigError("sweep: negative minimum separation");
}

void SweepConfig::validate() const {
    if (methods.empty()) throw ConfigError("sweep: no methods selected");
    for (const std::string& m : methods) {
        if (std::find(kKnownMethods.begin(), kKnownMethods.end(), m) == kKnownMethods.end())
            throw ConfigError("sweep: unknown method: " + m);
        if (is_learned_method(m) && checkpoints.find(m) == checkpoints.end())
            throw ConfigError("sweep: missing checkpoint for " + m);
    }
    if (trials < 1) throw ConfigError("sweep: need at least one trial");
    if (grid_size < 2) throw ConfigError("sweep: grid too small");
    if (dataset_path.empty()) {
        if (snr_db.empty()) throw ConfigError("sweep: empty SNR list");
        if (snapshot_counts.empty()) throw ConfigError("sweep: empty snapshot-count list");
        for (std::uint32_t l : snapshot_counts)
            if (l == 0) throw ConfigError("sweep: snapshot count must be positive");
        generation.validate();
    }
}

std::string SweepConfig::to_json() const {
    nlohmann::json j;
    j["methods"] = methods;
    j["snr_db"] = snr_db;
    j["snapshot_counts"] = snapshot_counts;
    j["trials"] = trials;
    if (!dataset_path.empty()) j["dataset"] = dataset_path;
    j["generation"] = {{"num_antennas", generation.num_antennas},
                       {"k_min", generation.k_min},
                       {"k_max", generation.k_max},
                       {"separation_guard", generation.separation_guard},
                       {"min_separation_rad", generation.min_separation_rad}};
    j["checkpoints"] = checkpoints;
    j["seed"] = seed;
    j["grid_size"] = grid_size;
    j["debug_scenario_hash"] = debug_scenario_hash;
    return j.dump(2);
}

SweepConfig SweepConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep config: ") + e.what());
    }
    SweepConfig c;
    try {
        if (j.contains("methods")) c.methods = j["methods"].get<std::vector<std::string>>();
        if (j.contains("snr_db")) c.snr_db = j["snr_db"].get<std::vector<double>>();
        if (j.contains("snapshot_counts"))
            c.snapshot_counts = j["snapshot_counts"].get<std::vector<std::uint32_t>>();
        if (j.contains("trials")) c.trials = j["trials"].get<std::size_t>();
        if (j.contains("dataset")) c.dataset_path = j["dataset"].get<std::string>();
        if (j.contains("generation")) {
            const auto& g = j["generation"];
            if (g.contains("num_antennas")) c.generation.num_antennas = g["num_antennas"].get<std::uint32_t>();
            if (g.contains("k_min")) c.generation.k_min = g["k_min"].get<std::uint32_t>();
            if (g.contains("k_max")) c.generation.k_max = g["k_max"].get<std::uint32_t>();
            if (g.contains("separation_guard"))
                c.generation.separation_guard = g["separation_guard"].get<bool>();
            if (g.contains("min_separation_rad"))
                c.generation.min_separation_rad = g["min_separation_rad"].get<double>();
        }
        if (j.contains("checkpoints"))
            c.checkpoints = j["checkpoints"].get<std::map<std::string, std::string>>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("grid_size")) c.grid_size = j["grid_size"].get<std::size_t>();
        if (j.contains("debug_scenario_hash"))
            c.debug_scenario_hash = j["debug_scenario_hash"].get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("sweep config: ") + e.what());
    }
    c.validate();
    return c;
}

SweepConfig SweepConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("sweep config: cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

namespace {

struct WorkItem {
    double snr_db = 0.0;
    std::uint32_t snapshots = 0;
    std::size_t trial = 0;
    // generation mode
    std::vector<double> angles;
    std::uint64_t snapshot_seed = 0;
    // dataset mode
    std::int64_t record_index = -1;
};

struct MethodRun {
    std::size_t k_hat = 0;
    std::vector<double> angles;
};

MethodRun run_method(const std::string& method, const Scenario& sc,
                     const SnapshotMatrix& unquantized, const SnapshotMatrix& one_bit,
                     const ArrayGeometry& geometry, std::size_t grid_size,
                     const std::map<std::string, std::unique_ptr<TrainedModel>>& models) {
    const std::size_t k = sc.thetas.size();
    MethodRun out;
    if (method == "music" || method == "one_bit_music") {
        ComplexMatrix r = method == "music"
                              ? sample_covariance(unquantized.samples)
                              : arcsine_covariance(sample_covariance(one_bit.samples));
        const EigenDecomposition eig = hermitian_evd(r);
        out.k_hat = estimate_source_count_eigen(eig.eigenvalues);
        const SpectrumOnGrid spec = music_spectrum(noise_subspace(eig, k), geometry, grid_size);
        out.angles = find_peaks(spec, k);
    } else if (method == "beamformer") {
        const BeamformerResult bf = beamformer_estimate(unquantized, geometry, grid_size);
        out.k_hat = bf.estimated_sources;
        out.angles = find_peaks(bf.spectrum, k);
    } else {
        const SnapshotMatrix& arm = method == "transmusic_1bit" ? one_bit : unquantized;
        const ModelOutput mo = models.at(method)->model.infer(arm);
        out.k_hat = mo.estimated_sources();
        out.angles.assign(mo.doas.begin(), mo.doas.begin() + static_cast<std::ptrdiff_t>(k));
        std::sort(out.angles.begin(), out.angles.end());
    }
    return out;
}

} // namespace

std::vector<SweepResult> run_sweep(const SweepConfig& config) {
    config.validate();

    std::map<std::string, std::unique_ptr<TrainedModel>> models;
    for (const std::string& m : config.methods) {
        if (!is_learned_method(m)) continue;
        const std::string& path = config.checkpoints.at(m);
        if (!std::filesystem::exists(path)) throw ConfigError("sweep: checkpoint not found: " + path);
        models[m] = std::make_unique<TrainedModel>(load_trained_model(path));
    }

    std::vector<WorkItem> items;
    std::unique_ptr<DatasetReader> reader;
    std::size_t num_antennas = 0;

    if (config.dataset_path.empty()) {
        num_antennas = config.generation.num_antennas;
        // One angle set per trial, shared by every (SNR, L) cell.
        std::vector<std::vector<double>> trial_angles(config.trials);
        for (std::size_t t = 0; t < config.trials; ++t) {
            SplitMix64 rng(split_seed(split_seed(config.seed, 2), t));
            const std::uint32_t span = config.generation.k_max - config.generation.k_min + 1;
            const auto k = static_cast<std::size_t>(config.generation.k_min + rng.below(span));
            trial_angles[t] = sample_angles(rng, k, config.generation.separation_guard,
                                            config.generation.min_separation_rad);
        }
        for (std::size_t si = 0; si < config.snr_db.size(); ++si) {
            for (std::size_t li = 0; li < config.snapshot_counts.size(); ++li) {
                const std::uint64_t cell_seed =
                    split_seed(split_seed(split_seed(config.seed, 1), si), li);
                for (std::size_t t = 0; t < config.trials; ++t) {
                    WorkItem item;
                    item.snr_db = config.snr_db[si];
                    item.snapshots = config.snapshot_counts[li];
                    item.trial = t;
                    item.angles = trial_angles[t];
                    item.snapshot_seed = split_seed(cell_seed, t);
                    items.push_back(std::move(item));
                }
            }
        }
    } else {
        reader = std::make_unique<DatasetReader>(config.dataset_path);
        if (reader->size() == 0) throw ConfigError("sweep: empty dataset");
        // Records become trials of their (SNR, L) cell, in file order.
        std::map<std::pair<double, std::uint32_t>, std::size_t> cell_counts;
        for (std::uint64_t i = 0; i < reader->size(); ++i) {
            const DatasetRecord rec = reader->read(i);
            if (num_antennas == 0) num_antennas = rec.snapshots.samples.rows();
            const double snr = rec.scenario.snr_db;
            const auto l = static_cast<std::uint32_t>(rec.scenario.num_snapshots);
            if (!config.snr_db.empty() &&
                std::find(config.snr_db.begin(), config.snr_db.end(), snr) == config.snr_db.end())
                continue;
            if (!config.snapshot_counts.empty() &&
                std::find(config.snapshot_counts.begin(), config.snapshot_counts.end(), l) ==
                    config.snapshot_counts.end())
                continue;
            std::size_t& count = cell_counts[{snr, l}];
            if (count >= config.trials) continue;
            WorkItem item;
            item.snr_db = snr;
            item.snapshots = l;
            item.trial = count++;
            item.record_index = static_cast<std::int64_t>(i);
            items.push_back(std::move(item));
        }
        if (items.empty()) throw ConfigError("sweep: no dataset records match the requested cells");
    }

    for (const auto& [name, tm] : models) {
        if (tm->model.config().num_antennas != num_antennas)
            throw ConfigError("sweep: checkpoint for " + name + " expects a different antenna count");
    }

    const ArrayGeometry geometry = ArrayGeometry::ula(num_antennas);
    const bool need_one_bit =
        std::any_of(config.methods.begin(), config.methods.end(), [](const std::string& m) {
            return m == "one_bit_music" || m == "transmusic_1bit";
        });

    std::vector<SweepResult> rows(items.size() * config.methods.size());
    parallel_for_indexed(items.size(), [&](std::size_t w) {
        const WorkItem& item = items[w];
        Scenario sc;
        SnapshotMatrix unquantized;
        if (item.record_index >= 0) {
            const DatasetRecord rec = reader->read(static_cast<std::uint64_t>(item.record_index));
            sc = rec.scenario;
            unquantized = rec.snapshots;
        } else {
            sc.thetas = item.angles;
            sc.snr_db = item.snr_db;
            sc.num_snapshots = item.snapshots;
            unquantized = generate_snapshots(sc, geometry, item.snapshot_seed);
        }
        SnapshotMatrix one_bit;
        if (need_one_bit) one_bit = quantize_one_bit(unquantized);
        const std::uint64_t hash =
            config.debug_scenario_hash ? scenario_hash(sc, unquantized.samples) : 0;

        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            SweepResult& row = rows[w * config.methods.size() + mi];
            row.method = config.methods[mi];
            row.snr_db = item.snr_db;
            row.snapshots = item.snapshots;
            row.trial = item.trial;
            row.k_true = sc.thetas.size();
            row.scenario_hash = hash;
            const auto start = std::chrono::steady_clock::now();
            try {
                const MethodRun run = run_method(row.method, sc, unquantized, one_bit, geometry,
                                                 config.grid_size, models);
                row.k_hat = run.k_hat;
                row.rmspe_rad = rmspe(sc.thetas, run.angles);
            } catch (const Error&) {
                row.k_hat = 0;
                row.rmspe_rad = std::numeric_limits<double>::quiet_NaN();
            }
            row.wall_time_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
        }
    });
    return rows;
}

namespace {

double median_of_sorted(const std::vector<double>& sorted) {
    const std::size_t n = sorted.size();
    return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

double percentile_of_sorted(const std::vector<double>& sorted, double q) {
    const auto idx = static_cast<std::size_t>(
        std::llround(q * static_cast<double>(sorted.size() - 1)));
    return sorted[idx];
}

} // namespace

std::vector<SweepSummary> aggregate(const std::vector<SweepResult>& results) {
    if (results.empty()) throw ConfigError("aggregate: empty result table");

    using Key = std::tuple<std::string, double, std::uint32_t>;
    std::map<Key, std::vector<const SweepResult*>> groups;
    for (const SweepResult& r : results)
        groups[{r.method, r.snr_db, r.snapshots}].push_back(&r);

    constexpr std::size_t kResamples = 1000;
    std::vector<SweepSummary> summaries;
    std::size_t ordinal = 0;
    for (const auto& [key, rows] : groups) {
        std::vector<double> errors;
        std::vector<double> hits;
        for (const SweepResult* r : rows) {
            if (std::isnan(r->rmspe_rad)) continue; // failed trial
            errors.push_back(r->rmspe_rad);
            hits.push_back(r->k_hat == r->k_true ? 1.0 : 0.0);
        }
        ++ordinal;
        if (errors.empty()) continue;

        SweepSummary s;
        s.method = std::get<0>(key);
        s.snr_db = std::get<1>(key);
        s.snapshots = std::get<2>(key);
        s.trials = errors.size();

        std::vector<double> sorted = errors;
        std::sort(sorted.begin(), sorted.end());
        s.rmspe_median = median_of_sorted(sorted);
        double mean = 0.0, acc = 0.0;
        for (std::size_t i = 0; i < errors.size(); ++i) {
            mean += errors[i];
            acc += hits[i];
        }
        mean /= static_cast<double>(errors.size());
        s.rmspe_mean = mean;
        s.sn_accuracy = acc / static_cast<double>(errors.size());

        const std::size_t n = errors.size();
        if (n > 1) {
            SplitMix64 rng(split_seed(0xB007, ordinal));
            std::vector<double> boot_median(kResamples), boot_mean(kResamples), boot_acc(kResamples);
            std::vector<double> sample(n);
            for (std::size_t b = 0; b < kResamples; ++b) {
                double bm = 0.0, ba = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const std::uint64_t pick = rng.below(n);
                    sample[i] = errors[pick];
                    bm += errors[pick];
                    ba += hits[pick];
                }
                std::sort(sample.begin(), sample.end());
                boot_median[b] = median_of_sorted(sample);
                boot_mean[b] = bm / static_cast<double>(n);
                boot_acc[b] = ba / static_cast<double>(n);
            }
            for (auto* v : {&boot_median, &boot_mean, &boot_acc}) std::sort(v->begin(), v->end());
            s.rmspe_median_ci =
                0.5 * (percentile_of_sorted(boot_median, 0.975) - percentile_of_sorted(boot_median, 0.025));
            s.rmspe_mean_ci =
                0.5 * (percentile_of_sorted(boot_mean, 0.975) - percentile_of_sorted(boot_mean, 0.025));
            s.sn_accuracy_ci =
                0.5 * (percentile_of_sorted(boot_acc, 0.975) - percentile_of_sorted(boot_acc, 0.025));
        }
        summaries.push_back(std::move(s));
    }
    return summaries;
}

void emit(const std::vector<SweepResult>& results, const std::vector<SweepSummary>& summaries,
          const std::string& out_dir, bool scenario_hash_column) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("emit: cannot create directory: " + out_dir);

    std::vector<const SweepResult*> sorted_rows;
    sorted_rows.reserve(results.size());
    for (const SweepResult& r : results) sorted_rows.push_back(&r);
    std::sort(sorted_rows.begin(), sorted_rows.end(), [](const SweepResult* a, const SweepResult* b) {
        if (a->method != b->method) return a->method < b->method;
        if (a->snr_db != b->snr_db) return a->snr_db < b->snr_db;
        if (a->snapshots != b->snapshots) return a->snapshots < b->snapshots;
        return a->trial < b->trial;
    });

    {
        std::ofstream raw(out_dir + "/raw.csv", std::ios::trunc);
        if (!raw) throw IoError("emit: cannot write raw.csv");
        raw << "method,snr_db,L,trial,k_true,k_hat,rmspe_rad,wall_time_ms";
        if (scenario_hash_column) raw << ",scenario_hash";
        raw << "\n";
        for (const SweepResult* r : sorted_rows) {
            raw << r->method << "," << format_double(r->snr_db) << "," << r->snapshots << ","
                << r->trial << "," << r->k_true << "," << r->k_hat << ","
                << format_double(r->rmspe_rad) << ",";
            char wall[48];
            std::snprintf(wall, sizeof(wall), "%.3f", r->wall_time_ms);
            raw << wall;
            if (scenario_hash_column) raw << "," << r->scenario_hash;
            raw << "\n";
        }
        raw.flush();
        if (!raw) throw IoError("emit: raw.csv write failed");
    }

    {
        std::ofstream sum(out_dir + "/summary.csv", std::ios::trunc);
        if (!sum) throw IoError("emit: cannot write summary.csv");
        sum << "method,snr_db,L,trials,rmspe_median_rad,rmspe_mean_rad,rmspe_median_ci_rad,"
               "rmspe_mean_ci_rad,sn_accuracy,sn_accuracy_ci\n";
        for (const SweepSummary& s : summaries) {
            sum << s.method << "," << format_double(s.snr_db) << "," << s.snapshots << ","
                << s.trials << "," << format_double(s.rmspe_median) << ","
                << format_double(s.rmspe_mean) << "," << format_double(s.rmspe_median_ci) << ","
                << format_double(s.rmspe_mean_ci) << "," << format_double(s.sn_accuracy) << ","
                << format_double(s.sn_accuracy_ci) << "\n";
        }
        sum.flush();
        if (!sum) throw IoError("emit: summary.csv write failed");
    }

    // Series keyed on the variable held fixed; medians drive the RMSPE plots.
    auto build = [&](bool vs_snr, bool rmspe_axis) {
        std::map<std::pair<std::string, double>, PlotSeries> series;
        std::vector<double> fixed_values;
        for (const SweepSummary& s : summaries) {
            const double fixed = vs_snr ? static_cast<double>(s.snapshots) : s.snr_db;
            fixed_values.push_back(fixed);
        }
        std::sort(fixed_values.begin(), fixed_values.end());
        fixed_values.erase(std::unique(fixed_values.begin(), fixed_values.end()), fixed_values.end());
        for (const SweepSummary& s : summaries) {
            const double fixed = vs_snr ? static_cast<double>(s.snapshots) : s.snr_db;
            auto& entry = series[{s.method, fixed}];
            if (entry.label.empty()) {
                entry.label = s.method;
                if (fixed_values.size() > 1) {
                    char suffix[48];
                    std::snprintf(suffix, sizeof(suffix), vs_snr ? " L=%g" : " SNR=%g", fixed);
                    entry.label += suffix;
                }
            }
            entry.points.push_back({vs_snr ? s.snr_db : static_cast<double>(s.snapshots),
                                    rmspe_axis ? s.rmspe_median : s.sn_accuracy});
        }
        std::vector<PlotSeries> out;
        for (auto& [key, ps] : series) {
            std::sort(ps.points.begin(), ps.points.end());
            out.push_back(std::move(ps));
        }
        return out;
    };

    PlotSpec spec;
    spec.title = "Median RMSPE vs SNR";
    spec.x_label = "SNR (dB)";
    spec.y_label = "RMSPE (rad)";
    spec.log_y = true;
    spec.series = build(true, true);
    write_svg_plot(spec, out_dir + "/rmspe_vs_snr.svg");

    spec = PlotSpec{};
    spec.title = "Source-count accuracy vs SNR";
    spec.x_label = "SNR (dB)";
    spec.y_label = "accuracy";
    spec.series = build(true, false);
    write_svg_plot(spec, out_dir + "/accuracy_vs_snr.svg");

    spec = PlotSpec{};
    spec.title = "Median RMSPE vs snapshot count";
    spec.x_label = "snapshots";
    spec.y_label = "RMSPE (rad)";
    spec.log_y = true;
    spec.series = build(false, true);
    write_svg_plot(spec, out_dir + "/rmspe_vs_l.svg");

    spec = PlotSpec{};
    spec.title = "Source-count accuracy vs snapshot count";
    spec.x_label = "snapshots";
    spec.y_label = "accuracy";
    spec.series = build(false, false);
    write_svg_plot(spec, out_dir + "/accuracy_vs_l.svg");
}

} // namespace transmusic
