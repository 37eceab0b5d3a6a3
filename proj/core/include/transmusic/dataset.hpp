#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "transmusic/array_sim.hpp"

namespace transmusic {

// Generation config; also serialized verbatim into the manifest sidecar.
struct DatasetGenConfig {
    std::uint64_t count = 0;
    std::uint32_t num_antennas = 8;
    std::uint32_t num_snapshots = 200;
    std::vector<double> snr_db_set = {0.0, 5.0, 10.0};
    std::uint32_t k_min = 2;
    std::uint32_t k_max = 5;
    std::uint64_t base_seed = 0;
    bool separation_guard = true;       // reject draws with DOAs closer than the minimum
    double min_separation_rad = 0.1;

    void validate() const;

    std::string to_json() const;
    static DatasetGenConfig from_json(const std::string& text);
    static DatasetGenConfig from_json_file(const std::string& path);
};

struct DatasetRecord {
    Scenario scenario;
    SnapshotMatrix snapshots; // unquantized
    std::uint64_t seed = 0;
};

// K angles i.i.d. uniform over (-pi/2, pi/2), redrawn until sorted adjacent
// separations satisfy the guard (or are merely distinct when disabled).
std::vector<double> sample_angles(SplitMix64& rng, std::size_t k, bool guard,
                                  double min_separation_rad);

// Deterministically regenerates record `index`: K uniform over the configured
// range, angles i.i.d. uniform with the separation guard, SNR uniform over the
// set, snapshots from a derived seed. Everything flows from
// split_seed(base_seed, index), which is what the file stores per record.
DatasetRecord make_record(const DatasetGenConfig& config, std::uint64_t index);

// Binary little-endian file (magic "TMDS") plus a <path>.manifest.json sidecar
// holding the generation config.
void write_dataset(const DatasetGenConfig& config, const std::string& path);

std::string manifest_path_for(const std::string& dataset_path);

class DatasetReader {
public:
    explicit DatasetReader(const std::string& path);
    ~DatasetReader();
    DatasetReader(DatasetReader&&) noexcept;
    DatasetReader& operator=(DatasetReader&&) noexcept;

    std::uint64_t size() const;
    std::uint64_t base_seed() const;

    // Thread-safe; sample values are the stored f32 pairs widened to double.
    DatasetRecord read(std::uint64_t index) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace transmusic
