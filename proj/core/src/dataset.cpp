#include "transmusic/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <mutex>

#include <json.hpp>

#include "transmusic/errors.hpp"

namespace transmusic {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'D', 'S'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr double kHalfPi = 1.57079632679489661923;

// Raw little-endian scalar I/O; non-LE hosts are not supported.
template <typename T>
void put(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw IoError("dataset: truncated file");
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

} // namespace

std::vector<double> sample_angles(SplitMix64& rng, std::size_t k, bool guard,
                                  double min_separation_rad) {
    std::vector<double> thetas(k);
    for (int attempt = 0; attempt < 100000; ++attempt) {
        for (std::size_t i = 0; i < k; ++i) thetas[i] = rng.uniform_range(-kHalfPi, kHalfPi);
        std::sort(thetas.begin(), thetas.end());
        bool ok = true;
        for (std::size_t i = 1; i < k; ++i) {
            const double sep = thetas[i] - thetas[i - 1];
            if (guard ? sep < min_separation_rad : sep <= 0.0) {
                ok = false;
                break;
            }
        }
        if (ok) return thetas;
    }
    throw ConfigError("dataset: could not satisfy the angular separation guard");
}

void DatasetGenConfig::validate() const {
    if (num_antennas < 2) throw ConfigError("dataset config: need at least two antennas");
    if (num_snapshots == 0) throw ConfigError("dataset config: need at least one snapshot");
    if (snr_db_set.empty()) throw ConfigError("dataset config: SNR set is empty");
    if (k_min < 1 || k_min > k_max) throw ConfigError("dataset config: invalid source-count range");
    if (k_max > num_antennas - 1)
        throw ConfigError("dataset config: source-count range exceeds M-1");
    if (separation_guard && min_separation_rad < 0.0)
        throw ConfigError("dataset config: negative minimum separation");
}

std::string DatasetGenConfig::to_json() const {
    nlohmann::json j;
    j["count"] = count;
    j["num_antennas"] = num_antennas;
    j["num_snapshots"] = num_snapshots;
    j["snr_db_set"] = snr_db_set;
    j["k_min"] = k_min;
    j["k_max"] = k_max;
    j["base_seed"] = base_seed;
    j["separation_guard"] = separation_guard;
    j["min_separation_rad"] = min_separation_rad;
    return j.dump(2);
}

DatasetGenConfig DatasetGenConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset config: bad JSON: ") + e.what());
    }
    DatasetGenConfig c;
    try {
        c.count = j.at("count").get<std::uint64_t>();
        c.num_antennas = j.at("num_antennas").get<std::uint32_t>();
        c.num_snapshots = j.at("num_snapshots").get<std::uint32_t>();
        c.snr_db_set = j.at("snr_db_set").get<std::vector<double>>();
        c.k_min = j.at("k_min").get<std::uint32_t>();
        c.k_max = j.at("k_max").get<std::uint32_t>();
        c.base_seed = j.at("base_seed").get<std::uint64_t>();
        c.separation_guard = j.value("separation_guard", true);
        c.min_separation_rad = j.value("min_separation_rad", 0.1);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset config: missing or mistyped field: ") + e.what());
    }
    c.validate();
    return c;
}

DatasetGenConfig DatasetGenConfig::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("dataset config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return from_json(text);
}

DatasetRecord make_record(const DatasetGenConfig& config, std::uint64_t index) {
    config.validate();
    DatasetRecord rec;
    rec.seed = split_seed(config.base_seed, index);

    SplitMix64 rng(rec.seed);
    const std::size_t k = config.k_min + rng.below(config.k_max - config.k_min + 1);
    const double snr = config.snr_db_set[rng.below(config.snr_db_set.size())];
    rec.scenario.thetas =
        sample_angles(rng, k, config.separation_guard, config.min_separation_rad);
    rec.scenario.snr_db = snr;
    rec.scenario.num_snapshots = config.num_snapshots;

    const std::uint64_t snapshot_seed = rng.next();
    rec.snapshots = generate_snapshots(rec.scenario, ArrayGeometry::ula(config.num_antennas),
                                       snapshot_seed);
    return rec;
}

std::string manifest_path_for(const std::string& dataset_path) {
    return dataset_path + ".manifest.json";
}

namespace {

void append_record(std::string& out, const DatasetRecord& rec, std::uint32_t m, std::uint32_t l) {
    put<std::uint32_t>(out, m);
    put<std::uint32_t>(out, l);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(rec.scenario.num_sources()));
    put<double>(out, rec.scenario.snr_db);
    for (double theta : rec.scenario.thetas) put<double>(out, theta);
    put<std::uint64_t>(out, rec.seed);
    // interleaved (re, im) f32 pairs, snapshot-major
    for (std::uint32_t t = 0; t < l; ++t) {
        for (std::uint32_t i = 0; i < m; ++i) {
            const cdouble v = rec.snapshots.samples(i, t);
            put<float>(out, static_cast<float>(v.real()));
            put<float>(out, static_cast<float>(v.imag()));
        }
    }
}

} // namespace

void write_dataset(const DatasetGenConfig& config, const std::string& path) {
    config.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("dataset: cannot open " + path + " for writing");

    std::string buffer;
    buffer.append(kMagic, 4);
    put<std::uint32_t>(buffer, kFormatVersion);
    put<std::uint64_t>(buffer, config.count);
    put<std::uint64_t>(buffer, config.base_seed);
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));

    for (std::uint64_t d = 0; d < config.count; ++d) {
        buffer.clear();
        const DatasetRecord rec = make_record(config, d);
        append_record(buffer, rec, config.num_antennas, config.num_snapshots);
        out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    }
    if (!out) throw IoError("dataset: write failed for " + path);
    out.close();

    std::ofstream manifest(manifest_path_for(path), std::ios::trunc);
    if (!manifest) throw IoError("dataset: cannot write manifest for " + path);
    manifest << config.to_json() << "\n";
    if (!manifest) throw IoError("dataset: manifest write failed for " + path);
}

struct DatasetReader::Impl {
    mutable std::ifstream in;
    mutable std::mutex mutex;
    std::uint64_t count = 0;
    std::uint64_t base_seed = 0;
    std::vector<std::uint64_t> offsets;
};

DatasetReader::DatasetReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
    impl_->in.open(path, std::ios::binary);
    if (!impl_->in) throw IoError("dataset: cannot open " + path);

    char magic[4];
    if (!impl_->in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("dataset: bad magic in " + path);
    const std::uint32_t version = take<std::uint32_t>(impl_->in);
    if (version != kFormatVersion) throw IoError("dataset: unsupported format version");
    impl_->count = take<std::uint64_t>(impl_->in);
    impl_->base_seed = take<std::uint64_t>(impl_->in);

    impl_->offsets.reserve(impl_->count);
    std::uint64_t pos = 4 + 4 + 8 + 8;
    for (std::uint64_t d = 0; d < impl_->count; ++d) {
        impl_->offsets.push_back(pos);
        impl_->in.seekg(static_cast<std::streamoff>(pos));
        const std::uint32_t m = take<std::uint32_t>(impl_->in);
        const std::uint32_t l = take<std::uint32_t>(impl_->in);
        const std::uint32_t k = take<std::uint32_t>(impl_->in);
        pos += 12u + 8u + 8ull * k + 8u + 8ull * m * l;
    }
    impl_->in.seekg(static_cast<std::streamoff>(pos));
    impl_->in.peek();
    if (!impl_->in.eof()) throw IoError("dataset: trailing bytes in " + path);
    impl_->in.clear();
}

DatasetReader::~DatasetReader() = default;
DatasetReader::DatasetReader(DatasetReader&&) noexcept = default;
DatasetReader& DatasetReader::operator=(DatasetReader&&) noexcept = default;

std::uint64_t DatasetReader::size() const { return impl_->count; }
std::uint64_t DatasetReader::base_seed() const { return impl_->base_seed; }

DatasetRecord DatasetReader::read(std::uint64_t index) const {
    if (index >= impl_->count) throw ConfigError("dataset: record index out of range");
    std::lock_guard<std::mutex> lock(impl_->mutex);
    impl_->in.seekg(static_cast<std::streamoff>(impl_->offsets[index]));

    DatasetRecord rec;
    const std::uint32_t m = take<std::uint32_t>(impl_->in);
    const std::uint32_t l = take<std::uint32_t>(impl_->in);
    const std::uint32_t k = take<std::uint32_t>(impl_->in);
    rec.scenario.snr_db = take<double>(impl_->in);
    rec.scenario.thetas.resize(k);
    for (std::uint32_t i = 0; i < k; ++i) rec.scenario.thetas[i] = take<double>(impl_->in);
    rec.scenario.num_snapshots = l;
    rec.seed = take<std::uint64_t>(impl_->in);

    rec.snapshots.samples = ComplexMatrix(m, l);
    rec.snapshots.quant = Quantization::Unquantized;
    std::vector<char> raw(8ull * m * l);
    if (!impl_->in.read(raw.data(), static_cast<std::streamsize>(raw.size())))
        throw IoError("dataset: truncated record");
    const char* p = raw.data();
    for (std::uint32_t t = 0; t < l; ++t) {
        for (std::uint32_t i = 0; i < m; ++i) {
            float re, im;
            std::memcpy(&re, p, 4);
            std::memcpy(&im, p + 4, 4);
            p += 8;
            rec.snapshots.samples(i, t) = cdouble{static_cast<double>(re), static_cast<double>(im)};
        }
    }
    return rec;
}

} // namespace transmusic
