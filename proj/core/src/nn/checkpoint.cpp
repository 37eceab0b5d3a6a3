#include "transmusic/nn/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "transmusic/errors.hpp"

namespace transmusic::nn {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ofstream& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.write(bytes, sizeof(T));
}

template <typename T>
T take(std::ifstream& in) {
    char bytes[sizeof(T)];
    if (!in.read(bytes, sizeof(T))) throw IoError("checkpoint: truncated file");
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

void write_section(std::ofstream& out, const ParamStore& store,
                   const std::vector<double> ParamStore::Entry::* field) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(store.entries().size()));
    for (const auto& [name, e] : store.entries()) {
        if (name.size() > std::numeric_limits<std::uint16_t>::max())
            throw ConfigError("checkpoint: parameter name too long");
        put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint8_t>(out, static_cast<std::uint8_t>(e.shape.size()));
        for (std::size_t d : e.shape) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        for (double v : e.*field) put<double>(out, v);
    }
}

struct SectionEntry {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

std::vector<SectionEntry> read_section(std::ifstream& in) {
    const std::uint32_t count = take<std::uint32_t>(in);
    std::vector<SectionEntry> entries(count);
    for (auto& e : entries) {
        const std::uint16_t name_len = take<std::uint16_t>(in);
        e.name.resize(name_len);
        if (!in.read(e.name.data(), name_len)) throw IoError("checkpoint: truncated name");
        const std::uint8_t rank = take<std::uint8_t>(in);
        if (rank == 0 || rank > 2) throw IoError("checkpoint: unsupported tensor rank");
        std::size_t total = 1;
        e.shape.resize(rank);
        for (auto& d : e.shape) {
            d = take<std::uint32_t>(in);
            if (d == 0) throw IoError("checkpoint: zero dimension");
            total *= d;
        }
        e.values.resize(total);
        for (double& v : e.values) {
            v = take<double>(in);
            if (!std::isfinite(v)) throw NumericError("checkpoint: non-finite value in " + e.name);
        }
    }
    return entries;
}

} // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, bool include_optimizer) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open for writing: " + path);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kFormatVersion);
    write_section(out, store, &ParamStore::Entry::value);
    put<std::uint8_t>(out, include_optimizer ? 1 : 0);
    if (include_optimizer) {
        put<std::uint64_t>(out, store.step());
        write_section(out, store, &ParamStore::Entry::moment1);
        write_section(out, store, &ParamStore::Entry::moment2);
    }
    out.flush();
    if (!out) throw IoError("checkpoint: write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open: " + path);
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic");
    const std::uint32_t version = take<std::uint32_t>(in);
    if (version != kFormatVersion) throw IoError("checkpoint: unsupported version");

    LoadedCheckpoint result;
    for (auto& e : read_section(in))
        result.store.add(e.name, std::move(e.shape), std::move(e.values));

    const std::uint8_t flag = take<std::uint8_t>(in);
    if (flag > 1) throw IoError("checkpoint: bad optimizer flag");
    if (flag == 1) {
        result.has_optimizer = true;
        result.store.set_step(take<std::uint64_t>(in));
        for (auto field : {&ParamStore::Entry::moment1, &ParamStore::Entry::moment2}) {
            for (auto& e : read_section(in)) {
                ParamStore::Entry& target = result.store.at(e.name);
                if (target.shape != e.shape)
                    throw IoError("checkpoint: moment shape mismatch for " + e.name);
                target.*field = std::move(e.values);
            }
        }
    }
    // A stray trailing byte means the writer and reader disagree on layout.
    in.peek();
    if (!in.eof()) throw IoError("checkpoint: trailing bytes");
    return result;
}

} // namespace transmusic::nn
