// Shared helpers for the test binaries: independent oracles, finite
// differences, temp dirs, and file hashing.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>
#include <vector>

#include "transmusic/complex_matrix.hpp"
#include "transmusic/rng.hpp"

namespace test_support {

inline transmusic::ComplexMatrix random_hermitian(std::size_t m, std::uint64_t seed) {
    transmusic::SplitMix64 rng(seed);
    transmusic::ComplexMatrix h(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            if (i == j) {
                h(i, j) = transmusic::cdouble(2.0 * rng.uniform() - 1.0, 0.0);
            } else {
                const transmusic::cdouble z = transmusic::complex_gaussian(rng, 1.0);
                h(i, j) = z;
                h(j, i) = std::conj(z);
            }
        }
    }
    return h;
}

// Central finite difference of a scalar-valued function at x.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

// Relative error with an absolute floor so near-zero gradients compare sanely.
inline double max_relative_error(const std::vector<double>& analytic,
                                 const std::vector<double>& numeric) {
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
    return worst;
}

inline std::string read_file_bytes(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) return {};
    std::string out;
    char buf[8192];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
    std::fclose(f);
    return out;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_file(const std::string& path) { return fnv1a(read_file_bytes(path)); }

// Fresh directory under the system temp root, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = (std::filesystem::temp_directory_path() /
                 (tag + "." + std::to_string(::getpid()) + "." + std::to_string(counter_++)))
                    .string();
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::string& path() const { return path_; }
    std::string file(const std::string& name) const {
        return (std::filesystem::path(path_) / name).string();
    }

private:
    static inline int counter_ = 0;
    std::string path_;
};

} // namespace test_support
