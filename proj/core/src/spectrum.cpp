#include "transmusic/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "transmusic/errors.hpp"

namespace transmusic {

std::vector<double> make_angle_grid(std::size_t size) {
    if (size < 2) throw ConfigError("angle grid needs at least 2 points");
    std::vector<double> grid(size);
    const double half = std::numbers::pi / 2.0;
    const double step = std::numbers::pi / static_cast<double>(size - 1);
    for (std::size_t i = 0; i < size; ++i) grid[i] = -half + step * static_cast<double>(i);
    grid.front() = -half;
    grid.back() = half;
    return grid;
}

ComplexMatrix steering_table(const std::vector<double>& grid, const ArrayGeometry& geometry) {
    geometry.validate();
    const std::size_t m = geometry.size();
    ComplexMatrix table(grid.size(), m);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double s = std::sin(grid[g]);
        for (std::size_t i = 0; i < m; ++i) {
            const double phase = std::numbers::pi * static_cast<double>(geometry.positions[i]) * s;
            table(g, i) = cdouble(std::cos(phase), std::sin(phase));
        }
    }
    return table;
}

SpectrumOnGrid music_spectrum(const ComplexMatrix& noise_subspace, const ArrayGeometry& geometry,
                              std::size_t grid_size) {
    geometry.validate();
    const std::size_t m = geometry.size();
    if (noise_subspace.rows() != m)
        throw ConfigError("noise subspace row count does not match the array");
    if (noise_subspace.cols() < 1 || noise_subspace.cols() > m)
        throw ConfigError("noise subspace must have between 1 and M columns");
    if (!noise_subspace.all_finite()) throw NumericError("noise subspace has non-finite entries");

    SpectrumOnGrid out;
    out.angles = make_angle_grid(grid_size);
    out.values.resize(grid_size);
    const std::size_t cols = noise_subspace.cols();
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double s = std::sin(out.angles[g]);
        // denom = sum_k |En(:,k)^H a|^2
        double denom = 0.0;
        for (std::size_t k = 0; k < cols; ++k) {
            double re = 0.0, im = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const double phase = std::numbers::pi * static_cast<double>(geometry.positions[i]) * s;
                const cdouble a(std::cos(phase), std::sin(phase));
                const cdouble t = std::conj(noise_subspace(i, k)) * a;
                re += t.real();
                im += t.imag();
            }
            denom += re * re + im * im;
        }
        out.values[g] = 1.0 / (denom + kSpectrumFloor);
    }
    return out;
}

std::vector<std::size_t> strict_local_maxima(const std::vector<double>& values) {
    std::vector<std::size_t> peaks;
    for (std::size_t i = 1; i + 1 < values.size(); ++i) {
        if (values[i] > values[i - 1] && values[i] > values[i + 1]) peaks.push_back(i);
    }
    return peaks;
}

std::vector<double> find_peaks(const SpectrumOnGrid& spectrum, std::size_t count) {
    if (spectrum.angles.size() != spectrum.values.size())
        throw ConfigError("spectrum angle/value length mismatch");
    if (count == 0) throw ConfigError("peak count must be positive");
    if (spectrum.values.size() < count) throw ConfigError("spectrum smaller than requested peak count");
    for (double v : spectrum.values)
        if (!std::isfinite(v)) throw NumericError("spectrum has non-finite values");

    auto by_value_then_index = [&](std::size_t a, std::size_t b) {
        if (spectrum.values[a] != spectrum.values[b]) return spectrum.values[a] > spectrum.values[b];
        return a < b;
    };

    std::vector<std::size_t> peaks = strict_local_maxima(spectrum.values);
    std::sort(peaks.begin(), peaks.end(), by_value_then_index);
    if (peaks.size() > count) peaks.resize(count);

    if (peaks.size() < count) {
        // Pad from the globally strongest grid points not already chosen.
        std::vector<std::size_t> order(spectrum.values.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), by_value_then_index);
        std::vector<char> used(spectrum.values.size(), 0);
        for (std::size_t p : peaks) used[p] = 1;
        for (std::size_t idx : order) {
            if (peaks.size() == count) break;
            if (!used[idx]) {
                used[idx] = 1;
                peaks.push_back(idx);
            }
        }
    }

    std::vector<double> angles(peaks.size());
    for (std::size_t i = 0; i < peaks.size(); ++i) angles[i] = spectrum.angles[peaks[i]];
    std::sort(angles.begin(), angles.end());
    return angles;
}

} // namespace transmusic
