#include "transmusic/classical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "transmusic/errors.hpp"
#include "transmusic/hermitian_eig.hpp"

namespace transmusic {

std::vector<double> music_from_covariance(const ComplexMatrix& covariance, std::size_t num_sources,
                                          const ArrayGeometry& geometry, std::size_t grid_size) {
    geometry.validate();
    if (covariance.rows() != geometry.size() || covariance.cols() != geometry.size())
        throw ConfigError("covariance size does not match the array");
    if (num_sources < 1 || num_sources >= geometry.size())
        throw ConfigError("source count must lie in [1, M-1]");
    const EigenDecomposition eig = hermitian_evd(covariance);
    const ComplexMatrix subspace = noise_subspace(eig, num_sources);
    const SpectrumOnGrid spec = music_spectrum(subspace, geometry, grid_size);
    return find_peaks(spec, num_sources);
}

std::vector<double> music_estimate(const SnapshotMatrix& snapshots, std::size_t num_sources,
                                   const ArrayGeometry& geometry, std::size_t grid_size) {
    return music_from_covariance(sample_covariance(snapshots.samples), num_sources, geometry, grid_size);
}

ComplexMatrix arcsine_covariance(const ComplexMatrix& one_bit_covariance) {
    const ComplexMatrix& rz = one_bit_covariance;
    if (rz.rows() != rz.cols()) throw ConfigError("covariance must be square");
    if (!rz.all_finite()) throw NumericError("covariance has non-finite entries");

    auto clamp_unit = [](double v) {
        if (std::abs(v) > 1.0 + 1e-6)
            throw NumericError("one-bit covariance entry magnitude exceeds 1");
        return std::clamp(v, -1.0, 1.0);
    };

    // Sign correlations relate to the underlying normalized covariance by the
    // arcsine law; inverting it componentwise reconstructs that covariance.
    const double half_pi = std::numbers::pi / 2.0;
    ComplexMatrix out(rz.rows(), rz.cols());
    for (std::size_t i = 0; i < rz.rows(); ++i) {
        for (std::size_t j = 0; j < rz.cols(); ++j) {
            if (i == j) {
                out(i, j) = cdouble(1.0, 0.0);
                continue;
            }
            const cdouble v = rz(i, j);
            out(i, j) = cdouble(std::sin(half_pi * clamp_unit(v.real())),
                                std::sin(half_pi * clamp_unit(v.imag())));
        }
    }
    // The componentwise map keeps Hermitian structure up to roundoff; restore it exactly.
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = i + 1; j < out.cols(); ++j) {
            const cdouble avg = 0.5 * (out(i, j) + std::conj(out(j, i)));
            out(i, j) = avg;
            out(j, i) = std::conj(avg);
        }
    }
    return out;
}

std::vector<double> one_bit_music_estimate(const SnapshotMatrix& snapshots, std::size_t num_sources,
                                           const ArrayGeometry& geometry, std::size_t grid_size) {
    if (snapshots.quant != Quantization::OneBit)
        throw ConfigError("one-bit pipeline requires one-bit snapshots");
    const ComplexMatrix rz = sample_covariance(snapshots.samples);
    const ComplexMatrix r = arcsine_covariance(rz);
    return music_from_covariance(r, num_sources, geometry, grid_size);
}

BeamformerResult beamformer_estimate(const SnapshotMatrix& snapshots, const ArrayGeometry& geometry,
                                     std::size_t grid_size, double dominance) {
    geometry.validate();
    if (dominance <= 0.0 || dominance > 1.0) throw ConfigError("dominance must lie in (0, 1]");
    const std::size_t m = geometry.size();
    const ComplexMatrix r = sample_covariance(snapshots.samples);

    BeamformerResult result;
    result.spectrum.angles = make_angle_grid(grid_size);
    result.spectrum.values.resize(grid_size);
    for (std::size_t g = 0; g < grid_size; ++g) {
        const double s = std::sin(result.spectrum.angles[g]);
        // a^H R a is real for Hermitian R; accumulate just the real part.
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double pi_ = std::numbers::pi;
            const double phi = pi_ * static_cast<double>(geometry.positions[i]) * s;
            const cdouble ai(std::cos(phi), std::sin(phi));
            cdouble row(0.0, 0.0);
            for (std::size_t j = 0; j < m; ++j) {
                const double phj = pi_ * static_cast<double>(geometry.positions[j]) * s;
                row += r(i, j) * cdouble(std::cos(phj), std::sin(phj));
            }
            acc += (std::conj(ai) * row).real();
        }
        result.spectrum.values[g] = std::max(acc, 0.0) / static_cast<double>(m);
    }

    const double top = *std::max_element(result.spectrum.values.begin(), result.spectrum.values.end());
    std::vector<std::size_t> peaks = strict_local_maxima(result.spectrum.values);
    peaks.erase(std::remove_if(peaks.begin(), peaks.end(),
                               [&](std::size_t i) { return result.spectrum.values[i] <= dominance * top; }),
                peaks.end());
    if (peaks.size() > m - 1) {
        std::sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) {
            if (result.spectrum.values[a] != result.spectrum.values[b])
                return result.spectrum.values[a] > result.spectrum.values[b];
            return a < b;
        });
        peaks.resize(m - 1);
    }
    result.angles.resize(peaks.size());
    for (std::size_t i = 0; i < peaks.size(); ++i) result.angles[i] = result.spectrum.angles[peaks[i]];
    std::sort(result.angles.begin(), result.angles.end());
    result.estimated_sources = result.angles.size();
    return result;
}

std::size_t estimate_source_count_eigen(const std::vector<double>& eigenvalues_descending,
                                        double tolerance) {
    const std::size_t m = eigenvalues_descending.size();
    if (m < 2) throw ConfigError("need at least 2 eigenvalues");
    if (tolerance < 0.0) throw ConfigError("tolerance must be non-negative");
    std::vector<double> ev = eigenvalues_descending;
    for (std::size_t i = 0; i + 1 < m; ++i)
        if (ev[i] < ev[i + 1]) throw ConfigError("eigenvalues must be sorted descending");
    for (double& v : ev) {
        if (!std::isfinite(v)) throw NumericError("non-finite eigenvalue");
        if (v < 0.0) v = 0.0; // tiny negatives are roundoff from the decomposition
    }
    const double floor_value = ev.back() * (1.0 + tolerance);
    std::size_t noise = 0;
    for (double v : ev)
        if (v <= floor_value) ++noise;
    const std::size_t k = m - noise;
    return std::min(k, m - 1);
}

} // namespace transmusic
