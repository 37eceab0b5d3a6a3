#pragma once

#include <cstddef>
#include <vector>

#include "transmusic/array_sim.hpp"
#include "transmusic/complex_matrix.hpp"
#include "transmusic/spectrum.hpp"

namespace transmusic {

inline constexpr std::size_t kClassicalGridSize = 3601;

// Relative gap that closes the noise eigenvalue cluster.
inline constexpr double kEigenClusterTolerance = 0.2;

// Fraction of the spectrum maximum a beamformer peak must reach to count.
inline constexpr double kBeamformerDominance = 0.5;

// Subspace method driven by an externally supplied covariance.
std::vector<double> music_from_covariance(const ComplexMatrix& covariance, std::size_t num_sources,
                                          const ArrayGeometry& geometry, std::size_t grid_size);

// Covariance from the snapshots, then the subspace search. Works on
// quantized input too (it just inherits the quantization bias).
std::vector<double> music_estimate(const SnapshotMatrix& snapshots, std::size_t num_sources,
                                   const ArrayGeometry& geometry, std::size_t grid_size);

// Reconstructs the normalized covariance of the unquantized signal from the
// covariance of one-bit samples: diagonal pinned to 1, off-diagonal entries
// (2/pi)(asin(Re) + j asin(Im)) applied componentwise.
ComplexMatrix arcsine_covariance(const ComplexMatrix& one_bit_covariance);

// One-bit pipeline: sample covariance -> arcsine reconstruction -> subspace
// search. Rejects snapshots that are not tagged as one-bit.
std::vector<double> one_bit_music_estimate(const SnapshotMatrix& snapshots, std::size_t num_sources,
                                           const ArrayGeometry& geometry, std::size_t grid_size);

struct BeamformerResult {
    std::vector<double> angles;     // ascending, one per dominant peak
    std::size_t estimated_sources;  // = angles.size(), capped at M-1
    SpectrumOnGrid spectrum;
};

// Conventional beamformer scan P(psi) = a^H R a / M. Sources are the strict
// local maxima reaching `dominance` times the spectrum maximum.
BeamformerResult beamformer_estimate(const SnapshotMatrix& snapshots, const ArrayGeometry& geometry,
                                     std::size_t grid_size, double dominance = kBeamformerDominance);

// Source count from the eigenvalue profile: noise cluster is every value
// within (1 + tolerance) of the smallest, sources are the rest.
std::size_t estimate_source_count_eigen(const std::vector<double>& eigenvalues_descending,
                                        double tolerance = kEigenClusterTolerance);

} // namespace transmusic
