#pragma once

#include <vector>

#include "transmusic/array_sim.hpp"
#include "transmusic/complex_matrix.hpp"

namespace transmusic {

struct SpectrumOnGrid {
    std::vector<double> angles; // strictly increasing
    std::vector<double> values; // finite, >= 0
};

// Uniformly spaced grid over [-pi/2, pi/2], endpoints included.
// 3601 points give exactly 0.05 degree spacing.
std::vector<double> make_angle_grid(std::size_t size);

// One steering vector per grid angle, as rows (G x M).
ComplexMatrix steering_table(const std::vector<double>& grid, const ArrayGeometry& geometry);

inline constexpr double kSpectrumFloor = 1e-12;

// P(psi) = 1 / (a^H(psi) En En^H a(psi) + floor). Works for the exact
// M x (M-K) subspace and the augmented M x M form alike.
SpectrumOnGrid music_spectrum(const ComplexMatrix& noise_subspace, const ArrayGeometry& geometry,
                              std::size_t grid_size);

// Indexes of interior points strictly exceeding both neighbours.
std::vector<std::size_t> strict_local_maxima(const std::vector<double>& values);

// The `count` strongest strict local maxima; when the spectrum has fewer,
// pads with the strongest unused grid points. Ascending angles; value ties
// break toward the smaller grid index.
std::vector<double> find_peaks(const SpectrumOnGrid& spectrum, std::size_t count);

} // namespace transmusic
