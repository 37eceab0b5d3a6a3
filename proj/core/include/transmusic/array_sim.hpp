#pragma once

#include <cstdint>
#include <vector>

#include "transmusic/complex_matrix.hpp"
#include "transmusic/rng.hpp"

namespace transmusic {

// Antenna positions in half-wavelength units; element spacing d = lambda/2.
struct ArrayGeometry {
    std::vector<int> positions; // strictly increasing integers

    static ArrayGeometry ula(std::size_t num_antennas); // r_m = m - 1

    std::size_t size() const { return positions.size(); }
    void validate() const;
};

// Ground truth for one simulation instance.
struct Scenario {
    std::vector<double> thetas; // radians, ascending, each in (-pi/2, pi/2)
    double snr_db = 0.0;
    std::size_t num_snapshots = 0;

    std::size_t num_sources() const { return thetas.size(); }

    // Per-source power is 1, so SNR = 10*log10(1/sigma^2). +inf means noiseless.
    double noise_variance() const;

    void validate(std::size_t num_antennas) const;
};

enum class Quantization : std::uint8_t { Unquantized = 0, OneBit = 1 };

// M x L received (or quantized) samples; columns are snapshots.
struct SnapshotMatrix {
    ComplexMatrix samples;
    Quantization quant = Quantization::Unquantized;

    std::size_t num_antennas() const { return samples.rows(); }
    std::size_t num_snapshots() const { return samples.cols(); }
};

// a(theta): element m equals exp(j*pi*r_m*sin(theta)). theta in [-pi/2, pi/2].
std::vector<cdouble> steering_vector(double theta, const ArrayGeometry& geometry);

// Columns a(theta_1) ... a(theta_K).
ComplexMatrix steering_matrix(const std::vector<double>& thetas, const ArrayGeometry& geometry);

// Y = A(theta) X + N with caller-supplied source and noise matrices. This is
// the deterministic core of the generator; tests drive it directly.
SnapshotMatrix synthesize_snapshots(const std::vector<double>& thetas, const ArrayGeometry& geometry,
                                    const ComplexMatrix& sources, const ComplexMatrix& noise);

// Draws X with CN(0,1) entries and N with CN(0, sigma^2) entries from the
// seed, then forms Y = A X + N. Deterministic given the seed.
SnapshotMatrix generate_snapshots(const Scenario& scenario, const ArrayGeometry& geometry,
                                  std::uint64_t seed);

// Entrywise (sign(Re) + j*sign(Im))/sqrt(2), sign(0) = +1.
SnapshotMatrix quantize_one_bit(const SnapshotMatrix& y);

} // namespace transmusic
