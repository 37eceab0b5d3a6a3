#include "transmusic/array_sim.hpp"

#include <cmath>

#include "transmusic/errors.hpp"

namespace transmusic {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kHalfPi = kPi / 2.0;
constexpr double kInvSqrt2 = 0.70710678118654752440;
} // namespace

ArrayGeometry ArrayGeometry::ula(std::size_t num_antennas) {
    ArrayGeometry g;
    g.positions.resize(num_antennas);
    for (std::size_t m = 0; m < num_antennas; ++m) g.positions[m] = static_cast<int>(m);
    g.validate();
    return g;
}

void ArrayGeometry::validate() const {
    if (positions.size() < 2) throw ConfigError("geometry: need at least two antennas");
    for (std::size_t m = 1; m < positions.size(); ++m)
        if (positions[m] <= positions[m - 1])
            throw ConfigError("geometry: positions must be strictly increasing");
}

double Scenario::noise_variance() const {
    return std::pow(10.0, -snr_db / 10.0);
}

void Scenario::validate(std::size_t num_antennas) const {
    if (thetas.empty()) throw ConfigError("scenario: need at least one source");
    if (thetas.size() >= num_antennas)
        throw ConfigError("scenario: source count must be below the antenna count");
    if (num_snapshots == 0) throw ConfigError("scenario: need at least one snapshot");
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        if (!(thetas[k] > -kHalfPi && thetas[k] < kHalfPi))
            throw ConfigError("scenario: angles must lie strictly inside (-pi/2, pi/2)");
        if (k > 0 && thetas[k] <= thetas[k - 1])
            throw ConfigError("scenario: angles must be distinct and ascending");
    }
}

std::vector<cdouble> steering_vector(double theta, const ArrayGeometry& geometry) {
    if (!(theta >= -kHalfPi && theta <= kHalfPi))
        throw ConfigError("steering_vector: angle outside [-pi/2, pi/2]");
    std::vector<cdouble> a(geometry.size());
    const double spatial = kPi * std::sin(theta);
    for (std::size_t m = 0; m < a.size(); ++m) {
        const double phase = spatial * geometry.positions[m];
        a[m] = cdouble{std::cos(phase), std::sin(phase)};
    }
    return a;
}

ComplexMatrix steering_matrix(const std::vector<double>& thetas, const ArrayGeometry& geometry) {
    ComplexMatrix a(geometry.size(), thetas.size());
    for (std::size_t k = 0; k < thetas.size(); ++k) {
        const std::vector<cdouble> col = steering_vector(thetas[k], geometry);
        for (std::size_t m = 0; m < geometry.size(); ++m) a(m, k) = col[m];
    }
    return a;
}

SnapshotMatrix synthesize_snapshots(const std::vector<double>& thetas, const ArrayGeometry& geometry,
                                    const ComplexMatrix& sources, const ComplexMatrix& noise) {
    if (sources.rows() != thetas.size())
        throw ConfigError("synthesize_snapshots: source rows must match angle count");
    if (noise.rows() != geometry.size() || noise.cols() != sources.cols())
        throw ConfigError("synthesize_snapshots: noise shape mismatch");
    const ComplexMatrix a = steering_matrix(thetas, geometry);
    SnapshotMatrix out;
    out.samples = a * sources + noise;
    out.quant = Quantization::Unquantized;
    return out;
}

SnapshotMatrix generate_snapshots(const Scenario& scenario, const ArrayGeometry& geometry,
                                  std::uint64_t seed) {
    scenario.validate(geometry.size());
    const std::size_t k = scenario.num_sources();
    const std::size_t m = geometry.size();
    const std::size_t l = scenario.num_snapshots;
    const double sigma2 = scenario.noise_variance();

    SplitMix64 rng(seed);
    ComplexMatrix sources(k, l);
    for (std::size_t t = 0; t < l; ++t)
        for (std::size_t i = 0; i < k; ++i) sources(i, t) = complex_gaussian(rng, 1.0);
    ComplexMatrix noise(m, l);
    if (sigma2 > 0.0) {
        for (std::size_t t = 0; t < l; ++t)
            for (std::size_t i = 0; i < m; ++i) noise(i, t) = complex_gaussian(rng, sigma2);
    }
    return synthesize_snapshots(scenario.thetas, geometry, sources, noise);
}

SnapshotMatrix quantize_one_bit(const SnapshotMatrix& y) {
    if (!y.samples.all_finite()) throw NumericError("quantize_one_bit: non-finite sample");
    SnapshotMatrix z;
    z.samples = ComplexMatrix(y.samples.rows(), y.samples.cols());
    for (std::size_t i = 0; i < y.samples.rows(); ++i) {
        for (std::size_t j = 0; j < y.samples.cols(); ++j) {
            const cdouble v = y.samples(i, j);
            z.samples(i, j) = cdouble{v.real() >= 0.0 ? kInvSqrt2 : -kInvSqrt2,
                                      v.imag() >= 0.0 ? kInvSqrt2 : -kInvSqrt2};
        }
    }
    z.quant = Quantization::OneBit;
    return z;
}

} // namespace transmusic
