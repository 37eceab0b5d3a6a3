#include "transmusic/hermitian_eig.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "transmusic/errors.hpp"

namespace transmusic {

namespace {

double off_diagonal_norm(const ComplexMatrix& a) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j) sum += std::norm(a(i, j));
    return std::sqrt(sum);
}

} // namespace

EigenDecomposition hermitian_evd(const ComplexMatrix& hermitian) {
    if (hermitian.rows() != hermitian.cols())
        throw ConfigError("hermitian_evd: matrix must be square");
    if (!hermitian.all_finite())
        throw NumericError("hermitian_evd: non-finite entries");

    const std::size_t n = hermitian.rows();
    const double input_norm = hermitian.frobenius_norm();
    if (hermitian.hermitian_asymmetry() > 1e-10 * (1.0 + input_norm))
        throw ConfigError("hermitian_evd: matrix is not Hermitian within tolerance");

    // Work on the symmetrized copy; diagonal forced real.
    ComplexMatrix a(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        a(i, i) = cdouble{hermitian(i, i).real(), 0.0};
        for (std::size_t j = i + 1; j < n; ++j) {
            const cdouble v = 0.5 * (hermitian(i, j) + std::conj(hermitian(j, i)));
            a(i, j) = v;
            a(j, i) = std::conj(v);
        }
    }

    ComplexMatrix v = ComplexMatrix::identity(n);
    const double threshold = 1e-12 * input_norm;

    constexpr int kMaxSweeps = 100;
    bool converged = input_norm == 0.0 || n == 1;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cdouble apq = a(p, q);
                const double mag = std::abs(apq);
                if (mag == 0.0) continue;

                // 2x2 rotation annihilating (p,q): tan(2*theta) derived from
                // the real Jacobi formulas after factoring out the phase.
                const cdouble phase = apq / mag;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (app - aqq) / (2.0 * mag);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                const cdouble s_phase = s * phase;
                const cdouble s_phase_conj = s * std::conj(phase);

                // rows p and q: A <- R^H A
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble rp = a(p, k);
                    const cdouble rq = a(q, k);
                    a(p, k) = c * rp + s_phase * rq;
                    a(q, k) = -s_phase_conj * rp + c * rq;
                }
                // columns p and q: A <- A R
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble cp = a(k, p);
                    const cdouble cq = a(k, q);
                    a(k, p) = c * cp + s_phase_conj * cq;
                    a(k, q) = -s_phase * cp + c * cq;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = cdouble{a(p, p).real(), 0.0};
                a(q, q) = cdouble{a(q, q).real(), 0.0};

                // accumulate V <- V R
                for (std::size_t k = 0; k < n; ++k) {
                    const cdouble vp = v(k, p);
                    const cdouble vq = v(k, q);
                    v(k, p) = c * vp + s_phase_conj * vq;
                    v(k, q) = -s_phase * vp + c * vq;
                }
            }
        }
        converged = off_diagonal_norm(a) <= threshold;
    }
    if (!converged)
        throw NumericError("hermitian_evd: Jacobi iteration failed to converge in 100 sweeps");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = ComplexMatrix(n, n);
    for (std::size_t col = 0; col < n; ++col) {
        const std::size_t src = order[col];
        out.eigenvalues[col] = a(src, src).real();

        // phase fix: largest-magnitude entry (first on ties) made real-positive
        std::size_t peak = 0;
        double peak_mag = 0.0;
        for (std::size_t row = 0; row < n; ++row) {
            const double m = std::abs(v(row, src));
            if (m > peak_mag) {
                peak_mag = m;
                peak = row;
            }
        }
        cdouble rotate{1.0, 0.0};
        if (peak_mag > 0.0) rotate = std::conj(v(peak, src)) / peak_mag;
        for (std::size_t row = 0; row < n; ++row) out.eigenvectors(row, col) = rotate * v(row, src);
    }
    return out;
}

ComplexMatrix noise_subspace(const EigenDecomposition& eig, std::size_t num_sources) {
    const std::size_t n = eig.eigenvectors.rows();
    if (num_sources >= n)
        throw ConfigError("noise_subspace: source count must be below matrix dimension");
    ComplexMatrix en(n, n - num_sources);
    for (std::size_t col = num_sources; col < n; ++col)
        for (std::size_t row = 0; row < n; ++row)
            en(row, col - num_sources) = eig.eigenvectors(row, col);
    return en;
}

} // namespace transmusic
