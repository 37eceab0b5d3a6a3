#include "transmusic/complex_matrix.hpp"

#include <cmath>

#include "transmusic/errors.hpp"

namespace transmusic {

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool ComplexMatrix::all_finite() const {
    for (const cdouble& z : data_) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
    }
    return true;
}

double ComplexMatrix::frobenius_norm() const {
    double sum = 0.0;
    for (const cdouble& z : data_) sum += std::norm(z);
    return std::sqrt(sum);
}

cdouble ComplexMatrix::trace() const {
    cdouble t = 0.0;
    const std::size_t n = rows_ < cols_ ? rows_ : cols_;
    for (std::size_t i = 0; i < n; ++i) t += (*this)(i, i);
    return t;
}

ComplexMatrix ComplexMatrix::conjugate_transpose() const {
    ComplexMatrix out(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) out(j, i) = std::conj((*this)(i, j));
    return out;
}

double ComplexMatrix::hermitian_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            const double d = std::abs((*this)(i, j) - std::conj((*this)(j, i)));
            if (d > worst) worst = d;
        }
    }
    return worst;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.cols() != b.rows()) throw ConfigError("matrix multiply: inner dimensions disagree");
    ComplexMatrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const cdouble aik = a(i, k);
            if (aik == cdouble{}) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("matrix add: shape mismatch");
    ComplexMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
    return c;
}

ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("matrix subtract: shape mismatch");
    ComplexMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
    return c;
}

ComplexMatrix operator*(cdouble s, const ComplexMatrix& a) {
    ComplexMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = s * a(i, j);
    return c;
}

ComplexMatrix sample_covariance(const ComplexMatrix& snapshots) {
    const std::size_t m = snapshots.rows();
    const std::size_t l = snapshots.cols();
    if (l == 0) throw ConfigError("sample_covariance: need at least one snapshot");
    ComplexMatrix c(m, m);
    const double inv_l = 1.0 / static_cast<double>(l);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            cdouble acc = 0.0;
            for (std::size_t t = 0; t < l; ++t) acc += snapshots(i, t) * std::conj(snapshots(j, t));
            acc *= inv_l;
            if (i == j) {
                c(i, i) = cdouble{acc.real(), 0.0};
            } else {
                c(i, j) = acc;
                c(j, i) = std::conj(acc);
            }
        }
    }
    return c;
}

} // namespace transmusic
