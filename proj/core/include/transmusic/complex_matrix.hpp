#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace transmusic {

using cdouble = std::complex<double>;

// Dense row-major complex matrix. Carries R_y, steering matrices, subspaces.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols) {}

    static ComplexMatrix identity(std::size_t n);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cdouble& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const cdouble& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    cdouble* data() { return data_.data(); }
    const cdouble* data() const { return data_.data(); }

    bool all_finite() const;
    double frobenius_norm() const;
    cdouble trace() const;
    ComplexMatrix conjugate_transpose() const;

    // largest |A(i,j) - conj(A(j,i))| over all pairs
    double hermitian_asymmetry() const;

    bool operator==(const ComplexMatrix& other) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cdouble> data_;
};

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator+(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator-(const ComplexMatrix& a, const ComplexMatrix& b);
ComplexMatrix operator*(cdouble s, const ComplexMatrix& a);

// (1/L) sum_t z(t) z(t)^H over the columns of Z. Builds the upper triangle
// and mirrors it, so the result is Hermitian exactly.
ComplexMatrix sample_covariance(const ComplexMatrix& snapshots);

} // namespace transmusic
