#pragma once

#include <vector>

#include "transmusic/complex_matrix.hpp"

namespace transmusic {

struct EigenDecomposition {
    std::vector<double> eigenvalues; // real, sorted non-increasing
    ComplexMatrix eigenvectors;      // column k pairs with eigenvalues[k]
};

// Cyclic Jacobi eigendecomposition for Hermitian matrices (complex Givens
// rotations). Off-diagonal threshold 1e-12*||H||_F, at most 100 sweeps.
// The input is symmetrized as (H + H^H)/2 before factoring; asymmetry
// beyond 1e-10*(1 + ||H||_F) is rejected.
//
// Eigenvector column phase is fixed by making the largest-magnitude entry
// real-positive, so results are deterministic.
EigenDecomposition hermitian_evd(const ComplexMatrix& hermitian);

// Columns of the eigenvector matrix paired with the (m - k) smallest
// eigenvalues, i.e. the trailing columns under the descending sort.
ComplexMatrix noise_subspace(const EigenDecomposition& eig, std::size_t num_sources);

} // namespace transmusic
