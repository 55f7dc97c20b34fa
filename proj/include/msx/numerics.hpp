#ifndef MSX_NUMERICS_HPP
#define MSX_NUMERICS_HPP

#include <cstddef>
#include <vector>

#include "msx/matrix.hpp"

namespace msx {

// Full spectral decomposition of a symmetric matrix, eigenvalues descending,
// eigenvectors as orthonormal columns.
struct SymEig {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

struct Whitening {
  Matrix transform;    // r x m, transform * C * transform^T = I_r
  Matrix dewhitening;  // m x r, pseudo-inverse of transform
  std::size_t retained_dims = 0;
};

// Row-mean-centered covariance with 1/(n-1) normalisation.
Matrix covariance(const Matrix& m);

// Symmetrized lagged covariance: 0.5 * (C_tau + C_tau^T) where
// C_tau[i][j] = 1/(n-tau) * sum_t (m_i(t)-mu_i)(m_j(t+tau)-mu_j).
Matrix lagged_covariance(const Matrix& m, std::size_t lag);

// Cyclic Jacobi rotations; fine for the matrix sizes used here (m <= 64).
SymEig sym_eig(const Matrix& a);

struct WhitenResult {
  Matrix whitened;  // r x n
  Whitening whitening;
};

// Project onto the top-r principal directions and rescale channel covariance
// to the identity. Throws RankDeficient if an eigenvalue in the retained
// block is <= eigenvalue_floor.
WhitenResult whiten(const Matrix& m, std::size_t r,
                    double eigenvalue_floor = 1e-12);

// Number of covariance eigenvalues above the floor.
std::size_t covariance_rank(const SymEig& eig, double eigenvalue_floor = 1e-12);

struct JointDiagOptions {
  double tol = 1e-9;  // radians; sweep stops once every rotation is below this
  std::size_t max_sweeps = 200;
};

struct JointDiagResult {
  Matrix basis;  // orthogonal, r x r
  std::size_t sweeps = 0;
  std::size_t rotations = 0;  // rotations above tol, zero for diagonal input
};

// One orthogonal basis approximately diagonalizing every input matrix, via
// pairwise Jacobi rotations minimising the summed squared off-diagonal energy.
JointDiagResult joint_diagonalize(const std::vector<Matrix>& mats,
                                  const JointDiagOptions& options = {});

// Solve A * X = B for symmetric positive (semi)definite A through the
// spectral decomposition, clamping eigenvalues below rel_floor * lambda_max.
Matrix solve_spd(const Matrix& a, const Matrix& b, double rel_floor = 1e-12);

}  // namespace msx

#endif
