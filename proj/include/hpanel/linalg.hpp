#pragma once

// Dense linear-algebra primitives shared by the estimation modules.
//
// Factor blocks throughout the library use the sqrt(T) scaling: a T x k block
// C is "orthonormal" when (1/T) C^T C = I_k, so P_C = C C^T / T.

#include <Eigen/Dense>

namespace hpanel {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kRankTolerance = 1e-12;

struct EigenPairs {
  Vector values;   // descending; may be longer than vectors.cols()
  Matrix vectors;  // T x k, (1/T) V^T V = I_k
};

// Returns C spanning col(M) with (1/T) C^T C = I_k.
// Throws RankDeficient when sigma_min < 1e-12 * sigma_max.
Matrix orthonormalize_columns(const Matrix& m);

// Rank-revealing variant: drops directions whose singular value falls below
// rel_tol * sigma_max instead of throwing. May return fewer columns than m.
Matrix orthonormal_basis(const Matrix& m, double rel_tol = 1e-10);

// P_C = C (C^T C)^{-1} C^T; k = 0 gives the zero matrix.
Matrix projector(const Matrix& c);

// M_C = I - P_C.
Matrix annihilator(const Matrix& c);

// Top-k eigenpairs of a symmetric matrix (symmetrized first), eigenvectors
// scaled to squared norm T and signed so that the largest-|entry| is positive.
// n_values > k additionally reports that many leading eigenvalues.
EigenPairs sym_eig_desc(const Matrix& s, int k, int n_values = 0);

// Top-k eigenpairs of (A A^T) / scale. When A has fewer columns than rows the
// small n x n Gram matrix is decomposed instead; eigenvalues past rank(A) are
// reported as zero. Same output conventions as sym_eig_desc.
EigenPairs gram_eig_desc(const Matrix& a, int k, double scale, int n_values = 0);

// In each column, flips the sign so that the entry of largest magnitude is
// positive (first such row wins ties).
void canonicalize_signs(Matrix& vectors);

// P_C M for a block already satisfying (1/T) C^T C = I.
inline Matrix project_scaled(const Matrix& c, const Matrix& m) {
  if (c.cols() == 0) return Matrix::Zero(m.rows(), m.cols());
  return c * (c.transpose() * m) / static_cast<double>(c.rows());
}

// Orthonormal (unit-norm) basis of the orthogonal complement of col(C),
// T x (T - k). C must have full column rank.
Matrix complement_basis(const Matrix& c);

}  // namespace hpanel
