#include "hpanel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <lapacke.h>

#include "hpanel/errors.hpp"
#include "hpanel/kernels.hpp"

namespace hpanel {

namespace {

Eigen::JacobiSVD<Matrix> thin_svd(const Matrix& m) {
  return Eigen::JacobiSVD<Matrix>(m, Eigen::ComputeThinU);
}

// Modified Gram-Schmidt on unit-norm columns, in place.
void reorthonormalize(Matrix& v) {
  for (Eigen::Index s = 0; s < v.cols(); ++s) {
    for (Eigen::Index r = 0; r < s; ++r) v.col(s) -= v.col(r).dot(v.col(s)) * v.col(r);
    v.col(s).normalize();
  }
}

Matrix symmetric_gram(const Matrix& a, double scale) {
  const auto n = static_cast<std::size_t>(a.rows());
  Matrix s = Matrix::Zero(a.rows(), a.rows());
  kernels::active().gram_lower(a.data(), n, static_cast<std::size_t>(a.cols()),
                               static_cast<std::size_t>(a.outerStride()), s.data(), n);
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  s /= scale;
  return s;
}

// The nv largest eigenvalues of a symmetric matrix in descending order, with
// unit eigenvectors for the first nvec of them. Householder tridiagonalization
// followed by MRRR on the selected index range only.
void leading_eigen(const Matrix& sym, int nv, int nvec, Vector& values, Matrix& vectors) {
  const auto n = sym.rows();
  values = Vector(nv);
  vectors = Matrix(n, nvec);
  if (nv == 0) return;
  Eigen::Tridiagonalization<Matrix> tri(sym);
  Vector diag = tri.diagonal();
  Vector sub = Vector::Zero(n);
  if (n > 1) sub.head(n - 1) = tri.subDiagonal();
  const char jobz = nvec > 0 ? 'V' : 'N';
  lapack_int found = 0;
  lapack_logical tryrac = 1;
  Vector w(n);
  Matrix z(n, nvec > 0 ? nv : 1);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(nv));
  const lapack_int info = LAPACKE_dstemr(
      LAPACK_COL_MAJOR, jobz, 'I', static_cast<lapack_int>(n), diag.data(), sub.data(), 0.0, 0.0,
      static_cast<lapack_int>(n - nv + 1), static_cast<lapack_int>(n), &found, w.data(), z.data(),
      static_cast<lapack_int>(n), static_cast<lapack_int>(nvec > 0 ? nv : 0), support.data(),
      &tryrac);
  if (info != 0 || found != nv) {
    throw NumericalError("symmetric eigensolver failed (info " + std::to_string(info) + ")");
  }
  for (int s = 0; s < nv; ++s) values(s) = w(nv - 1 - s);
  if (nvec > 0) {
    const Matrix top = z.leftCols(nv).rowwise().reverse().leftCols(nvec);
    vectors = tri.matrixQ() * top;
  }
}

}  // namespace

void canonicalize_signs(Matrix& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double a = std::abs(vectors(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (vectors.rows() > 0 && vectors(best, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

Matrix orthonormalize_columns(const Matrix& m) {
  const auto t = m.rows();
  const auto k = m.cols();
  if (k < 1 || t < k) {
    throw DimensionError("orthonormalize_columns: need 1 <= k <= T, got T=" + std::to_string(t) +
                         ", k=" + std::to_string(k));
  }
  auto svd = thin_svd(m);
  const Vector& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(k - 1) < kRankTolerance * sv(0)) {
    throw RankDeficient("orthonormalize_columns: matrix is rank deficient");
  }
  return svd.matrixU() * std::sqrt(static_cast<double>(t));
}

Matrix orthonormal_basis(const Matrix& m, double rel_tol) {
  if (m.cols() == 0) return Matrix(m.rows(), 0);
  auto svd = thin_svd(m);
  const Vector& sv = svd.singularValues();
  Eigen::Index rank = 0;
  if (sv(0) > 0.0) {
    while (rank < sv.size() && sv(rank) >= rel_tol * sv(0)) ++rank;
  }
  return svd.matrixU().leftCols(rank) * std::sqrt(static_cast<double>(m.rows()));
}

Matrix projector(const Matrix& c) {
  const auto t = c.rows();
  if (c.cols() == 0) return Matrix::Zero(t, t);
  const Matrix q = orthonormalize_columns(c);
  return q * q.transpose() / static_cast<double>(t);
}

Matrix annihilator(const Matrix& c) {
  Matrix m = -projector(c);
  m.diagonal().array() += 1.0;
  return m;
}

Matrix complement_basis(const Matrix& c) {
  const auto t = c.rows();
  const auto k = c.cols();
  if (k == 0) return Matrix::Identity(t, t);
  Eigen::HouseholderQR<Matrix> qr(c);
  Matrix q = qr.householderQ();
  return q.rightCols(t - k);
}

EigenPairs sym_eig_desc(const Matrix& s, int k, int n_values) {
  const auto t = s.rows();
  if (s.cols() != t) throw DimensionError("sym_eig_desc: matrix is not square");
  if (k < 0 || k > t) {
    throw DimensionError("sym_eig_desc: requested " + std::to_string(k) +
                         " eigenpairs of a " + std::to_string(t) + "x" + std::to_string(t) +
                         " matrix");
  }
  const int nv = static_cast<int>(std::min<Eigen::Index>(std::max(k, n_values), t));
  EigenPairs out;
  if (t == 0) {
    out.values = Vector(0);
    out.vectors = Matrix(0, 0);
    return out;
  }
  const Matrix sym = 0.5 * (s + s.transpose());
  leading_eigen(sym, nv, k, out.values, out.vectors);
  out.vectors *= std::sqrt(static_cast<double>(t));
  canonicalize_signs(out.vectors);
  return out;
}

EigenPairs gram_eig_desc(const Matrix& a, int k, double scale, int n_values) {
  const auto t = a.rows();
  const auto n = a.cols();
  if (k < 0 || k > t) {
    throw DimensionError("gram_eig_desc: requested " + std::to_string(k) +
                         " eigenpairs in dimension " + std::to_string(t));
  }
  if (n >= t) return sym_eig_desc(symmetric_gram(a, scale), k, n_values);

  const int nv = static_cast<int>(std::min<Eigen::Index>(std::max(k, n_values), t));
  Matrix g = a.transpose() * a / scale;
  const int n_dual = static_cast<int>(std::min<Eigen::Index>(nv, n));
  Vector lam;
  Matrix u;
  leading_eigen(g, n_dual, std::min(k, n_dual), lam, u);

  // Vectors are recovered as A u / sqrt(lambda * scale); that is only stable
  // for eigenvalues clearly away from zero.
  bool dual_ok = k <= n;
  if (dual_ok && k > 0) dual_ok = lam(0) > 0.0 && lam(k - 1) > 1e-8 * lam(0);
  if (!dual_ok) return sym_eig_desc(symmetric_gram(a, scale), k, n_values);

  EigenPairs out;
  out.values = Vector::Zero(nv);
  out.values.head(n_dual) = lam.cwiseMax(0.0);
  Matrix v = a * u;
  for (int s = 0; s < k; ++s) v.col(s) /= std::sqrt(lam(s) * scale);
  reorthonormalize(v);
  out.vectors = v * std::sqrt(static_cast<double>(t));
  canonicalize_signs(out.vectors);
  return out;
}

}  // namespace hpanel
