#pragma once

// Shared constructions for unit and acceptance tests.

#include <cmath>
#include <stdexcept>

#include "hpanel/dgp.hpp"
#include "hpanel/linalg.hpp"
#include "hpanel/rng.hpp"

namespace hpanel::testing {

// Noiseless panel y = X beta + F g + F_i g_i + F_j g_j whose true parameters
// are a fixed point of the alternating estimator:
//  * every factor column is a distinct column of one orthonormal basis;
//  * block (i, j) loads on country factors when i + j is even and on
//    industry factors otherwise, never on both;
//  * within each i (each j) the local loadings are orthogonal to the global
//    loadings of the same blocks, so the pooled covariance keeps span(F)
//    invariant, and are spread so that each unit's own factors dominate its
//    sandwiched covariance;
//  * regressors are F phi plus variation in the unused basis columns, so
//    they are orthogonal to every local factor and step 1 is exact at the
//    true factors.
// Needs at least global + local count loaded blocks per unit (about N / 2
// per i) and enough spare basis columns for the regressors.
inline SimulatedPanel noiseless_panel(int L, int N, int T, int d, const FactorCounts& counts,
                                      std::uint64_t seed) {
  const int lg = counts.global;
  int used = lg;
  for (int c : counts.country) used += c;
  for (int c : counts.industry) used += c;
  if (used + d > T) throw std::invalid_argument("noiseless_panel: T too small for the factors");

  Rng rng = make_rng(seed, {1});
  Matrix raw(T, T);
  fill_normal(rng, raw);
  Eigen::HouseholderQR<Matrix> qr(raw);
  const Matrix basis = Matrix(qr.householderQ()) * std::sqrt(static_cast<double>(T));

  SimulatedPanel out{PanelDataset::balanced(L, N, T, d), {}};
  GroundTruth& truth = out.truth;
  truth.counts = counts;
  int col = 0;
  truth.F = basis.middleCols(col, lg);
  col += lg;
  for (int i = 0; i < L; ++i) {
    truth.F_country.push_back(basis.middleCols(col, counts.country[i]));
    col += counts.country[i];
  }
  for (int j = 0; j < N; ++j) {
    truth.F_industry.push_back(basis.middleCols(col, counts.industry[j]));
    col += counts.industry[j];
  }
  const Matrix spare = basis.rightCols(T - col);

  PanelDataset& data = out.data;
  const int nb = data.n_blocks();
  Matrix gamma(nb, lg);
  fill_normal(rng, gamma, 1.0);
  std::vector<Vector> g_country(nb), g_industry(nb);
  for (int b = 0; b < nb; ++b) {
    g_country[b] = Vector::Zero(counts.country[data.block_i(b)]);
    g_industry[b] = Vector::Zero(counts.industry[data.block_j(b)]);
  }
  // Local loadings on the unit's loaded blocks: orthogonal to the global
  // loadings of those blocks, orthogonal columns of squared norm m, and no
  // block carrying more than half of that. A single foreign block then leaks
  // at most half the unit's own eigenvalue into its sandwiched covariance.
  auto local = [&](const std::vector<int>& blocks, int k, std::vector<Vector>& g) {
    if (k == 0) return;
    const auto m = static_cast<Eigen::Index>(blocks.size());
    if (m < lg + k) throw std::invalid_argument("noiseless_panel: too few loaded blocks");
    Matrix gl(m, lg);
    for (Eigen::Index r = 0; r < m; ++r) gl.row(r) = gamma.row(blocks[r]);
    const Matrix gq = lg > 0 ? orthonormalize_columns(gl) : Matrix(m, 0);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      Matrix loc(m, k);
      fill_normal(rng, loc);
      loc -= gq * (gq.transpose() * loc) / static_cast<double>(m);
      loc = orthonormalize_columns(loc);  // column squared norms m
      if (loc.rowwise().squaredNorm().maxCoeff() > 0.5 * static_cast<double>(m)) continue;
      for (Eigen::Index r = 0; r < m; ++r) g[blocks[r]] = loc.row(r).transpose();
      return;
    }
    throw std::invalid_argument("noiseless_panel: too few loaded blocks to spread loadings");
  };
  for (int i = 0; i < L; ++i) {
    std::vector<int> blocks;
    for (int j = 0; j < N; ++j) {
      if ((i + j) % 2 == 0) blocks.push_back(*data.block_index(i, j));
    }
    local(blocks, counts.country[i], g_country);
  }
  for (int j = 0; j < N; ++j) {
    std::vector<int> blocks;
    for (int i = 0; i < L; ++i) {
      if ((i + j) % 2 == 1) blocks.push_back(*data.block_index(i, j));
    }
    local(blocks, counts.industry[j], g_industry);
  }

  truth.beta.beta.resize(d, nb);
  truth.eps = Matrix::Zero(T, nb);
  for (int b = 0; b < nb; ++b) {
    const int i = data.block_i(b), j = data.block_j(b);
    BlockLoadings ld;
    ld.gamma = gamma.row(b).transpose();
    ld.gamma_country = g_country[b];
    ld.gamma_industry = g_industry[b];
    ld.phi.resize(lg, d);
    fill_normal(rng, ld.phi, 0.5);
    ld.phi_country = Matrix::Zero(counts.country[i], d);
    ld.phi_industry = Matrix::Zero(counts.industry[j], d);
    Matrix w(spare.cols(), d);
    fill_normal(rng, w);
    const Matrix x = truth.F * ld.phi + spare * w / std::sqrt(static_cast<double>(spare.cols()));
    const Vector beta = true_beta(i, j, L, N, d);
    truth.beta.beta.col(b) = beta;
    data.x_block(b) = x;
    data.y_block(b) = x * beta + truth.F * ld.gamma + truth.F_country[i] * ld.gamma_country +
                      truth.F_industry[j] * ld.gamma_industry;
    truth.loadings.push_back(std::move(ld));
  }
  return out;
}

}  // namespace hpanel::testing
