#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "hpanel/dgp.hpp"
#include "hpanel/errors.hpp"
#include "hpanel/estimator.hpp"
#include "hpanel/metrics.hpp"
#include "hpanel/rng.hpp"

using namespace hpanel;

namespace {

PanelDataset random_panel(int L, int N, int T, int d, std::uint64_t seed) {
  PanelDataset p = PanelDataset::balanced(L, N, T, d);
  Rng rng(seed);
  fill_normal(rng, p.x);
  fill_normal(rng, p.y);
  return p;
}

// Per-block OLS through a QR of X, independent of the estimator's normal
// equations.
Matrix ols_oracle(const PanelDataset& p) {
  Matrix b(p.d, p.n_blocks());
  for (int k = 0; k < p.n_blocks(); ++k) {
    b.col(k) = Matrix(p.x_block(k)).householderQr().solve(Vector(p.y_block(k)));
  }
  return b;
}

double max_projector_error(const FactorEstimates& f, const GroundTruth& t) {
  double e = projector_distance(f.global, t.F);
  for (std::size_t i = 0; i < f.country.size(); ++i) {
    e = std::max(e, projector_distance(f.country[i], t.F_country[i]));
  }
  for (std::size_t j = 0; j < f.industry.size(); ++j) {
    e = std::max(e, projector_distance(f.industry[j], t.F_industry[j]));
  }
  return e;
}

FactorEstimates true_factors(const GroundTruth& t) {
  FactorEstimates f;
  f.global = t.F;
  f.country = t.F_country;
  f.industry = t.F_industry;
  return f;
}

FactorCounts exact_counts(int L, int N) {
  FactorCounts c = FactorCounts::uniform(L, N, 2, 1, 1);
  c.country[1] = 0;
  c.industry[2] = 2;
  return c;
}

}  // namespace

TEST_CASE("zero counts reduce both steps to per-block OLS") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const PanelDataset p = random_panel(3, 3, 20, 2, seed);
    const auto r = fit(p, FactorCounts::uniform(3, 3, 0, 0, 0), FitOptions{});
    const Matrix oracle = ols_oracle(p);
    CHECK((r.beta_final.beta - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((r.beta_step1.beta - oracle).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(r.converged);
  }
}

TEST_CASE("c_dagger_apply matches the explicit operator") {
  Rng rng(3);
  const int T = 15;
  Matrix g(T, 2), c(T, 1), n(T, 2), m(T, 3);
  fill_normal(rng, g);
  fill_normal(rng, c);
  fill_normal(rng, n);
  fill_normal(rng, m);
  FactorEstimates f;
  f.global = orthonormalize_columns(g);
  f.country = {orthonormalize_columns(c - project_scaled(f.global, c))};
  f.industry = {orthonormalize_columns(n - project_scaled(f.global, n))};
  const Matrix op = 2.0 * Matrix::Identity(T, T) - 2.0 * projector(f.global) -
                    projector(f.country[0]) - projector(f.industry[0]);
  CHECK((c_dagger_apply(f, 0, 0, m) - op * m).cwiseAbs().maxCoeff() < 1e-12);
  // The composite weight splits into two annihilators when locals are orthogonal to C.
  const Matrix split = annihilator((Matrix(T, 3) << f.global, f.country[0]).finished()) +
                       annihilator((Matrix(T, 4) << f.global, f.industry[0]).finished());
  CHECK((op - split).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("step2_weights reproduce step2_beta") {
  const auto sim = testing::noiseless_panel(12, 12, 60, 2, exact_counts(12, 12), 4);
  PanelDataset p = sim.data;
  Rng rng(9);
  Matrix noise(p.T, p.n_blocks());
  fill_normal(rng, noise);
  p.y += noise;
  const FactorEstimates f = initial_factors(p, exact_counts(12, 12), 2);
  const auto b = step2_beta(p, f);
  for (int k : {0, 17, 143}) {
    const Vector w = step2_weights(p, f, k) * p.y_block(k);
    CHECK((w - b.beta.col(k)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("true factors give exact coefficients on noiseless data") {
  const auto sim = testing::noiseless_panel(12, 12, 60, 2, exact_counts(12, 12), 1);
  const FactorEstimates f = true_factors(sim.truth);
  const double tol = 1e-8;
  CHECK((step1_beta(sim.data, f).beta - sim.truth.beta.beta).cwiseAbs().maxCoeff() < tol);
  CHECK((step2_beta(sim.data, f).beta - sim.truth.beta.beta).cwiseAbs().maxCoeff() < tol);
}

TEST_CASE("global update recovers a pure one-factor panel") {
  const int L = 4, N = 5, T = 30;
  PanelDataset p = PanelDataset::balanced(L, N, T, 1);
  Rng rng(11);
  Matrix f(T, 1), gamma(1, p.n_blocks());
  fill_normal(rng, f);
  fill_normal(rng, gamma, 1.0);
  fill_normal(rng, p.x);
  p.y = f * gamma;
  CoefficientEstimates zero{Matrix::Zero(1, p.n_blocks())};
  const auto g = update_global_factors(p, zero, 1, 3);
  CHECK(projector_distance(g.factors, f) < 1e-6);
  CHECK(g.eigvals.size() == 3);
  CHECK(g.eigvals(1) < 1e-10);
  CHECK(update_global_factors(p, zero, 0).factors.cols() == 0);
}

TEST_CASE("local update isolates a single country factor") {
  const int L = 4, N = 5, T = 30;
  PanelDataset p = PanelDataset::balanced(L, N, T, 1);
  Rng rng(12);
  Matrix f(T, 1);
  fill_normal(rng, f);
  fill_normal(rng, p.x);
  for (int j = 0; j < N; ++j) p.y.col(*p.block_index(0, j)) = f.col(0) * (1.0 + 0.3 * j);
  CoefficientEstimates zero{Matrix::Zero(1, p.n_blocks())};
  const Matrix none(T, 0);
  const auto u = update_local_factors(p, zero, none, Axis::Country, {1, 1, 1, 1}, 1);
  CHECK(projector_distance(u.blocks[0], f) < 1e-6);
  for (int i = 1; i < L; ++i) CHECK(u.eigvals[i](0) < 1e-8);
  const auto z = update_local_factors(p, zero, none, Axis::Industry, std::vector<int>(N, 0));
  for (const auto& blk : z.blocks) CHECK(blk.cols() == 0);

  // Blocks live in the complement of the supplied global factors.
  Matrix g(T, 2);
  fill_normal(rng, g);
  const Matrix c = orthonormalize_columns(g);
  const auto w = update_local_factors(p, zero, c, Axis::Country, {2, 1, 0, 2});
  for (const auto& blk : w.blocks) {
    if (blk.cols() > 0) CHECK((c.transpose() * blk / T).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("fit recovers noiseless data exactly") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto c = exact_counts(12, 12);
    const auto sim = testing::noiseless_panel(12, 12, 60, 2, c, seed);
    FitOptions o;
    o.seed = seed;
    o.tol = 1e-12;
    o.max_iter = 200;
    const auto r = fit(sim.data, c, o);
    CHECK((r.beta_final.beta - sim.truth.beta.beta).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(max_projector_error(r.factors, sim.truth) < 1e-6);
  }
}

TEST_CASE("fit on the simulation design: sanity, invariants and determinism") {
  DgpConfig cfg;
  cfg.L = 20;
  cfg.N = 20;
  cfg.T = 40;
  cfg.seed = 5;
  const auto sim = simulate(cfg);
  FitOptions o;
  o.seed = 2;
  o.max_iter = 50;
  const auto r = fit(sim.data, sim.truth.counts, o);
  const double rmse = rmse_beta({r.beta_final}, {sim.truth.beta});
  CHECK(rmse < 0.6);

  for (std::size_t k = 1; k < r.objective_trace.size(); ++k) {
    CHECK(r.objective_trace[k] <= r.objective_trace[k - 1] + 1e-8);
  }
  CHECK(objective(sim.data, r.beta_step1, r.factors) ==
        doctest::Approx(r.objective_trace.back()).epsilon(1e-10));
  const double T = sim.data.T;
  for (const auto& blk : r.factors.country) {
    if (blk.cols() > 0) CHECK((r.factors.global.transpose() * blk / T).cwiseAbs().maxCoeff() < 1e-6);
  }
  for (const auto& blk : r.factors.industry) {
    if (blk.cols() > 0) CHECK((r.factors.global.transpose() * blk / T).cwiseAbs().maxCoeff() < 1e-6);
  }

  const auto again = fit(sim.data, sim.truth.counts, o);
  CHECK(again.beta_final.beta == r.beta_final.beta);
  CHECK(again.objective_trace == r.objective_trace);
  o.workers = 3;
  const auto threaded = fit(sim.data, sim.truth.counts, o);
  CHECK(threaded.beta_final.beta == r.beta_final.beta);
}

TEST_CASE("fit rejects invalid options and counts") {
  const PanelDataset p = random_panel(3, 3, 20, 2, 1);
  FitOptions o;
  o.tol = 0.0;
  CHECK_THROWS_AS(fit(p, FactorCounts::uniform(3, 3, 0, 0, 0), o), ValidationError);
  CHECK_THROWS_AS(fit(p, FactorCounts::uniform(3, 3, -1, 0, 0), FitOptions{}), ValidationError);
  CHECK_THROWS_AS(fit(p, FactorCounts::uniform(3, 4, 0, 0, 0), FitOptions{}), ValidationError);
}
