#include "hpanel/dgp.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>

#include "hpanel/errors.hpp"
#include "hpanel/kernels.hpp"
#include "hpanel/rng.hpp"

namespace hpanel {

void validate_config(const DgpConfig& c) {
  if (c.L < 1 || c.N < 1 || c.T < 1 || c.d < 1) throw ValidationError("L, N, T, d must be positive");
  if (c.global_count < 0) throw ValidationError("global factor count must be non-negative");
  if (std::abs(c.rho_eps) >= 1.0 || std::abs(c.rho_v) >= 1.0) {
    throw ValidationError("AR(1) coefficients must satisfy |rho| < 1");
  }
  if (c.csd_base < 0.0 || c.csd_base >= 1.0) throw ValidationError("csd_base must lie in [0, 1)");
  if (c.local_support.empty() || c.local_support.size() != c.local_probs.size()) {
    throw ValidationError("local count support and probabilities must match in length");
  }
  double total = 0.0;
  for (double p : c.local_probs) {
    if (p < 0.0) throw ValidationError("local count probabilities must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("local count probabilities must sum to 1");
  for (int s : c.local_support) {
    if (s < 0) throw ValidationError("local counts must be non-negative");
  }
  if (c.burn_in < 0) throw ValidationError("burn_in must be non-negative");
}

Matrix sqrt_csd_matrix(int L, int N, double base) {
  if (base < 0.0 || base >= 1.0) throw ValidationError("csd base must lie in [0, 1)");
  const int n = L * N;
  if (base == 0.0) return Matrix::Identity(n, n);
  Matrix sigma(n, n);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      const double di = a / N - b / N;
      const double dj = a % N - b % N;
      sigma(a, b) = std::pow(base, std::sqrt(di * di + dj * dj));
    }
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
  if (es.info() != Eigen::Success) throw NumericalError("sqrt_csd_matrix: eigensolver failed");
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  if (!root.allFinite()) throw NumericalError("sqrt_csd_matrix: non-finite eigenvalues");
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

std::shared_ptr<const Matrix> cached_sqrt_csd(int L, int N, double base) {
  if (base == 0.0) return nullptr;
  static std::mutex mu;
  static std::map<std::tuple<int, int, double>, std::shared_ptr<const Matrix>> cache;
  const auto key = std::make_tuple(L, N, base);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto m = std::make_shared<const Matrix>(sqrt_csd_matrix(L, N, base));
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(key, std::move(m)).first->second;
}

Vector true_beta(int i, int j, int L, int N, int d) {
  Vector b(d);
  for (int s = 0; s < d; ++s) {
    b(s) = s % 2 == 0 ? 0.5 + static_cast<double>(i + 1) / L : 0.5 + static_cast<double>(j + 1) / N;
  }
  return b;
}

namespace {

int draw_count(Rng& rng, const DgpConfig& c) {
  std::discrete_distribution<int> dist(c.local_probs.begin(), c.local_probs.end());
  return c.local_support[dist(rng)];
}

// Vectorized AR(1) errors: column t of the result is e_t = rho e_{t-1} +
// scale * root * z_t, after burn_in discarded warm-up steps from e = 0.
// root == nullptr means cross-sectionally independent innovations.
Matrix ar1_errors(Rng& rng, const Matrix* root, int n, int T, int burn_in, double rho,
                  double scale) {
  const int total = T + burn_in;
  Matrix z(n, total);
  fill_normal(rng, z);
  Matrix e = root ? Matrix(scale * (*root * z)) : Matrix(scale * z);
  const auto& k = kernels::active();
  for (int t = 1; t < total; ++t) {
    k.axpby(rho, e.col(t - 1).data(), 1.0, e.col(t).data(), static_cast<std::size_t>(n));
  }
  return e.rightCols(T);
}

}  // namespace

SimulatedPanel simulate(const DgpConfig& c) {
  validate_config(c);
  const int L = c.L, N = c.N, T = c.T, d = c.d, l = c.global_count;
  SimulatedPanel out{PanelDataset::balanced(L, N, T, d), {}};
  PanelDataset& data = out.data;
  GroundTruth& truth = out.truth;

  Rng count_rng = make_rng(c.seed, {tag(Stream::Counts)});
  truth.counts.global = l;
  truth.counts.country.resize(L);
  truth.counts.industry.resize(N);
  for (int i = 0; i < L; ++i) truth.counts.country[i] = draw_count(count_rng, c);
  for (int j = 0; j < N; ++j) truth.counts.industry[j] = draw_count(count_rng, c);

  Rng factor_rng = make_rng(c.seed, {tag(Stream::Factors)});
  const double local_sd = std::sqrt(2.0);
  truth.F.resize(T, l);
  fill_normal(factor_rng, truth.F);
  truth.F_country.resize(L);
  for (int i = 0; i < L; ++i) {
    truth.F_country[i].resize(T, truth.counts.country[i]);
    fill_normal(factor_rng, truth.F_country[i], 0.0, local_sd);
  }
  truth.F_industry.resize(N);
  for (int j = 0; j < N; ++j) {
    truth.F_industry[j].resize(T, truth.counts.industry[j]);
    fill_normal(factor_rng, truth.F_industry[j], 0.0, local_sd);
  }

  Rng load_rng = make_rng(c.seed, {tag(Stream::Loadings)});
  truth.loadings.resize(data.n_blocks());
  for (int b = 0; b < data.n_blocks(); ++b) {
    const int i = data.block_i(b), j = data.block_j(b);
    const int lc = truth.counts.country[i], li = truth.counts.industry[j];
    BlockLoadings& ld = truth.loadings[b];
    ld.gamma.resize(l);
    ld.gamma_country.resize(lc);
    ld.gamma_industry.resize(li);
    ld.phi.resize(l, d);
    ld.phi_country.resize(lc, d);
    ld.phi_industry.resize(li, d);
    fill_normal(load_rng, ld.gamma, 1.0);
    fill_normal(load_rng, ld.gamma_country, 0.0);
    fill_normal(load_rng, ld.gamma_industry, -1.0);
    fill_normal(load_rng, ld.phi, 1.0);
    fill_normal(load_rng, ld.phi_country, 0.0);
    fill_normal(load_rng, ld.phi_industry, -1.0);
  }

  const auto root = cached_sqrt_csd(L, N, c.csd_base);
  Rng ey_rng = make_rng(c.seed, {tag(Stream::ErrorsY)});
  truth.eps = ar1_errors(ey_rng, root.get(), L * N, T, c.burn_in, c.rho_eps, c.eps_scale).transpose();
  std::vector<Matrix> v(d);
  for (int s = 0; s < d; ++s) {
    Rng ex_rng = make_rng(c.seed, {tag(Stream::ErrorsX), static_cast<std::uint64_t>(s)});
    v[s] = ar1_errors(ex_rng, root.get(), L * N, T, c.burn_in, c.rho_v, 1.0).transpose();
  }

  truth.beta.beta.resize(d, data.n_blocks());
  for (int b = 0; b < data.n_blocks(); ++b) {
    const int i = data.block_i(b), j = data.block_j(b);
    const BlockLoadings& ld = truth.loadings[b];
    const Vector beta = true_beta(i, j, L, N, d);
    truth.beta.beta.col(b) = beta;

    Matrix x = truth.F * ld.phi + truth.F_country[i] * ld.phi_country +
               truth.F_industry[j] * ld.phi_industry;
    for (int s = 0; s < d; ++s) x.col(s) += v[s].col(b);
    data.x_block(b) = x;
    data.y_block(b) = x * beta + truth.F * ld.gamma + truth.F_country[i] * ld.gamma_country +
                      truth.F_industry[j] * ld.gamma_industry + truth.eps.col(b);
  }
  return out;
}

}  // namespace hpanel
