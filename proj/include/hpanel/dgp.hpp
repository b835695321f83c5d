#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "hpanel/model.hpp"

namespace hpanel {

// Monte Carlo design for the three-level factor model. Defaults reproduce the
// reference simulation design.
struct DgpConfig {
  int L = 60;
  int N = 60;
  int T = 60;
  int d = 2;
  int global_count = 2;
  std::vector<int> local_support{0, 1, 2};
  std::vector<double> local_probs{1.0 / 3, 1.0 / 3, 1.0 / 3};
  double rho_eps = 0.1;
  double rho_v = 0.1;
  double csd_base = 0.2;
  double eps_scale = 0.5;
  int burn_in = 50;
  std::uint64_t seed = 1;
};

void validate_config(const DgpConfig& config);

struct SimulatedPanel {
  PanelDataset data;
  GroundTruth truth;
};

// Symmetric PSD square root of {base^||(i1,j1)-(i2,j2)||} (Euclidean distance
// on index pairs, i-major ordering), LN x LN.
Matrix sqrt_csd_matrix(int L, int N, double base);

// Process-wide memoized sqrt_csd_matrix; the LN x LN eigendecomposition is the
// dominant one-off cost of a Monte Carlo design. Returns nullptr for base 0,
// where the root is the identity.
std::shared_ptr<const Matrix> cached_sqrt_csd(int L, int N, double base);

// beta_ij: even components 0.5 + i/L, odd components 0.5 + j/N (1-based i, j).
Vector true_beta(int i, int j, int L, int N, int d);

SimulatedPanel simulate(const DgpConfig& config);

}  // namespace hpanel
