#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hpanel/linalg.hpp"

namespace hpanel {

// Cross-sectional dimension: Country runs over i, Industry over j.
enum class Axis { Country, Industry };

// Three-index panel y_{ijt}, x_{ijt} with i = level-one unit ("country"),
// j = level-two unit ("industry"), t = time. Each i carries its own sorted
// set of j indices, so unbalanced panels are first-class. Every present
// (i, j) block has all T periods.
//
// Blocks are stored in (i, position-in-j-set) order; block b has its
// response in y.col(b) and its regressors in x.middleCols(b * d, d).
struct PanelDataset {
  int L = 0;  // number of i units
  int N = 0;  // number of distinct j units across all i
  int T = 0;
  int d = 0;
  std::vector<std::vector<int>> j_sets;  // per i, ascending j indices
  Matrix y;                              // T x n_blocks
  Matrix x;                              // T x (n_blocks * d)
  std::vector<std::string> i_labels;
  std::vector<std::string> j_labels;
  std::vector<std::string> x_names;
  // Time stamps of rows 0..T-1 as read from input; empty means 1..T.
  std::vector<long long> times;

  // Balanced L x N panel with zeroed data and default labels.
  static PanelDataset balanced(int L, int N, int T, int d);
  // Panel with the given per-i j sets (indices into 0..N-1), zeroed data.
  static PanelDataset with_sets(std::vector<std::vector<int>> j_sets, int N, int T, int d);

  int n_blocks() const { return static_cast<int>(block_i_.size()); }
  int block_i(int b) const { return block_i_[b]; }
  int block_j(int b) const { return block_j_[b]; }
  int first_block(int i) const { return offsets_[i]; }
  int n_in(int i) const { return static_cast<int>(j_sets[i].size()); }
  std::vector<int> n_per_i() const;
  // Number of i units observing industry j.
  int l_of(int j) const { return static_cast<int>(blocks_of_j_[j].size()); }
  const std::vector<int>& blocks_of_j(int j) const { return blocks_of_j_[j]; }
  std::optional<int> block_index(int i, int j) const;

  auto y_block(int b) const { return y.col(b); }
  auto y_block(int b) { return y.col(b); }
  auto x_block(int b) const { return x.middleCols(static_cast<Eigen::Index>(b) * d, d); }
  auto x_block(int b) { return x.middleCols(static_cast<Eigen::Index>(b) * d, d); }

  // Sub-panel restricted to the listed i and j units (each ascending). j
  // units are re-indexed densely; a j is kept only if some kept i observes it.
  PanelDataset subset(const std::vector<int>& keep_i, const std::vector<int>& keep_j) const;

  // Rebuilds the index tables after j_sets changes.
  void reindex();

 private:
  std::vector<int> block_i_;
  std::vector<int> block_j_;
  std::vector<int> offsets_;
  std::vector<std::vector<int>> blocks_of_j_;
};

struct ValidationReport {
  std::vector<std::string> issues;
  bool ok() const { return issues.empty(); }
};

ValidationReport validate(const PanelDataset& data);
// Throws ValidationError listing the first few issues.
void require_valid(const PanelDataset& data);

// Numbers of global, per-country and per-industry factors.
struct FactorCounts {
  int global = 0;
  std::vector<int> country;   // length L
  std::vector<int> industry;  // length N

  static FactorCounts uniform(int L, int N, int g, int c, int i);
  int max_country() const;
  int max_industry() const;
  bool operator==(const FactorCounts&) const = default;
};

// Checks non-negativity, lengths against the dataset and the ceiling
// global + max country + max industry <= c_max.
ValidationReport validate_counts(const FactorCounts& counts, const PanelDataset& data, int c_max);

struct FactorEstimates {
  Matrix global;                  // T x l
  std::vector<Matrix> country;    // T x l_i
  std::vector<Matrix> industry;   // T x l_j
  Vector eig_global;
  std::vector<Vector> eig_country;
  std::vector<Vector> eig_industry;

  FactorCounts counts() const;
};

struct CoefficientEstimates {
  Matrix beta;  // d x n_blocks, column b belongs to block b
};

// Per-block loadings of the simulated model; empty vectors/matrices when the
// corresponding count is zero.
struct BlockLoadings {
  Vector gamma, gamma_country, gamma_industry;  // l, l_i, l_j
  Matrix phi, phi_country, phi_industry;        // l x d, l_i x d, l_j x d
};

struct GroundTruth {
  CoefficientEstimates beta;
  FactorCounts counts;
  Matrix F;                        // T x l
  std::vector<Matrix> F_country;   // T x l_i
  std::vector<Matrix> F_industry;  // T x l_j
  std::vector<BlockLoadings> loadings;
  Matrix eps;                      // T x n_blocks idiosyncratic errors of y
};

}  // namespace hpanel
