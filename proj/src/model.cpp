#include "hpanel/model.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "hpanel/errors.hpp"

namespace hpanel {

PanelDataset PanelDataset::balanced(int L, int N, int T, int d) {
  std::vector<std::vector<int>> sets(L);
  for (auto& s : sets) {
    s.resize(N);
    for (int j = 0; j < N; ++j) s[j] = j;
  }
  return with_sets(std::move(sets), N, T, d);
}

PanelDataset PanelDataset::with_sets(std::vector<std::vector<int>> j_sets, int N, int T, int d) {
  PanelDataset p;
  p.L = static_cast<int>(j_sets.size());
  p.N = N;
  p.T = T;
  p.d = d;
  p.j_sets = std::move(j_sets);
  for (int i = 0; i < p.L; ++i) p.i_labels.push_back(std::to_string(i + 1));
  for (int j = 0; j < N; ++j) p.j_labels.push_back(std::to_string(j + 1));
  for (int s = 0; s < d; ++s) p.x_names.push_back("x" + std::to_string(s + 1));
  p.reindex();
  p.y = Matrix::Zero(T, p.n_blocks());
  p.x = Matrix::Zero(T, static_cast<Eigen::Index>(p.n_blocks()) * d);
  return p;
}

void PanelDataset::reindex() {
  block_i_.clear();
  block_j_.clear();
  offsets_.assign(L + 1, 0);
  blocks_of_j_.assign(N, {});
  for (int i = 0; i < L; ++i) {
    offsets_[i] = static_cast<int>(block_i_.size());
    for (int j : j_sets[i]) {
      if (j < 0 || j >= N) throw DimensionError("j index out of range in j_sets");
      blocks_of_j_[j].push_back(static_cast<int>(block_i_.size()));
      block_i_.push_back(i);
      block_j_.push_back(j);
    }
  }
  offsets_[L] = static_cast<int>(block_i_.size());
}

std::vector<int> PanelDataset::n_per_i() const {
  std::vector<int> n(L);
  for (int i = 0; i < L; ++i) n[i] = n_in(i);
  return n;
}

std::optional<int> PanelDataset::block_index(int i, int j) const {
  if (i < 0 || i >= L) return std::nullopt;
  const auto& s = j_sets[i];
  auto it = std::lower_bound(s.begin(), s.end(), j);
  if (it == s.end() || *it != j) return std::nullopt;
  return offsets_[i] + static_cast<int>(it - s.begin());
}

PanelDataset PanelDataset::subset(const std::vector<int>& keep_i,
                                  const std::vector<int>& keep_j) const {
  std::vector<int> j_map(N, -1);
  std::vector<bool> wanted(N, false);
  for (int j : keep_j) wanted.at(j) = true;
  std::vector<bool> seen(N, false);
  for (int i : keep_i) {
    for (int j : j_sets.at(i)) {
      if (wanted[j]) seen[j] = true;
    }
  }
  int n_new = 0;
  std::vector<std::string> new_j_labels;
  for (int j = 0; j < N; ++j) {
    if (seen[j]) {
      j_map[j] = n_new++;
      new_j_labels.push_back(j_labels[j]);
    }
  }
  std::vector<std::vector<int>> sets;
  std::vector<int> src_blocks;
  for (int i : keep_i) {
    std::vector<int> s;
    for (int j : j_sets[i]) {
      if (j_map[j] >= 0) {
        s.push_back(j_map[j]);
        src_blocks.push_back(*block_index(i, j));
      }
    }
    sets.push_back(std::move(s));
  }
  PanelDataset out = with_sets(std::move(sets), n_new, T, d);
  for (std::size_t k = 0; k < keep_i.size(); ++k) out.i_labels[k] = i_labels[keep_i[k]];
  out.j_labels = std::move(new_j_labels);
  out.x_names = x_names;
  out.times = times;
  for (int b = 0; b < out.n_blocks(); ++b) {
    out.y_block(b) = y_block(src_blocks[b]);
    out.x_block(b) = x_block(src_blocks[b]);
  }
  return out;
}

ValidationReport validate(const PanelDataset& data) {
  ValidationReport rep;
  auto add = [&](const std::string& s) { rep.issues.push_back(s); };
  if (data.L < 2) add("L must be at least 2");
  if (static_cast<int>(data.j_sets.size()) != data.L) add("j_sets length must equal L");
  int min_n = data.L > 0 ? data.N : 0;
  for (const auto& s : data.j_sets) min_n = std::min(min_n, static_cast<int>(s.size()));
  if (min_n < 2) add("every i must observe at least 2 j units");
  if (data.d < 1) add("d must be at least 1");
  if (data.T <= data.d + 1) add("T must exceed d+1");
  if (data.y.rows() != data.T || data.y.cols() != data.n_blocks()) add("y has wrong shape");
  if (data.x.rows() != data.T || data.x.cols() != static_cast<Eigen::Index>(data.n_blocks()) * data.d) {
    add("x has wrong shape");
  }
  if (!data.times.empty()) {
    if (static_cast<int>(data.times.size()) != data.T) add("times must be empty or have length T");
    else if (!std::is_sorted(data.times.begin(), data.times.end(), std::less_equal<>())) {
      add("times must be strictly increasing");
    }
  }
  if (!rep.ok()) return rep;

  auto where = [&](int b, int t) {
    std::ostringstream os;
    os << "(i=" << data.i_labels[data.block_i(b)] << ", j=" << data.j_labels[data.block_j(b)]
       << ", t=" << t + 1 << ")";
    return os.str();
  };
  for (int b = 0; b < data.n_blocks(); ++b) {
    for (int t = 0; t < data.T; ++t) {
      if (!std::isfinite(data.y(t, b))) add("non-finite y at " + where(b, t));
      for (int s = 0; s < data.d; ++s) {
        if (!std::isfinite(data.x(t, static_cast<Eigen::Index>(b) * data.d + s))) {
          add("non-finite x" + std::to_string(s + 1) + " at " + where(b, t));
        }
      }
    }
  }
  return rep;
}

void require_valid(const PanelDataset& data) {
  const auto rep = validate(data);
  if (rep.ok()) return;
  std::string msg = "invalid panel dataset:";
  for (std::size_t k = 0; k < rep.issues.size() && k < 5; ++k) msg += " " + rep.issues[k] + ";";
  if (rep.issues.size() > 5) msg += " ...";
  throw ValidationError(msg);
}

FactorCounts FactorCounts::uniform(int L, int N, int g, int c, int i) {
  FactorCounts fc;
  fc.global = g;
  fc.country.assign(L, c);
  fc.industry.assign(N, i);
  return fc;
}

int FactorCounts::max_country() const {
  return country.empty() ? 0 : *std::max_element(country.begin(), country.end());
}

int FactorCounts::max_industry() const {
  return industry.empty() ? 0 : *std::max_element(industry.begin(), industry.end());
}

ValidationReport validate_counts(const FactorCounts& counts, const PanelDataset& data, int c_max) {
  ValidationReport rep;
  if (static_cast<int>(counts.country.size()) != data.L) {
    rep.issues.push_back("country counts must have length L");
  }
  if (static_cast<int>(counts.industry.size()) != data.N) {
    rep.issues.push_back("industry counts must have length N");
  }
  bool negative = counts.global < 0;
  for (int c : counts.country) negative = negative || c < 0;
  for (int c : counts.industry) negative = negative || c < 0;
  if (negative) rep.issues.push_back("factor counts must be non-negative");
  const int total = counts.global + counts.max_country() + counts.max_industry();
  if (total > c_max) {
    rep.issues.push_back("global + max country + max industry counts (" + std::to_string(total) +
                         ") exceeds ceiling " + std::to_string(c_max));
  }
  if (total > data.T - data.d) {
    rep.issues.push_back("factor counts leave fewer than d degrees of freedom in T");
  }
  return rep;
}

FactorCounts FactorEstimates::counts() const {
  FactorCounts c;
  c.global = static_cast<int>(global.cols());
  for (const auto& m : country) c.country.push_back(static_cast<int>(m.cols()));
  for (const auto& m : industry) c.industry.push_back(static_cast<int>(m.cols()));
  return c;
}

}  // namespace hpanel
