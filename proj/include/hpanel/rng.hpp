#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "hpanel/linalg.hpp"

namespace hpanel {

using Rng = std::mt19937_64;

// Well-known stream tags so that independent consumers never share a stream.
enum class Stream : std::uint64_t {
  Counts = 1,
  Factors,
  Loadings,
  ErrorsY,
  ErrorsX,
  FitInit,
  Bootstrap,
  Replication,
};

// Hashes a master seed and a path of integers into an independent seed.
// Equal paths give equal seeds; the result does not depend on call order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(master, path));
}

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

// Fills m with i.i.d. N(mean, sd^2) draws in column-major order.
void fill_normal(Rng& rng, Matrix& m, double mean = 0.0, double sd = 1.0);
void fill_normal(Rng& rng, Vector& v, double mean = 0.0, double sd = 1.0);

}  // namespace hpanel
