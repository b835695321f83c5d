#include "hpanel/rng.hpp"

namespace hpanel {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return h;
}

void fill_normal(Rng& rng, Matrix& m, double mean, double sd) {
  std::normal_distribution<double> nd(mean, sd);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = nd(rng);
}

void fill_normal(Rng& rng, Vector& v, double mean, double sd) {
  std::normal_distribution<double> nd(mean, sd);
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = nd(rng);
}

}  // namespace hpanel
