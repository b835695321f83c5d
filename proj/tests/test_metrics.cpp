#include <cmath>

#include "doctest.h"
#include "hpanel/errors.hpp"
#include "hpanel/metrics.hpp"
#include "hpanel/rng.hpp"

using namespace hpanel;

TEST_CASE("projector distance examples") {
  Matrix e1 = Matrix::Zero(4, 1), e2 = Matrix::Zero(4, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  CHECK(projector_distance(e1, e2) == doctest::Approx(std::sqrt(2.0)));
  CHECK(projector_distance(e1, Matrix(4, 0)) == doctest::Approx(1.0));
  CHECK(projector_distance(Matrix(4, 0), Matrix(4, 0)) == 0.0);
  CHECK(projector_distance(e1, 3.0 * e1) < 1e-15);
}

TEST_CASE("projector distance ignores rotation and scale") {
  Rng rng(41);
  Matrix a(20, 3), rot(3, 3), b(20, 2);
  fill_normal(rng, a);
  fill_normal(rng, rot);
  fill_normal(rng, b);
  CHECK(projector_distance(a, a * rot) < 1e-10);
  CHECK(projector_distance(a, b) == doctest::Approx(projector_distance(a * rot, 5.0 * b)));
}

TEST_CASE("coefficient and factor-space RMSE") {
  CoefficientEstimates t{Matrix::Zero(2, 4)};
  CoefficientEstimates e{Matrix::Zero(2, 4)};
  e.beta(0, 0) = 2.0;  // ||.||^2 / 4 = 1 for this replication
  CHECK(rmse_beta({e, t}, {t, t}) == doctest::Approx(std::sqrt(0.5)));
  CHECK_THROWS_AS(rmse_beta({e}, {t, t}), DimensionError);

  Matrix e1 = Matrix::Zero(3, 1), e2 = Matrix::Zero(3, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  // Replication 1: units at squared distance 2 and 0; replication 2: 1.
  const double r = rmse_factor_space({{e1, e1}, {Matrix(3, 0)}}, {{e2, e1}, {e1}});
  CHECK(r == doctest::Approx(std::sqrt((1.0 + 1.0) / 2.0)));
}

TEST_CASE("selection rates") {
  const auto g = selection_rates({2, 2, 3, 1, 2}, {2, 2, 2, 2, 2});
  CHECK(g.correct == doctest::Approx(0.6));
  CHECK(g.over == doctest::Approx(0.2));
  CHECK(g.under == doctest::Approx(0.2));
  // Local rates average per replication first.
  const auto l = selection_rates({{1, 1, 0, 2}, {1, 1}}, {{1, 1, 1, 1}, {1, 2}});
  CHECK(l.correct == doctest::Approx((0.5 + 0.5) / 2.0));
  CHECK(l.under == doctest::Approx((0.25 + 0.5) / 2.0));
  CHECK(l.over == doctest::Approx((0.25 + 0.0) / 2.0));
  CHECK(l.correct + l.under + l.over == doctest::Approx(1.0));
}

TEST_CASE("coverage rate") {
  CHECK(coverage_rate({true, false, true, true}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(coverage_rate({}), DimensionError);
}
