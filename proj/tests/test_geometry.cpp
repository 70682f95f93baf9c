#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "herc/geometry.hpp"
#include "herc/rng.hpp"
#include "support/oracles.hpp"

using namespace herc::geometry;

namespace {

Vec random_tangent(herc::Rng& rng, std::size_t n, double scale) {
  Vec v(n);
  for (auto& x : v) x = rng.uniform(-scale, scale);
  return v;
}

// Uniform-ish point strictly inside the ball of curvature c, at most `frac` of the radius.
Vec random_ball_point(herc::Rng& rng, std::size_t n, double c, double frac) {
  Vec v = random_tangent(rng, n, 1.0);
  const double norm = std::sqrt(squared_norm(v));
  const double r = rng.uniform(0.0, frac) / std::sqrt(c);
  for (auto& x : v) x *= r / norm;
  return v;
}

double max_abs_diff(ConstSpan a, ConstSpan b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("exp0 and log0 at c = 1 match high-precision values") {
  const Vec u{0.5, 0.0};
  const auto x = exp0(u, 1.0);
  CHECK(x[0] == doctest::Approx(0.46211715726000975850).epsilon(1e-15));
  CHECK(x[1] == 0.0);

  const auto big = exp0(Vec{3.0}, 1.0);
  CHECK(big[0] == doctest::Approx(0.99505475368673045133).epsilon(1e-15));

  const auto back = log0(Vec{0.462117, 0.0}, 1.0);
  CHECK(back[0] == doctest::Approx(0.49999980003757575).epsilon(1e-12));
}

TEST_CASE("exp0 of the zero vector is the origin and log0 of the origin is zero") {
  CHECK(exp0(Vec{0.0, 0.0, 0.0, 0.0}, 2.0) == Vec{0.0, 0.0, 0.0, 0.0});
  CHECK(log0(Vec{0.0, 0.0}, 0.3) == Vec{0.0, 0.0});
}

TEST_CASE("hyperbolic distance of simple configurations") {
  CHECK(hyp_distance(Vec{0.0, 0.0}, Vec{0.5, 0.0}, 1.0) == doctest::Approx(1.0986122886681096914).epsilon(1e-14));
  CHECK(hyp_distance(Vec{0.5}, Vec{0.5}, 1.0) == 0.0);
  // d(0, x) = 2 artanh(|x|) = ln((1 + |x|)/(1 - |x|)).
  CHECK(hyp_distance(Vec{0.0}, Vec{1.0 / 3.0}, 1.0) == doctest::Approx(0.69314718055994530942).epsilon(1e-14));
}

TEST_CASE("Mobius addition in one dimension") {
  // (x + y) / (1 + c x y) for collinear points.
  CHECK(mobius_add(Vec{0.3}, Vec{0.4}, 1.0)[0] == doctest::Approx(0.625).epsilon(1e-15));
  const double c = 2.0;
  CHECK(mobius_add(Vec{0.1}, Vec{-0.3}, c)[0] == doctest::Approx((0.1 - 0.3) / (1 - c * 0.03)).epsilon(1e-15));
}

TEST_CASE("Mobius addition identity and inverse") {
  herc::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const double c = rng.uniform(0.05, 5.0);
    const auto x = random_ball_point(rng, 4, c, 0.95);
    const Vec zero(4, 0.0);
    CHECK(max_abs_diff(mobius_add(zero, x, c), x) < 1e-15);
    CHECK(max_abs_diff(mobius_add(x, zero, c), x) < 1e-15);
    Vec neg = x;
    for (auto& v : neg) v = -v;
    CHECK(std::sqrt(squared_norm(mobius_add(neg, x, c))) < 1e-14);
  }
}

TEST_CASE("Mobius addition agrees with an extended-precision reference") {
  herc::Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const double c = rng.uniform(0.05, 5.0);
    const std::size_t n = (i % 3 == 0) ? 2 : (i % 3 == 1 ? 4 : 10);
    const auto x = random_ball_point(rng, n, c, 0.99);
    const auto y = random_ball_point(rng, n, c, 0.99);
    const auto got = mobius_add(x, y, c);
    const auto want = herc::oracle::mobius_add(x, y, c);
    CHECK(max_abs_diff(got, want) < 1e-12 / std::sqrt(c) + 1e-13);
    CHECK(c * squared_norm(got) < 1.0);
  }
}

TEST_CASE("distance matches the arcosh closed form and is a metric") {
  herc::Rng rng(13);
  for (int i = 0; i < 500; ++i) {
    const double c = rng.uniform(0.05, 5.0);
    const auto x = random_ball_point(rng, 4, c, 0.9);
    const auto y = random_ball_point(rng, 4, c, 0.9);
    const auto z = random_ball_point(rng, 4, c, 0.9);
    const double dxy = hyp_distance(x, y, c);
    CHECK(dxy == doctest::Approx(herc::oracle::distance_acosh(x, y, c)).epsilon(1e-9));
    CHECK(dxy == doctest::Approx(hyp_distance(y, x, c)).epsilon(1e-12));
    CHECK(dxy >= 0.0);
    CHECK(dxy <= hyp_distance(x, z, c) + hyp_distance(z, y, c) + 1e-12);
  }
}

TEST_CASE("distance approaches twice the Euclidean distance as c goes to zero") {
  herc::Rng rng(14);
  for (int i = 0; i < 50; ++i) {
    const auto x = random_tangent(rng, 4, 1.0);
    const auto y = random_tangent(rng, 4, 1.0);
    double e = 0.0;
    for (std::size_t k = 0; k < 4; ++k) e += (x[k] - y[k]) * (x[k] - y[k]);
    CHECK(hyp_distance(x, y, 1e-10) == doctest::Approx(2.0 * std::sqrt(e)).epsilon(1e-6));
  }
}

TEST_CASE("exp0 / log0 round trip") {
  herc::Rng rng(15);
  for (int i = 0; i < 1000; ++i) {
    const double c = rng.uniform(0.05, 5.0);
    const std::size_t n = (i % 3 == 0) ? 2 : (i % 3 == 1 ? 4 : 10);
    const auto u = random_tangent(rng, n, 1.0);
    const auto back = log0(exp0(u, c), c);
    const double un = std::sqrt(squared_norm(u));
    CHECK(max_abs_diff(back, u) <= 1e-9 * un);
    const auto x = random_ball_point(rng, n, c, 0.9);
    CHECK(max_abs_diff(exp0(log0(x, c), c), x) <= 1e-12 * std::sqrt(squared_norm(x)) + 1e-300);
  }
}

TEST_CASE("exp0 matches an extended-precision reference for tiny and large inputs") {
  for (double scale : {1e-12, 1e-6, 1e-2, 1.0, 10.0}) {
    const Vec u{scale, -0.5 * scale, 0.25 * scale, scale};
    for (double c : {0.05, 1.0, 5.0}) {
      const auto got = exp0(u, c);
      const auto want = herc::oracle::exp0(u, c);
      for (std::size_t i = 0; i < u.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("projection keeps points a fixed margin inside the ball") {
  const auto p = project_to_ball(Vec{2.0, 0.0}, 1.0);
  CHECK(p[0] == doctest::Approx(0.99999).epsilon(1e-15));
  CHECK(p[1] == 0.0);

  const Vec inside{0.3, -0.2};
  CHECK(project_to_ball(inside, 1.0) == inside);

  herc::Rng rng(16);
  for (int i = 0; i < 200; ++i) {
    const double c = rng.uniform(0.05, 5.0);
    const auto v = random_tangent(rng, 10, 5.0);
    const auto q = project_to_ball(v, c);
    CHECK(std::sqrt(c * squared_norm(q)) <= 1.0 - kBallEpsilon + 1e-15);
  }
}

TEST_CASE("Givens rotation and reflection preserve norms and distances") {
  herc::Rng rng(17);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = (i % 3 == 0) ? 2 : (i % 3 == 1 ? 4 : 10);
    const double c = rng.uniform(0.05, 5.0);
    const auto x = random_ball_point(rng, n, c, 0.9);
    const auto y = random_ball_point(rng, n, c, 0.9);
    const auto angles = random_tangent(rng, n / 2, 3.14159);
    for (auto op : {&givens_rotate, &givens_reflect}) {
      const auto gx = op(x, angles), gy = op(y, angles);
      CHECK(squared_norm(gx) == doctest::Approx(squared_norm(x)).epsilon(1e-13));
      CHECK(hyp_distance(gx, gy, c) == doctest::Approx(hyp_distance(x, y, c)).epsilon(1e-9));
    }
  }
}

TEST_CASE("Givens reflection is an involution and rotations compose by adding angles") {
  herc::Rng rng(18);
  for (int i = 0; i < 200; ++i) {
    const auto x = random_tangent(rng, 6, 1.0);
    const auto a = random_tangent(rng, 3, 3.0);
    const auto b = random_tangent(rng, 3, 3.0);
    CHECK(max_abs_diff(givens_reflect(givens_reflect(x, a), a), x) < 1e-15);
    Vec sum(3);
    for (int k = 0; k < 3; ++k) sum[k] = a[k] + b[k];
    CHECK(max_abs_diff(givens_rotate(givens_rotate(x, a), b), givens_rotate(x, sum)) < 1e-14);
    Vec neg = a;
    for (auto& v : neg) v = -v;
    CHECK(max_abs_diff(givens_rotate(givens_rotate(x, a), neg), x) < 1e-15);
  }
}

TEST_CASE("quarter-turn rotation of a unit vector") {
  const auto r = givens_rotate(Vec{1.0, 0.0}, Vec{M_PI / 2});
  CHECK(r[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(1.0));
  const auto f = givens_reflect(Vec{1.0, 0.0}, Vec{0.0});
  CHECK(f == Vec{1.0, 0.0});
  const auto g = givens_reflect(Vec{0.0, 1.0}, Vec{0.0});
  CHECK(g == Vec{0.0, -1.0});
}

TEST_CASE("scalar helpers") {
  CHECK(softplus(0.0) == doctest::Approx(0.69314718055994530942).epsilon(1e-15));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(softplus(-30.0) == doctest::Approx(std::exp(-30.0)).epsilon(1e-12));
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(artanh(0.5) == doctest::Approx(0.54930614433405484570).epsilon(1e-15));
  CHECK(tanh_ratio(0.0) == 1.0);
  CHECK(artanh_ratio(0.0) == 1.0);
  CHECK(tanh_ratio(1e-5) == doctest::Approx(std::tanh(1e-5) / 1e-5).epsilon(1e-15));
  CHECK(artanh_ratio(1e-5) == doctest::Approx(std::atanh(1e-5) / 1e-5).epsilon(1e-15));
}

TEST_CASE("invalid inputs are rejected") {
  CHECK_THROWS_AS(exp0(Vec{1.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(exp0(Vec{1.0}, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(exp0(Vec{std::numeric_limits<double>::quiet_NaN()}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(log0(Vec{1.0, 0.0}, 1.0), std::domain_error);
  CHECK_THROWS_AS(hyp_distance(Vec{0.0}, Vec{2.0}, 1.0), std::domain_error);
  CHECK_THROWS_AS(mobius_add(Vec{0.1, 0.2}, Vec{0.1}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(givens_rotate(Vec{0.1, 0.2, 0.3}, Vec{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(givens_rotate(Vec{0.1, 0.2}, Vec{0.0, 1.0}), std::invalid_argument);
}
