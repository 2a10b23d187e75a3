#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "vmfflow/error.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/stats.hpp"

using namespace vmfflow;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("project_tangent examples") {
  const auto e1 = UnitVector::basis(3, 0);
  const auto e2 = UnitVector::basis(3, 1);
  const auto px = project_tangent(e1, e1.coords());
  for (double v : px.coords) CHECK(v == 0.0);

  const auto p2 = project_tangent(e1, e2.coords());
  CHECK(p2.coords == std::vector<double>{0.0, 1.0, 0.0});

  const double th = 0.7;
  const std::vector<double> w{std::cos(th), std::sin(th), 0.0};
  const auto p = project_tangent(e1, w);
  CHECK(p.coords[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(p.coords[1] == doctest::Approx(std::sin(th)).epsilon(1e-15));
}

TEST_CASE("project_tangent is orthogonal on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t d = 2 + rng.index(30);
    const auto x = sample_uniform_sphere(d, rng);
    std::vector<double> w(d);
    rng.fill_normal(w);
    for (double& v : w) v *= 10.0;
    const auto p = project_tangent(x, w);
    CHECK(std::abs(dot(p.coords, x.coords())) < 1e-10);
  }
}

TEST_CASE("retract examples") {
  const auto e1 = UnitVector::basis(3, 0);
  const std::vector<double> zero(3, 0.0);
  CHECK(retract(e1, zero).coords()[0] == 1.0);

  const std::vector<double> e2{0.0, 1.0, 0.0};
  const auto r = retract(e1, e2);
  CHECK(r[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(r[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));

  const std::vector<double> back{-1.0, 0.0, 0.0};
  CHECK_THROWS_AS(retract(e1, back), DegenerateRetraction);
}

TEST_CASE("retract preserves unit norm") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto x = sample_uniform_sphere(7, rng);
    std::vector<double> step(7);
    rng.fill_normal(step);
    CHECK(std::abs(norm(retract(x, step).coords()) - 1.0) < 1e-12);
  }
}

TEST_CASE("uniform sphere sampling") {
  Rng rng(5);
  const int n = 100000;
  std::vector<double> c1(n);
  double mean[3] = {0, 0, 0};
  for (int i = 0; i < n; ++i) {
    const auto x = sample_uniform_sphere(3, rng);
    CHECK(std::abs(norm(x.coords()) - 1.0) < 1e-12);
    for (int j = 0; j < 3; ++j) mean[j] += x[static_cast<std::size_t>(j)] / n;
    c1[static_cast<std::size_t>(i)] = x[0];
  }
  // Each coordinate has variance 1/3.
  const double bound = 3.0 / std::sqrt(3.0 * n);
  for (double m : mean) CHECK(std::abs(m) < bound);
  // d = 3: the cosine to any axis is uniform on [-1, 1].
  CHECK(ks_uniform(c1, -1.0, 1.0) < 0.01);
}

TEST_CASE("tangent gaussian") {
  Rng rng(9);
  const auto x = sample_uniform_sphere(5, rng);
  const int n = 100000;
  std::vector<double> sum(5, 0.0), sq(5, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto v = sample_tangent_gaussian(x, rng);
    CHECK(std::abs(dot(v.coords, x.coords())) < 1e-10);
    for (std::size_t j = 0; j < 5; ++j) {
      sum[j] += v.coords[j];
      sq[j] += v.coords[j] * v.coords[j];
    }
  }
  // Covariance I - x x^T: variance 1 - x_j^2 per coordinate.
  for (std::size_t j = 0; j < 5; ++j) {
    const double var = sq[j] / n - (sum[j] / n) * (sum[j] / n);
    const double expect = 1.0 - x[j] * x[j];
    // stderr of a sample variance of a Gaussian: var sqrt(2/n)
    CHECK(std::abs(var - expect) < 3.0 * std::max(expect, 1e-3) * std::sqrt(2.0 / n) + 1e-12);
  }

  const auto e1 = UnitVector::basis(2, 0);
  const auto v = sample_tangent_gaussian(e1, rng);
  CHECK(v.coords[0] == 0.0);
}

TEST_CASE("slerp examples and properties") {
  const auto e1 = UnitVector::basis(3, 0);
  const auto e2 = UnitVector::basis(3, 1);
  const auto a = slerp(e1, e2, 0.0);
  const auto b = slerp(e1, e2, 1.0);
  CHECK(a[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b[1] == doctest::Approx(1.0).epsilon(1e-15));
  const auto m = slerp(e1, e2, 0.5);
  CHECK(m[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(m[1] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-14));

  const UnitVector neg(std::vector<double>{-1.0, 0.0, 0.0});
  CHECK_THROWS_AS(slerp(e1, neg, 0.5), AntipodalPoints);
  // Below the coincidence threshold the endpoint is returned.
  const UnitVector near(std::vector<double>{1.0, 1e-10, 0.0});
  CHECK(slerp(e1, near, 0.3)[1] == near[1]);

  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x0 = sample_uniform_sphere(6, rng);
    const auto x1 = sample_uniform_sphere(6, rng);
    const double theta = std::acos(std::clamp(dot(x0.coords(), x1.coords()), -1.0, 1.0));
    const double t = rng.uniform();
    const auto s = slerp(x0, x1, t);
    CHECK(std::abs(norm(s.coords()) - 1.0) < 1e-10);
    CHECK(std::abs(dot(x1.coords(), s.coords()) - std::cos((1.0 - t) * theta)) < 1e-9);
  }
}
