#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "vmfflow/error.hpp"
#include "vmfflow/paths.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/stats.hpp"

using namespace vmfflow;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

const VmfTables& tables_d3() {
  static const VmfTables t = build_tables(KernelConfig{});
  return t;
}

std::vector<double> random_point(std::size_t d, Rng& rng) {
  std::vector<double> x(d);
  sample_uniform_sphere(x, rng);
  return x;
}

}  // namespace

TEST_CASE("path kinds parse and validate") {
  for (const char* n : {"vmf", "geodesic", "vp", "ve"}) CHECK(PathKind::parse(n, 10.0, 5.0).name() == n);
  CHECK_THROWS_AS(PathKind::parse("euclid", 1.0, 1.0), InvalidConfig);
  CHECK_THROWS_AS(PathKind::parse("vmf", 0.0, 1.0), InvalidConfig);
  CHECK_THROWS_AS(PathKind::parse("ve", 1.0, 1e-3), InvalidConfig);
  CHECK(PathKind::vmf(3.0).spherical());
  CHECK_FALSE(PathKind::vp().spherical());
  CHECK_FALSE(PathKind::geodesic().has_score());
  CHECK(PathKind::ve(1.0).embedding_norm(16) == 4.0);
}

TEST_CASE("ve schedule is geometric between sigma_max and the floor") {
  const auto ve = PathKind::ve(10.0);
  CHECK(ve.sigma(0.0) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(ve.sigma(1.0) == doctest::Approx(1e-3).epsilon(1e-12));
  CHECK(ve.sigma(0.5) == doctest::Approx(std::sqrt(10.0 * 1e-3)).epsilon(1e-12));
  for (double t = 0.0; t < 1.0; t += 0.05) CHECK(ve.sigma(t + 0.05) < ve.sigma(t));
  const double h = 1e-6;
  const double fd = (std::log(ve.sigma(0.3 + h)) - std::log(ve.sigma(0.3 - h))) / (2 * h);
  CHECK(ve.log_sigma_rate() == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("progress") {
  CHECK(progress(PathKind::vmf(50.0), 0.3) == doctest::Approx(0.3));
  CHECK(progress(PathKind::vp(), 0.7) == 0.7);
  const auto ve = PathKind::ve(10.0);
  CHECK(progress(ve, 0.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(progress(ve, 1.0) == doctest::Approx(1.0 - 1e-4));
  CHECK_THROWS_AS(progress(PathKind::geodesic(), 0.5), ProgressUnavailable);
}

TEST_CASE("geodesic speed") {
  CHECK(geodesic_speed(1.0, 0.0) == 1.0);
  CHECK(geodesic_speed(1.0, 0.5) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(geodesic_speed(0.0, 0.5) == doctest::Approx(std::numbers::pi).epsilon(1e-12));
  CHECK_THROWS_AS(geodesic_speed(0.5, 1.0), TimeSingularity);
}

TEST_CASE("conditional velocities are time derivatives of the paths") {
  Rng rng(17);
  const double h = 1e-6;
  SUBCASE("geodesic") {
    for (int trial = 0; trial < 50; ++trial) {
      const auto x0 = random_point(5, rng);
      const auto w = random_point(5, rng);
      const double t = 0.05 + 0.9 * rng.uniform();
      std::vector<double> xt(5), xp(5), xm(5), v(5);
      slerp(x0, w, t, xt);
      slerp(x0, w, t + h, xp);
      slerp(x0, w, t - h, xm);
      conditional_velocity(PathKind::geodesic(), xt, w, t, nullptr, v);
      for (int i = 0; i < 5; ++i) CHECK(v[i] == doctest::Approx((xp[i] - xm[i]) / (2 * h)).epsilon(1e-5).scale(1.0));
    }
  }
  SUBCASE("vp") {
    const auto w = random_point(4, rng);
    std::vector<double> eps(4), xt(4), v(4);
    rng.fill_normal(eps);
    const double t = 0.4;
    for (int i = 0; i < 4; ++i) xt[i] = (1 - t) * eps[i] + t * w[i];
    conditional_velocity(PathKind::vp(), xt, w, t, nullptr, v);
    for (int i = 0; i < 4; ++i) CHECK(v[i] == doctest::Approx(w[i] - eps[i]).epsilon(1e-12));
    CHECK_THROWS_AS(conditional_velocity(PathKind::vp(), xt, w, 0.9995, nullptr, v), TimeSingularity);
  }
  SUBCASE("ve") {
    const auto ve = PathKind::ve(8.0);
    const auto w = random_point(4, rng);
    std::vector<double> eps(4), xt(4), v(4);
    rng.fill_normal(eps);
    const double t = 0.6;
    for (int i = 0; i < 4; ++i) xt[i] = w[i] + ve.sigma(t) * eps[i];
    conditional_velocity(ve, xt, w, t, nullptr, v);
    for (int i = 0; i < 4; ++i) {
      const double fd = (ve.sigma(t + h) - ve.sigma(t - h)) / (2 * h) * eps[i];
      CHECK(v[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("vmf velocity is tangent and vanishes at the target") {
  const auto& tb = tables_d3();
  const auto kind = PathKind::vmf(50.0);
  Rng rng(5);
  std::vector<double> v(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto x = random_point(3, rng);
    const auto w = random_point(3, rng);
    const double t = rng.uniform();
    conditional_velocity(kind, x, w, t, &tb, v);
    CHECK(std::abs(dot(v, x)) < 1e-12);
    // Points toward w.
    CHECK(dot(v, w) >= -1e-12);
    conditional_velocity(kind, w, w, t, &tb, v);
    for (double c : v) CHECK(std::abs(c) < 1e-12);
  }
  CHECK_THROWS_AS(conditional_velocity(kind, random_point(3, rng), random_point(3, rng), 0.5, nullptr, v),
                  InvalidConfig);
}

TEST_CASE("scores are gradients of the log likelihood") {
  Rng rng(23);
  const double h = 1e-6;
  SUBCASE("euclidean paths") {
    for (const auto& kind : {PathKind::vp(), PathKind::ve(5.0)}) {
      std::vector<double> w(4), x(4), s(4);
      rng.fill_normal(w);
      rng.fill_normal(x);
      const double t = 0.35;
      conditional_score(kind, x, w, t, s);
      for (int i = 0; i < 4; ++i) {
        auto xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        const double fd = (conditional_log_likelihood(kind, xp, w, t) - conditional_log_likelihood(kind, xm, w, t)) / (2 * h);
        CHECK(s[i] == doctest::Approx(fd).epsilon(1e-6));
      }
    }
  }
  SUBCASE("vmf riemannian score") {
    const auto kind = PathKind::vmf(30.0);
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = random_point(6, rng);
      const auto w = random_point(6, rng);
      const double t = rng.uniform();
      std::vector<double> s(6), u(6), xp(6), xm(6);
      conditional_score(kind, x, w, t, s);
      CHECK(std::abs(dot(s, x)) < 1e-12);
      rng.fill_normal(u);
      project_tangent(x, u, u);
      xp = x;
      xm = x;
      std::vector<double> up(6), um(6);
      for (int i = 0; i < 6; ++i) {
        up[i] = h * u[i];
        um[i] = -h * u[i];
      }
      retract_inplace(xp, up);
      retract_inplace(xm, um);
      // Closed-form vMF log-density kappa_t <w, x>.
      const double fd = 30.0 * t * (dot(w, xp) - dot(w, xm)) / (2 * h);
      CHECK(dot(s, u) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
  }
  std::vector<double> x{1, 0, 0}, w{0, 1, 0}, s(3);
  CHECK_THROWS_AS(conditional_score(PathKind::geodesic(), x, w, 0.5, s), ScoreUnavailable);
}

TEST_CASE("geodesic likelihood normalizes on S^2") {
  // Integrate exp(log p) over the sphere in polar angle; the result must not
  // depend on t once the constant -log(4 pi) is restored.
  const std::vector<double> w{1.0, 0.0, 0.0};
  for (double t : {0.0, 0.3, 0.7, 0.95}) {
    const int n = 200000;
    const double top = (1.0 - t) * std::numbers::pi;
    const double hstep = top / n;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double phi = (i + 0.5) * hstep;
      const std::vector<double> x{std::cos(phi), std::sin(phi), 0.0};
      total += 2.0 * std::numbers::pi * std::sin(phi) * std::exp(conditional_log_likelihood(PathKind::geodesic(), x, w, t)) * hstep;
    }
    CHECK(total / (4.0 * std::numbers::pi) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("corrupt draws match the path marginals") {
  const auto& tb = tables_d3();
  const int n = 50000;
  const std::vector<double> w{0.0, 0.6, 0.8};
  SUBCASE("vmf mean cosine") {
    std::vector<double> cs(n), x(3);
    for (int i = 0; i < n; ++i) {
      Rng rng = Rng::stream(31, i);
      corrupt(PathKind::vmf(50.0), w, 0.2, &tb, rng, x);
      cs[i] = dot(x, w);
    }
    const auto ms = mean_stderr(cs);
    // A_3(10) = coth(10) - 1/10.
    CHECK(std::abs(ms.mean - (1.0 / std::tanh(10.0) - 0.1)) < 3.0 * ms.stderr_);
  }
  SUBCASE("geodesic at t = 0 is uniform") {
    std::vector<double> cs(n), x(3);
    Rng rng(2);
    for (int i = 0; i < n; ++i) {
      corrupt(PathKind::geodesic(), w, 0.0, nullptr, rng, x);
      cs[i] = dot(x, w);
    }
    CHECK(ks_uniform(cs, -1.0, 1.0) < 1.95 / std::sqrt(double(n)));
  }
  SUBCASE("vp and ve moments") {
    std::vector<double> a(n), b(n), x(3);
    Rng rng(3);
    const auto ve = PathKind::ve(2.0);
    for (int i = 0; i < n; ++i) {
      corrupt(PathKind::vp(), w, 0.25, nullptr, rng, x);
      a[i] = x[2];
      corrupt(ve, w, 0.5, nullptr, rng, x);
      b[i] = x[1];
    }
    const auto ma = mean_stderr(a);
    const auto mb = mean_stderr(b);
    CHECK(std::abs(ma.mean - 0.25 * 0.8) < 3.0 * ma.stderr_);
    CHECK(std::abs(mb.mean - 0.6) < 3.0 * mb.stderr_);
    // stderr * sqrt(n) is the sample standard deviation.
    CHECK(ma.stderr_ * std::sqrt(double(n)) == doctest::Approx(0.75).epsilon(0.02));
    CHECK(mb.stderr_ * std::sqrt(double(n)) == doctest::Approx(ve.sigma(0.5)).epsilon(0.02));
  }
}

TEST_CASE("expected cosine curves") {
  const auto& tb = tables_d3();
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto c = expected_cosine_curves(PathKind::vmf(50.0), 3, grid, 20000, &tb, 4);
  CHECK(std::abs(c.mean[0]) < 3.0 * c.stderr_[0]);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(c.mean[i] > c.mean[i - 1]);
    const double k = 50.0 * grid[i];
    CHECK(std::abs(c.mean[i] - (1.0 / std::tanh(k) - 1.0 / k)) < 4.0 * c.stderr_[i] + 1e-3);
  }
  const auto g = expected_cosine_curves(PathKind::geodesic(), 3, grid, 20000, nullptr, 4);
  CHECK(g.mean.back() == doctest::Approx(1.0));
  CHECK_THROWS_AS(expected_cosine_curves(PathKind::vp(), 3, grid, 10, nullptr, 1), InvalidConfig);
}

TEST_CASE("ve input preconditioning") {
  const auto ve = PathKind::ve(3.0);
  std::vector<double> x{3.0, 4.0}, out(2);
  precondition_input(ve, x, 0.0, out);
  CHECK(out[0] == doctest::Approx(3.0 / std::sqrt(10.0)));
  precondition_input(PathKind::vp(), x, 0.0, out);
  CHECK(out[1] == 4.0);
}
