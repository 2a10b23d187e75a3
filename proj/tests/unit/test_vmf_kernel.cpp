#include <doctest.h>

#include <cmath>
#include <vector>

#include "vmfflow/error.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/stats.hpp"
#include "vmfflow/vmf_kernel.hpp"

using namespace vmfflow;

namespace {

// A_d(k) from the library Bessel functions of the standard library.
double bessel_oracle(int d, double k) {
  return std::cyl_bessel_i(0.5 * d, k) / std::cyl_bessel_i(0.5 * d - 1.0, k);
}

// Composite Simpson integral of (1 - s^2)^((d-3)/2) exp(k (s - 1)) over [a, b].
double radial_mass(int d, double k, double a, double b, int n = 200000) {
  auto f = [&](double s) {
    const double q = std::max(0.0, 1.0 - s * s);
    return std::pow(q, 0.5 * (d - 3)) * std::exp(k * (s - 1.0));
  };
  const double h = (b - a) / n;
  double sum = f(a) + f(b);
  for (int i = 1; i < n; ++i) sum += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

const VmfTables& tables_d3() {
  static const VmfTables t = build_tables(KernelConfig{});
  return t;
}

}  // namespace

TEST_CASE("bessel ratio examples") {
  for (int d : {2, 3, 10, 64}) CHECK(bessel_ratio(d, 0.0) == 0.0);
  CHECK(std::abs(bessel_ratio(10, 0.01) - 0.001) < 1e-6);
  CHECK(std::abs(bessel_ratio(3, 1.0) - (1.0 / std::tanh(1.0) - 1.0)) < 1e-13);
  CHECK(std::abs(bessel_ratio(3, 1.0) - 0.3130352855) < 1e-10);
}

TEST_CASE("bessel ratio matches std::cyl_bessel_i") {
  for (int d : {2, 3, 5, 8, 16}) {
    for (double k : {0.3, 2.0, 10.0, 40.0}) {
      CHECK(bessel_ratio(d, k) == doctest::Approx(bessel_oracle(d, k)).epsilon(1e-11));
    }
  }
}

TEST_CASE("bessel ratio is increasing and below one") {
  double prev = -1.0;
  for (int j = 0; j <= 2000; ++j) {
    const double a = bessel_ratio(8, 0.5 * j);
    CHECK(a > prev);
    CHECK(a < 1.0);
    prev = a;
  }
}

TEST_CASE("bessel ratio reports non-convergence") {
  CHECK_THROWS_AS(bessel_ratio(3, 1.0, -1.0), NoConvergence);
  CHECK_THROWS_AS(bessel_ratio(3, -1.0), InvalidConfig);
}

TEST_CASE("log radial density examples") {
  CHECK(log_radial_density(0.0, 0.0, 3) == 0.0);
  CHECK(log_radial_density(0.5, 2.0, 3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(log_radial_density(0.6, 0.0, 5) == doctest::Approx(std::log(0.64)).epsilon(1e-14));
  CHECK(log_radial_density(1.0, 3.0, 8) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("psi table closed forms") {
  for (int d : {3, 5, 12}) {
    KernelConfig c;
    c.d = d;
    const auto t = build_psi_table(c);
    for (int i = 0; i < c.n_mu; ++i) {
      CHECK(std::abs(t.at(i, 0) - 1.0 / (d - 1)) < 1e-9);
      // kappa = 0 column is even in mu.
      CHECK(std::abs(t.at(i, 0) - t.at(c.n_mu - 1 - i, 0)) < 1e-9);
    }
    for (double v : t.values) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
  }
  KernelConfig c;
  c.d = 3;
  const auto t = build_psi_table(c);
  for (double mu : {-1.0, -0.3, 0.0, 0.77, 1.0}) CHECK(std::abs(psi_lookup(t, mu, 0.0) - 0.5) < 1e-6);
}

TEST_CASE("psi boundary values") {
  // kappa_max chosen so that kappa = 5 falls on a grid node (step 0.1).
  KernelConfig c;
  c.d = 8;
  c.kappa_max = 51.1;
  const auto t = build_psi_table(c);
  CHECK(std::abs(c.kappa_step() - 0.1) < 1e-14);
  const double a5 = bessel_oracle(8, 5.0);
  CHECK(std::abs(t.at(c.n_mu - 1, 50) - (1.0 - a5) / 7.0) < 1e-8);
  CHECK(std::abs(t.at(0, 50) - (1.0 + a5) / 7.0) < 1e-8);
  const double amax = bessel_oracle(8, c.kappa_max);
  CHECK(std::abs(psi_lookup(t, 1.0, c.kappa_max) - (1.0 - amax) / 7.0) < 1e-6);
  // Node lookup returns the stored value.
  CHECK(psi_lookup(t, c.mu_at(100), 50 * c.kappa_step()) == t.at(100, 50));
}

TEST_CASE("psi table converges under refinement") {
  KernelConfig coarse;
  coarse.d = 8;
  KernelConfig fine = coarse;
  fine.n_mu = 4 * coarse.n_mu;
  fine.n_kappa = 4 * coarse.n_kappa;
  const auto a = build_psi_table(coarse);
  const auto b = build_psi_table(fine);
  double worst = 0.0;
  for (int j = 0; j < coarse.n_kappa; j += 7) {
    const double k = j * coarse.kappa_step();
    for (int i = 0; i < coarse.n_mu; ++i) {
      const double mu = coarse.mu_at(i);
      if (std::abs(mu) > 0.99) continue;
      worst = std::max(worst, std::abs(a.at(i, j) - psi_lookup(b, mu, k)));
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("radial cdf table") {
  const auto& cdf = tables_d3().cdf;
  const auto& c = cdf.config;
  for (int i = 0; i < c.n_mu; ++i) CHECK(std::abs(cdf.cdf_at(i, 0) - (c.mu_at(i) + 1.0) / 2.0) < 1e-6);
  for (int j = 0; j < c.n_kappa; ++j) {
    CHECK(cdf.cdf_at(0, j) == 0.0);
    CHECK(cdf.cdf_at(c.n_mu - 1, j) == 1.0);
    for (int i = 1; i < c.n_mu; ++i) CHECK(cdf.cdf_at(i, j) >= cdf.cdf_at(i - 1, j));
  }

  KernelConfig c8;
  c8.d = 8;
  const auto t8 = build_cdf_table(c8);
  const double a = bessel_ratio(8, 20.0);
  const double exact = radial_mass(8, 20.0, -1.0, a) / radial_mass(8, 20.0, -1.0, 1.0);
  const double got = cdf_lookup(t8, a, 20.0);
  CHECK(got > 0.3);
  CHECK(got < 0.7);
  CHECK(std::abs(got - exact) < 1e-4);
}

TEST_CASE("sample_cosine") {
  const auto& cdf = tables_d3().cdf;
  const double tol = 2.0 / cdf.config.n_mu;
  CHECK(sample_cosine(cdf, 7.0, 0.0) == -1.0);
  CHECK(sample_cosine(cdf, 7.0, std::nextafter(1.0, 0.0)) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(sample_cosine(cdf, 0.0, 0.75) - 0.5) < tol);
  for (double k : {0.0, 3.3, 20.0, 50.0}) {
    for (double u : {0.01, 0.2, 0.5, 0.9, 0.999}) {
      CHECK(std::abs(cdf_lookup(cdf, sample_cosine(cdf, k, u), k) - u) < tol);
    }
  }
}

TEST_CASE("vmf sampling moments and laws") {
  SUBCASE("mean cosine at d=8, kappa=10") {
    KernelConfig c;
    c.d = 8;
    const auto cdf = build_cdf_table(c);
    const auto w = UnitVector::basis(8, 2);
    std::vector<double> cs(100000), x(8);
    for (std::size_t i = 0; i < cs.size(); ++i) {
      Rng rng = Rng::stream(21, i);
      sample_vmf(w.coords(), 10.0, cdf, rng, x);
      cs[i] = x[2];
    }
    const auto ms = mean_stderr(cs);
    CHECK(std::abs(ms.mean - bessel_oracle(8, 10.0)) < 3.0 * ms.stderr_);
  }
  SUBCASE("kappa=0 is uniform, d=5") {
    KernelConfig c;
    c.d = 5;
    const auto cdf = build_cdf_table(c);
    const auto w = UnitVector::basis(5, 0);
    std::vector<double> cs(100000), x(5);
    Rng rng(4);
    for (double& s : cs) {
      sample_vmf(w.coords(), 0.0, cdf, rng, x);
      s = x[0];
    }
    // Cosine density on S^4 is (3/4)(1 - s^2).
    const double ks = ks_statistic(cs, [](double s) { return (2.0 + 3.0 * s - s * s * s) / 4.0; });
    CHECK(ks < 1.95 / std::sqrt(100000.0));
  }
  SUBCASE("kappa=250, d=16 concentrates") {
    KernelConfig c;
    c.d = 16;
    c.kappa_max = 250.0;
    const auto cdf = build_cdf_table(c);
    const auto w = UnitVector::basis(16, 0);
    std::vector<double> x(16);
    Rng rng(8);
    int above = 0;
    for (int i = 0; i < 20000; ++i) {
      sample_vmf(w.coords(), 250.0, cdf, rng, x);
      above += x[0] > 0.9 ? 1 : 0;
      double n2 = 0.0;
      for (double v : x) n2 += v * v;
      CHECK(std::abs(std::sqrt(n2) - 1.0) < 1e-12);
    }
    CHECK(above >= 0.99 * 20000);
  }
}

TEST_CASE("kernel config validation") {
  KernelConfig c;
  c.n_mu = 10;
  CHECK_THROWS_AS(build_psi_table(c), InvalidConfig);
  c = KernelConfig{};
  c.kappa_max = 0.0;
  CHECK_THROWS_AS(build_cdf_table(c), InvalidConfig);
}
