#include <doctest.h>

#include <cmath>
#include <vector>

#include "vmfflow/error.hpp"
#include "vmfflow/flow_field.hpp"
#include "vmfflow/sphere.hpp"

using namespace vmfflow;

namespace {

const VmfTables& tables_d4() {
  static const VmfTables t = [] {
    KernelConfig c;
    c.d = 4;
    c.kappa_max = 30.0;
    return build_tables(c);
  }();
  return t;
}

struct Instance {
  EmbeddingTable emb;
  Matrix x;
  Matrix post;
};

Instance make_instance(const PathKind& kind, int l, int n, int d, Rng& rng) {
  Instance in{init_embeddings(n, d, convention_for(kind), rng), Matrix(l, d), Matrix(l, n)};
  if (kind.spherical()) {
    for (int i = 0; i < l; ++i) sample_uniform_sphere(in.x.row(i), rng);
  } else {
    for (double& v : in.x.flat()) v = 2.0 * rng.normal();
  }
  for (double& v : in.post.flat()) v = rng.normal();
  softmax_rows(in.post, in.post);
  return in;
}

double max_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
  return m;
}

std::vector<PathKind> all_kinds() {
  return {PathKind::vmf(30.0), PathKind::geodesic(), PathKind::vp(), PathKind::ve(5.0)};
}

}  // namespace

TEST_CASE("fused assembly equals the unfused reference") {
  Rng rng(1);
  for (const auto& kind : all_kinds()) {
    const auto in = make_instance(kind, 6, 9, 4, rng);
    const double t = 0.43;
    const auto fused = marginal_velocity(kind, in.post, in.x, t, in.emb, &tables_d4());
    const auto ref = reference::marginal_velocity(kind, in.post, in.x, t, in.emb, &tables_d4());
    CHECK(max_diff(fused, ref) < 1e-12);
    const auto serial = marginal_velocity(kind, in.post, in.x, t, in.emb, &tables_d4(), Exec::Serial);
    CHECK(serial == fused);
    if (kind.has_score()) {
      const auto s = marginal_score(kind, in.post, in.x, t, in.emb);
      const auto sref = reference::marginal_score(kind, in.post, in.x, t, in.emb);
      CHECK(max_diff(s, sref) < 1e-10);
    }
  }
}

TEST_CASE("one-hot posterior gives the conditional field") {
  Rng rng(2);
  for (const auto& kind : all_kinds()) {
    auto in = make_instance(kind, 3, 5, 4, rng);
    in.post.fill(0.0);
    for (int l = 0; l < 3; ++l) in.post(l, (2 * l + 1) % 5) = 1.0;
    const double t = 0.25;
    const auto v = marginal_velocity(kind, in.post, in.x, t, in.emb, &tables_d4());
    std::vector<double> c(4);
    for (int l = 0; l < 3; ++l) {
      conditional_velocity(kind, in.x.row(l), in.emb.vectors.row((2 * l + 1) % 5), t, &tables_d4(), c);
      for (int i = 0; i < 4; ++i) CHECK(v(l, i) == doctest::Approx(c[i]).epsilon(1e-13).scale(1.0));
    }
  }
}

TEST_CASE("spherical fields are tangent") {
  Rng rng(3);
  for (const auto& kind : {PathKind::vmf(30.0), PathKind::geodesic()}) {
    const auto in = make_instance(kind, 8, 6, 4, rng);
    const auto v = marginal_velocity(kind, in.post, in.x, 0.7, in.emb, &tables_d4());
    for (int l = 0; l < 8; ++l) CHECK(std::abs(dot(v.row(l), in.x.row(l))) < 1e-12);
  }
  const auto kind = PathKind::vmf(30.0);
  const auto in = make_instance(kind, 8, 6, 4, rng);
  const auto s = marginal_score(kind, in.post, in.x, 0.7, in.emb);
  for (int l = 0; l < 8; ++l) CHECK(std::abs(dot(s.row(l), in.x.row(l))) < 1e-12);
}

TEST_CASE("ve marginal score with the oracle posterior is the gradient of log p_t") {
  Rng rng(4);
  const auto kind = PathKind::ve(2.0);
  const int n = 5, d = 3;
  const auto emb = init_embeddings(n, d, NormConvention::SqrtD, rng);
  const std::vector<double> pd{0.1, 0.3, 0.2, 0.15, 0.25};
  const auto spec = OracleSpec::joint(n, 1, pd);
  const double t = 0.5, sg = kind.sigma(t);
  // log p_t(x) = log sum_k p_k N(x; w_k, sigma^2 I), written out directly.
  auto log_pt = [&](const std::vector<double>& x) {
    std::vector<double> lw(n);
    double top = -1e300;
    for (int k = 0; k < n; ++k) {
      double r2 = 0.0;
      for (int i = 0; i < d; ++i) r2 += (x[i] - emb.vectors(k, i)) * (x[i] - emb.vectors(k, i));
      lw[k] = std::log(pd[k]) - r2 / (2 * sg * sg);
      top = std::max(top, lw[k]);
    }
    double z = 0.0;
    for (double v : lw) z += std::exp(v - top);
    return top + std::log(z);
  };
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(1, d);
    for (double& v : x.flat()) v = 1.5 * rng.normal();
    const auto post = oracle_posterior(spec, kind, emb, x, t);
    const auto s = marginal_score(kind, post, x, t, emb);
    const double h = 1e-6;
    for (int i = 0; i < d; ++i) {
      std::vector<double> xp(x.flat().begin(), x.flat().end()), xm = xp;
      xp[i] += h;
      xm[i] -= h;
      CHECK(s(0, i) == doctest::Approx((log_pt(xp) - log_pt(xm)) / (2 * h)).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("sde drift") {
  Rng rng(5);
  for (const auto& kind : {PathKind::vmf(30.0), PathKind::vp(), PathKind::ve(5.0)}) {
    const auto in = make_instance(kind, 4, 5, 4, rng);
    const auto v = marginal_velocity(kind, in.post, in.x, 0.3, in.emb, &tables_d4());
    CHECK(sde_drift(kind, in.post, in.x, 0.3, in.emb, &tables_d4(), 0.0) == v);
    const auto s = marginal_score(kind, in.post, in.x, 0.3, in.emb);
    const auto dr = sde_drift(kind, in.post, in.x, 0.3, in.emb, &tables_d4(), 0.8);
    for (std::size_t i = 0; i < v.size(); ++i) {
      CHECK(dr.flat()[i] == doctest::Approx(v.flat()[i] + 0.32 * s.flat()[i]).epsilon(1e-12).scale(1.0));
    }
  }
  const auto kind = PathKind::vmf(30.0);
  const auto in = make_instance(kind, 2, 3, 4, rng);
  CHECK_THROWS_AS(sde_drift(kind, in.post, in.x, 0.3, in.emb, &tables_d4(), -1.0), InvalidConfig);
}

TEST_CASE("kappa increment form of the vmf velocity") {
  Rng rng(6);
  const auto kind = PathKind::vmf(30.0);
  const auto in = make_instance(kind, 3, 4, 4, rng);
  const auto v = marginal_velocity(kind, in.post, in.x, 0.4, in.emb, &tables_d4());
  Matrix out;
  FieldTerms terms;
  terms.kappa_increment = 0.6;
  assemble_field(kind, in.post, in.x, 0.4, in.emb, &tables_d4(), terms, out);
  for (std::size_t i = 0; i < v.size(); ++i) {
    CHECK(out.flat()[i] == doctest::Approx(v.flat()[i] * 0.6 / 30.0).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("field errors") {
  Rng rng(7);
  const auto geo = make_instance(PathKind::geodesic(), 2, 3, 4, rng);
  CHECK_THROWS_AS(marginal_score(PathKind::geodesic(), geo.post, geo.x, 0.5, geo.emb), ScoreUnavailable);
  CHECK_THROWS_AS(sde_drift(PathKind::geodesic(), geo.post, geo.x, 0.5, geo.emb, nullptr, 0.5), ScoreUnavailable);
  const auto v = make_instance(PathKind::vmf(30.0), 2, 3, 4, rng);
  CHECK_THROWS_AS(marginal_velocity(PathKind::vmf(30.0), v.post, v.x, 0.5, v.emb, nullptr), InvalidConfig);
  CHECK_NOTHROW(marginal_score(PathKind::vmf(30.0), v.post, v.x, 0.5, v.emb));
  const auto vp = make_instance(PathKind::vp(), 2, 3, 4, rng);
  CHECK_THROWS_AS(marginal_velocity(PathKind::vp(), vp.post, vp.x, 0.9999, vp.emb, nullptr), TimeSingularity);
  Matrix bad(3, 3);
  CHECK_THROWS_AS(marginal_velocity(PathKind::vp(), bad, vp.x, 0.5, vp.emb, nullptr), InvalidConfig);
}
