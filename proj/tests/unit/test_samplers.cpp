#include <doctest.h>

#include <cmath>
#include <vector>

#include "vmfflow/error.hpp"
#include "vmfflow/samplers.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/stats.hpp"

using namespace vmfflow;

namespace {

const VmfTables& tables_d3() {
  static const VmfTables t = build_tables(KernelConfig{});
  return t;
}

EmbeddingTable basis_table(int n, int d) {
  EmbeddingTable e{Matrix(n, d), std::vector<double>(n, 0.0), NormConvention::Unit};
  for (int k = 0; k < n; ++k) e.vectors(k, k % d) = 1.0;
  return e;
}

// vMF cosine CDF on S^2: (exp(k s) - exp(-k)) / (exp(k) - exp(-k)).
double vmf3_cdf(double k, double s) { return std::expm1(k * (s + 1.0)) / std::expm1(2.0 * k); }

struct TinyOracle {
  OracleSource source;
  EmbeddingTable emb;
  SamplerContext ctx;
  explicit TinyOracle(const PathKind& kind)
      : source(OracleSpec::factorized({{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}}), kind, basis_table(3, 3)),
        emb(basis_table(3, 3)) {
    ctx = SamplerContext{kind, &emb, &tables_d3(), &source, nullptr, 3};
  }
};

double state_distance(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.flat()[i] - b.flat()[i]));
  return m;
}

}  // namespace

TEST_CASE("time grids") {
  SamplerConfig c;
  c.n_predictor = 128;
  const auto g = time_grid(c, nullptr);
  REQUIRE(g.size() == 129);
  for (std::size_t i = 0; i + 1 < g.size(); ++i) CHECK(g[i + 1] - g[i] == 1.0 / 128);
  c.warp_aware = true;
  const auto id = WarpSchedule::identity(10);
  const auto gi = time_grid(c, &id);
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(gi[i] == doctest::Approx(g[i]).epsilon(1e-12));
  const WarpSchedule two({std::log(0.5), std::log(0.5)}, {std::log(0.2), std::log(0.8)});
  c.n_predictor = 5;
  const auto gw = time_grid(c, &two);
  CHECK(gw[1] == doctest::Approx(0.5).epsilon(1e-12));
  for (std::size_t i = 0; i + 1 < gw.size(); ++i) CHECK(gw[i + 1] > gw[i]);
}

TEST_CASE("effective epsilon") {
  SamplerConfig c;
  c.epsilon = 0.2;
  c.damping = true;
  const auto kind = PathKind::vmf(50.0);
  CHECK(effective_epsilon(c, kind, 0.0) == 0.2);
  CHECK(effective_epsilon(c, kind, 0.5) == doctest::Approx(0.05).epsilon(1e-14));
  CHECK(effective_epsilon(c, kind, 1.0) == 0.0);
  CHECK_THROWS_AS(effective_epsilon(c, PathKind::geodesic(), 0.5), ProgressUnavailable);
  c.damping = false;
  CHECK(effective_epsilon(c, kind, 0.9) == 0.2);
  CHECK(effective_epsilon(c, PathKind::geodesic(), 0.9) == 0.2);
}

TEST_CASE("config validation and nfe") {
  SamplerConfig c;
  c.n_predictor = 32;
  c.k_corrector = 3;
  CHECK(c.nfe() == 128);
  CHECK_THROWS_AS(c.validate(PathKind::geodesic()), ScoreUnavailable);
  c.k_corrector = 0;
  c.sigma = 0.5;
  CHECK_THROWS_AS(c.validate(PathKind::geodesic()), ScoreUnavailable);
  c.sigma = 0.0;
  CHECK_NOTHROW(c.validate(PathKind::geodesic()));
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(PathKind::vmf(1.0)), InvalidConfig);
  c.epsilon = 1e-3;
  c.n_predictor = 0;
  CHECK_THROWS_AS(c.validate(PathKind::vmf(1.0)), InvalidConfig);
  SamplerConfig f;
  f.warp_aware = f.damping = true;
  CHECK(f.flags() == "wd");
}

TEST_CASE("euler and langevin steps") {
  const auto kind = PathKind::vmf(50.0);
  const auto emb = basis_table(1, 3);
  Matrix post(1, 1, 1.0);
  Matrix x(1, 3);
  x(0, 0) = 1.0;
  const auto before = x;
  euler_step(kind, x, post, 0.3, 0.01, emb, &tables_d3());
  CHECK(x == before);
  CHECK_THROWS_AS(euler_step(kind, x, post, 0.3, 0.0, emb, &tables_d3()), InvalidConfig);

  Rng rng(1);
  Matrix y(1, 3);
  sample_uniform_sphere(y.row(0), rng);
  auto y0 = y;
  langevin_step(kind, y, post, 0.5, 0.0, emb, rng);
  CHECK(y == y0);
  for (int i = 0; i < 20; ++i) {
    const double c0 = y(0, 0);
    langevin_step(kind, y, post, 0.5, 1e-3, emb, rng, false);
    CHECK(y(0, 0) > c0);
    CHECK(std::abs(norm(y.row(0)) - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(langevin_step(PathKind::geodesic(), y, post, 0.5, 1e-3, emb, rng), ScoreUnavailable);
}

TEST_CASE("euler transport reaches the vmf terminal law") {
  // N = 1: the marginal flow is the conditional one, so the terminal cosine
  // must follow vMF(kappa_max) on S^2.
  const auto kind = PathKind::vmf(50.0);
  const OracleSource src(OracleSpec::joint(1, 1, {1.0}), kind, basis_table(1, 3));
  const auto emb = basis_table(1, 3);
  const SamplerContext ctx{kind, &emb, &tables_d3(), &src, nullptr, 3};
  SamplerConfig c;
  c.n_predictor = 512;
  c.seed = 3;
  const auto res = sample_batch(ctx, c, 10000);
  std::vector<double> cs;
  for (const auto& r : res) {
    CHECK(std::abs(norm(r.state.row(0)) - 1.0) < 1e-10);
    cs.push_back(r.state(0, 0));
  }
  const auto ms = mean_stderr(cs);
  const double a = 1.0 / std::tanh(50.0) - 1.0 / 50.0;
  CHECK(ms.mean >= a - 0.05);
  // The law itself needs a finer grid: Euler error in KS is O(1/n).
  c.n_predictor = 2048;
  cs.clear();
  for (const auto& r : sample_batch(ctx, c, 10000)) cs.push_back(r.state(0, 0));
  CHECK(ks_statistic(cs, [](double s) { return vmf3_cdf(50.0, s); }) < 1.63 / std::sqrt(10000.0));
}

TEST_CASE("langevin leaves the vmf law invariant") {
  const auto kind = PathKind::vmf(50.0);
  const double t = 0.1;  // kappa_t = 5
  const auto emb = basis_table(1, 3);
  Matrix post(1, 1, 1.0);
  const int chains = 10000;
  std::vector<double> cs(chains);
  for (int i = 0; i < chains; ++i) {
    Rng rng = Rng::stream(77, i);
    Matrix x(1, 3);
    sample_vmf(emb.vectors.row(0), 5.0, tables_d3().cdf, rng, x.row(0));
    for (int s = 0; s < 500; ++s) langevin_step(kind, x, post, t, 1e-3, emb, rng);
    cs[i] = x(0, 0);
  }
  CHECK(ks_statistic(cs, [](double s) { return vmf3_cdf(5.0, s); }) < 0.03);
}

TEST_CASE("pc loop structure") {
  TinyOracle o(PathKind::vmf(50.0));
  SamplerConfig c;
  c.n_predictor = 16;
  c.seed = 5;

  SUBCASE("k = 0 is the predictor-only loop") {
    Rng r1(9), r2(9);
    const auto res = pc_sample(o.ctx, c, nullptr, r1);
    Matrix x(2, 3);
    sample_prior(o.ctx.kind, r2, x);
    for (int i = 0; i < 16; ++i) {
      const double t = i / 16.0;
      const auto p = o.source.posterior(x, t);
      euler_step(o.ctx.kind, x, p, t, (i + 1) / 16.0 - t, o.emb, &tables_d3());
    }
    CHECK(res.state == x);
    Matrix logits;
    o.source.logits(x, 1.0, logits);
    CHECK(res.tokens == argmax_rows(logits));
  }
  SUBCASE("nfe accounting") {
    for (auto [n, k] : {std::pair{64, 1}, {32, 3}, {16, 7}}) {
      c.n_predictor = n;
      c.k_corrector = k;
      CountingSource counting(o.source);
      SamplerContext ctx = o.ctx;
      ctx.source = &counting;
      Rng rng(1);
      const auto res = pc_sample(ctx, c, nullptr, rng);
      CHECK(res.nfe_used == 128);
      CHECK(counting.calls() == 129);
    }
  }
  SUBCASE("sde with sigma = 0 follows the ode trajectory") {
    Rng r1(4), r2(4);
    const auto a = pc_sample(o.ctx, c, nullptr, r1);
    const auto b = sde_sample(o.ctx, c, nullptr, r2);
    CHECK(a.state == b.state);
    CHECK(a.tokens == b.tokens);
  }
  SUBCASE("sde keeps unit norm") {
    c.sigma = 0.5;
    Rng rng(4);
    const auto r = sde_sample(o.ctx, c, nullptr, rng);
    for (int l = 0; l < 2; ++l) CHECK(std::abs(norm(r.state.row(l)) - 1.0) < 1e-10);
  }
  SUBCASE("pc converges to the ode as epsilon vanishes") {
    c.n_predictor = 32;
    Rng r0(12);
    const auto ode = pc_sample(o.ctx, c, nullptr, r0);
    c.k_corrector = 1;
    std::vector<double> dist;
    for (double eps : {1e-2, 1e-4, 1e-6}) {
      c.epsilon = eps;
      Rng r(12);
      dist.push_back(state_distance(pc_sample(o.ctx, c, nullptr, r).state, ode.state));
    }
    CHECK(dist[1] < dist[0]);
    CHECK(dist[2] < dist[1]);
    CHECK(dist[2] < 1e-2);
  }
  SUBCASE("geodesic rejects a corrector") {
    TinyOracle g(PathKind::geodesic());
    c.k_corrector = 1;
    Rng rng(1);
    CHECK_THROWS_AS(pc_sample(g.ctx, c, nullptr, rng), ScoreUnavailable);
  }
}

TEST_CASE("batches are deterministic and thread-count independent") {
  TinyOracle o(PathKind::vmf(50.0));
  SamplerConfig c;
  c.n_predictor = 16;
  c.k_corrector = 1;
  c.epsilon = 1e-2;
  c.seed = 99;
  const auto a = sample_batch(o.ctx, c, 40, {}, Exec::Serial);
  const auto b = sample_batch(o.ctx, c, 40, {}, Exec::Parallel);
  const auto d = sample_batch(o.ctx, c, 40);
  for (int i = 0; i < 40; ++i) {
    CHECK(a[i].state == b[i].state);
    CHECK(a[i].tokens == d[i].tokens);
  }
}

TEST_CASE("euclidean paths sample from their priors") {
  for (const auto& kind : {PathKind::vp(), PathKind::ve(5.0)}) {
    TinyOracle o(kind);
    o.emb.convention = convention_for(kind);
    SamplerConfig c;
    c.n_predictor = 64;
    Rng rng(2);
    const auto r = pc_sample(o.ctx, c, nullptr, rng);
    for (double v : r.state.flat()) CHECK(std::isfinite(v));
    CHECK(r.tokens.size() == 2);
  }
}

TEST_CASE("clue pinning") {
  TinyOracle o(PathKind::vmf(50.0));
  ClueMask clues{{true, false}, {2, 0}};
  SamplerConfig c;
  c.n_predictor = 16;
  c.k_corrector = 1;
  c.epsilon = 1e-2;
  for (int s = 0; s < 20; ++s) {
    Rng rng(s);
    const auto r = pc_sample(o.ctx, c, &clues, rng);
    CHECK(r.tokens[0] == 2);
    for (int i = 0; i < 3; ++i) CHECK(r.state(0, i) == o.emb.vectors(2, i));
  }
  Matrix st(2, 3, 0.5);
  apply_clues(clues, o.emb, st);
  CHECK(st(0, 2) == 1.0);
  CHECK(st(1, 0) == 0.5);
}

TEST_CASE("decode") {
  Rng rng(3);
  auto emb = init_embeddings(6, 4, NormConvention::Unit, rng);
  Matrix xh(6, 4);
  for (int j = 0; j < 6; ++j) {
    for (int i = 0; i < 4; ++i) xh(j, i) = emb.vectors(j, i);
  }
  const auto tok = decode(emb, xh);
  for (int j = 0; j < 6; ++j) CHECK(tok[j] == j);

  Matrix zero(2, 4, 0.0);
  CHECK(decode(emb, zero) == std::vector<int>{0, 0});
  emb.biases[4] = 10.0;
  CHECK(decode(emb, xh) == std::vector<int>(6, 4));
}
