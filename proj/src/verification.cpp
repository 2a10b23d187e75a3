#include "vmfflow/verification.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <json.hpp>

#include "vmfflow/error.hpp"
#include "vmfflow/flow_field.hpp"
#include "vmfflow/paths.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/stats.hpp"
#include "vmfflow/training.hpp"

namespace vmfflow {

const Metric& DiagnosticReport::add(std::string metric, double value, std::string op, double threshold) {
  bool pass = false;
  if (op == "<") pass = value < threshold;
  else if (op == "<=") pass = value <= threshold;
  else if (op == ">") pass = value > threshold;
  else if (op == ">=") pass = value >= threshold;
  else throw InvalidConfig("unknown comparison " + op);
  metrics.push_back({std::move(metric), value, std::move(op), threshold, pass});
  return metrics.back();
}

bool DiagnosticReport::passed() const {
  return std::all_of(metrics.begin(), metrics.end(), [](const Metric& m) { return m.pass; });
}

std::string DiagnosticReport::to_json() const {
  nlohmann::ordered_json j;
  j["check"] = name;
  j["pass"] = passed();
  auto& p = j["params"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : params) p[k] = v;
  auto& ms = j["metrics"] = nlohmann::ordered_json::array();
  for (const auto& m : metrics) {
    ms.push_back({{"name", m.name}, {"value", m.value}, {"op", m.op}, {"threshold", m.threshold}, {"pass", m.pass}});
  }
  return j.dump();
}

// ---- psi ODE ------------------------------------------------------------------

double psi_ode_residual(const PsiTable& table, double kappa, double s_max) {
  const auto& c = table.config;
  const double h = c.mu_step();
  const double a = bessel_ratio(c.d, kappa, c.cf_tol);
  const double dm1 = c.d - 1.0;
  double worst = 0.0;
  for (int i = 2; i + 2 < c.n_mu; ++i) {
    const double s = c.mu_at(i);
    if (std::abs(s) > s_max) continue;
    auto p = [&](int j) { return psi_lookup(table, c.mu_at(j), kappa); };
    const double dpsi = (-p(i + 2) + 8.0 * p(i + 1) - 8.0 * p(i - 1) + p(i - 2)) / (12.0 * h);
    const double q = 1.0 - s * s;
    const double r = q * dpsi + (kappa * q - dm1 * s) * p(i) - (a - s);
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

DiagnosticReport check_psi_ode(std::span<const int> ds, std::span<const double> kappas,
                               const KernelConfig& base, double tol, bool flip_sign) {
  DiagnosticReport rep{"psi_ode", {{"n_mu", base.n_mu}, {"n_kappa", base.n_kappa}, {"kappa_max", base.kappa_max}}, {}};
  for (int d : ds) {
    KernelConfig cfg = base;
    cfg.d = d;
    auto table = build_psi_table(cfg);
    if (flip_sign) {
      for (double& v : table.values) v = -v;
    }
    for (double kappa : kappas) {
      char label[64];
      std::snprintf(label, sizeof label, "residual_d%d_k%g", d, kappa);
      rep.add(label, psi_ode_residual(table, kappa), "<", tol);
    }
  }
  return rep;
}

DiagnosticReport check_psi_closed_forms(std::span<const int> ds, const KernelConfig& base, bool flip_sign) {
  DiagnosticReport rep{"psi_closed_forms", {{"n_mu", base.n_mu}, {"n_kappa", base.n_kappa}, {"kappa_max", base.kappa_max}}, {}};
  for (int d : ds) {
    KernelConfig cfg = base;
    cfg.d = d;
    auto table = build_psi_table(cfg);
    if (flip_sign) {
      for (double& v : table.values) v = -v;
    }
    const double dm1 = d - 1.0;
    double boundary = 0.0;
    for (int j = 0; j < cfg.n_kappa; ++j) {
      const double a = bessel_ratio(d, j * cfg.kappa_step());
      boundary = std::max(boundary, std::abs(table.at(cfg.n_mu - 1, j) - (1.0 - a) / dm1));
      boundary = std::max(boundary, std::abs(table.at(0, j) - (1.0 + a) / dm1));
    }
    double flat = 0.0;
    for (int i = 0; i < cfg.n_mu; ++i) flat = std::max(flat, std::abs(table.at(i, 0) - 1.0 / dm1));
    rep.add("boundary_d" + std::to_string(d), boundary, "<", 1e-8);
    rep.add("kappa0_d" + std::to_string(d), flat, "<", 1e-9);
  }
  return rep;
}

DiagnosticReport check_bessel_ratio() {
  DiagnosticReport rep{"bessel_ratio", {}, {}};
  double worst = 0.0;
  for (double k : {0.1, 1.0, 10.0, 100.0}) {
    worst = std::max(worst, std::abs(bessel_ratio(3, k) - (1.0 / std::tanh(k) - 1.0 / k)));
  }
  rep.add("a3_max_abs_error", worst, "<", 1e-10);
  // A_d(k) - k/d = -k^3 / (d^2 (d + 2)) + O(k^5).
  for (int d : {3, 8}) {
    const double e1 = std::abs(bessel_ratio(d, 1e-3) - 1e-3 / d);
    const double e2 = std::abs(bessel_ratio(d, 1e-2) - 1e-2 / d);
    rep.add("small_kappa_order_d" + std::to_string(d), std::abs(std::log10(e2 / e1) - 3.0), "<", 0.05);
  }
  return rep;
}

DiagnosticReport check_vmf_sampling(const KernelConfig& base, int n_samples, std::uint64_t seed) {
  DiagnosticReport rep{"vmf_sampling", {{"samples", n_samples}}, {}};
  const std::pair<int, double> cases[] = {{3, 2.0}, {8, 10.0}, {16, 100.0}};
  for (const auto& [d, kappa] : cases) {
    KernelConfig cfg = base;
    cfg.d = d;
    cfg.kappa_max = std::max(base.kappa_max, kappa);
    const auto cdf = build_cdf_table(cfg);
    const auto w = UnitVector::basis(static_cast<std::size_t>(d), 0);
    std::vector<double> cosines(static_cast<std::size_t>(n_samples));
#pragma omp parallel
    {
      std::vector<double> x(static_cast<std::size_t>(d));
#pragma omp for schedule(static)
      for (int i = 0; i < n_samples; ++i) {
        Rng rng = Rng::stream(seed + static_cast<std::uint64_t>(d), static_cast<std::uint64_t>(i));
        sample_vmf(w.coords(), kappa, cdf, rng, x);
        cosines[static_cast<std::size_t>(i)] = x[0];
      }
    }
    const auto ms = mean_stderr(cosines);
    char label[64];
    std::snprintf(label, sizeof label, "mean_cosine_z_d%d_k%g", d, kappa);
    rep.add(label, std::abs(ms.mean - bessel_ratio(d, kappa)) / ms.stderr_, "<", 3.0);
  }
  return rep;
}

// ---- transport --------------------------------------------------------------------

DiagnosticReport check_flux_transport(const VmfTables& tables, double kappa_max, int n_particles,
                                      int n_steps, std::uint64_t seed) {
  DiagnosticReport rep{"flux_transport",
                       {{"d", tables.d()}, {"kappa_max", kappa_max}, {"particles", n_particles}, {"steps", n_steps}},
                       {}};
  const double dk = kappa_max / n_steps;
  std::vector<double> s(static_cast<std::size_t>(n_particles)), s0;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_particles; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    s[static_cast<std::size_t>(i)] = sample_cosine(tables.cdf, 0.0, rng.uniform());
  }
  s0 = s;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n_particles; ++i) {
    double x = s[static_cast<std::size_t>(i)];
    for (int j = 0; j < n_steps; ++j) {
      const double kappa = j * dk;
      x += dk * psi_lookup(tables.psi, x, kappa) * (1.0 - x * x);
      x = std::clamp(x, -1.0, 1.0);
    }
    s[static_cast<std::size_t>(i)] = x;
  }
  const double ks = ks_statistic(s, [&](double mu) { return cdf_lookup(tables.cdf, mu, kappa_max); });
  rep.add("ks_terminal_vs_vmf", ks, "<", 0.02);
  if (kappa_max == 0.0) {
    double diff = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) diff = std::max(diff, std::abs(s[i] - s0[i]));
    rep.add("max_displacement", diff, "<=", 0.0);
  }
  return rep;
}

DiagnosticReport check_sphere_continuity(const VmfTables& tables, double kappa_max, int n_particles,
                                         int n_steps, std::uint64_t seed) {
  if (tables.d() != 3) throw InvalidConfig("sphere continuity check runs on S^2 (d = 3)");
  DiagnosticReport rep{"sphere_continuity",
                       {{"kappa_max", kappa_max}, {"particles", n_particles}, {"steps", n_steps}},
                       {}};
  const double dk = kappa_max / n_steps;
  std::vector<double> cosines(static_cast<std::size_t>(n_particles));
  std::vector<double> azimuth(static_cast<std::size_t>(n_particles));
  double worst_norm = 0.0;
#pragma omp parallel for schedule(static) reduction(max : worst_norm)
  for (int i = 0; i < n_particles; ++i) {
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i));
    std::array<double, 3> x{};
    sample_uniform_sphere(x, rng);
    std::array<double, 3> step{};
    for (int j = 0; j < n_steps; ++j) {
      // w = e3: P_x(w) = e3 - x_3 x.
      const double s = std::clamp(x[2], -1.0, 1.0);
      const double g = dk * psi_lookup(tables.psi, s, j * dk);
      step = {-g * s * x[0], -g * s * x[1], g * (1.0 - s * x[2])};
      retract_inplace(x, step);
    }
    worst_norm = std::max(worst_norm, std::abs(norm(x) - 1.0));
    cosines[static_cast<std::size_t>(i)] = x[2];
    azimuth[static_cast<std::size_t>(i)] = std::atan2(x[1], x[0]);
  }
  rep.add("ks_cosine_vs_vmf",
          ks_statistic(cosines, [&](double mu) { return cdf_lookup(tables.cdf, mu, kappa_max); }), "<", 0.02);
  rep.add("ks_azimuth_uniform", ks_uniform(azimuth, -std::numbers::pi, std::numbers::pi), "<", 0.02);
  rep.add("max_norm_deviation", worst_norm, "<", 1e-9);
  return rep;
}

// ---- scores ---------------------------------------------------------------------

std::vector<std::array<double, 3>> fibonacci_sphere(int n) {
  std::vector<std::array<double, 3>> pts(static_cast<std::size_t>(n));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    pts[static_cast<std::size_t>(i)] = {r * std::cos(phi), r * std::sin(phi), z};
  }
  return pts;
}

namespace {

// Central-difference gradient of f at x; projected onto the tangent space
// when `tangent`, where f is read through y / |y|.
template <class F>
std::vector<double> fd_gradient(F&& f, std::span<const double> x, bool tangent, double h = 1e-5) {
  std::vector<double> g(x.size()), y(x.begin(), x.end()), tmp(x.size());
  auto eval = [&](std::span<const double> p) {
    if (!tangent) return f(p);
    std::copy(p.begin(), p.end(), tmp.begin());
    normalize_inplace(tmp);
    return f(std::span<const double>(tmp));
  };
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = x[i] + h;
    const double fp = eval(y);
    y[i] = x[i] - h;
    const double fm = eval(y);
    y[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  if (tangent) project_tangent(x, g, g);
  return g;
}

double rel_error(std::span<const double> approx, std::span<const double> exact) {
  double num = 0.0;
  for (std::size_t i = 0; i < exact.size(); ++i) num += (approx[i] - exact[i]) * (approx[i] - exact[i]);
  const double den = norm(exact);
  return den > 0.0 ? std::sqrt(num) / den : std::sqrt(num);
}

std::vector<double> random_unit(int d, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(d));
  sample_uniform_sphere(v, rng);
  return v;
}

}  // namespace

DiagnosticReport check_scores(const VmfTables& tables_d3, std::uint64_t seed, double tol) {
  DiagnosticReport rep{"scores", {{"tolerance", tol}}, {}};
  Rng rng(seed);
  std::vector<double> a;

  // vMF conditional: log phi = kappa <w, x> + const.
  double worst = 0.0;
  for (int d : {3, 8, 16}) {
    for (int rep_i = 0; rep_i < 20; ++rep_i) {
      const auto x = random_unit(d, rng), w = random_unit(d, rng);
      const double kappa = 0.5 + 49.5 * rng.uniform();
      const double t = kappa / 50.0;
      a.resize(x.size());
      conditional_score(PathKind::vmf(50.0), x, w, t, a);
      const auto g = fd_gradient([&](std::span<const double> y) { return kappa * dot(w, y); }, x, true);
      worst = std::max(worst, rel_error(g, a));
    }
  }
  rep.add("vmf_conditional_rel_error", worst, "<", tol);

  {
    std::vector<double> x = random_unit(3, rng), w = random_unit(3, rng), s(3);
    conditional_score(PathKind::vmf(50.0), x, w, 0.0, s);
    rep.add("vmf_kappa0_score_norm", norm(s), "<=", 0.0);
  }

  // VP and VE conditional: Gaussian log densities.
  worst = 0.0;
  double worst_ve = 0.0;
  for (int d : {3, 8}) {
    for (int i = 0; i < 20; ++i) {
      std::vector<double> x(static_cast<std::size_t>(d)), w(static_cast<std::size_t>(d)), s(static_cast<std::size_t>(d));
      rng.fill_normal(x);
      rng.fill_normal(w);
      const double t = 0.9 * rng.uniform();
      conditional_score(PathKind::vp(), x, w, t, s);
      const double var = (1 - t) * (1 - t);
      auto g = fd_gradient(
          [&](std::span<const double> y) {
            double r2 = 0.0;
            for (std::size_t c = 0; c < y.size(); ++c) r2 += (y[c] - t * w[c]) * (y[c] - t * w[c]);
            return -0.5 * r2 / var;
          },
          x, false);
      worst = std::max(worst, rel_error(g, s));

      const auto ve = PathKind::ve(10.0);
      const double sig = ve.sigma(t);
      conditional_score(ve, x, w, t, s);
      g = fd_gradient(
          [&](std::span<const double> y) {
            double r2 = 0.0;
            for (std::size_t c = 0; c < y.size(); ++c) r2 += (y[c] - w[c]) * (y[c] - w[c]);
            return -0.5 * r2 / (sig * sig);
          },
          x, false, 1e-4 * std::max(sig, 1e-2));
      worst_ve = std::max(worst_ve, rel_error(g, s));
    }
  }
  rep.add("vp_conditional_rel_error", worst, "<", tol);
  rep.add("ve_conditional_rel_error", worst_ve, "<", tol);

  // Tiny marginal (N = 2, L = 1, d = 3, vMF): mixture density by quadrature.
  {
    const auto kind = PathKind::vmf(tables_d3.kappa_max());
    const auto spec = OracleSpec::joint(2, 1, {0.6, 0.4});
    EmbeddingTable emb{Matrix(2, 3), {0.0, 0.0}, NormConvention::Unit};
    const auto w0 = random_unit(3, rng), w1 = random_unit(3, rng);
    std::copy(w0.begin(), w0.end(), emb.vectors.row(0).begin());
    std::copy(w1.begin(), w1.end(), emb.vectors.row(1).begin());
    const auto grid = fibonacci_sphere(10000);
    double worst_m = 0.0;
    for (double t : {0.05, 0.1, 0.3}) {
      const double kappa = kind.kappa(t);
      std::array<double, 2> z{};
      for (std::size_t k = 0; k < 2; ++k) {
        for (const auto& p : grid) z[k] += std::exp(kappa * dot(emb.vectors.row(k), p));
        z[k] *= 4.0 * std::numbers::pi / static_cast<double>(grid.size());
      }
      for (int i = 0; i < 10; ++i) {
        Matrix x(1, 3);
        sample_uniform_sphere(x.row(0), rng);
        const auto post = oracle_posterior(spec, kind, emb, x, t);
        const auto score = marginal_score(kind, post, x, t, emb);
        const auto g = fd_gradient(
            [&](std::span<const double> y) {
              double p = 0.0;
              for (std::size_t k = 0; k < 2; ++k) p += spec.pmf()[k] * std::exp(kappa * dot(emb.vectors.row(k), y)) / z[k];
              return std::log(p);
            },
            x.row(0), true);
        worst_m = std::max(worst_m, rel_error(g, score.row(0)));
      }
    }
    rep.add("vmf_marginal_rel_error", worst_m, "<", tol);
  }
  return rep;
}

// ---- signal curves -------------------------------------------------------------------

DiagnosticReport check_signal_curves(const KernelConfig& base, int n_samples, std::uint64_t seed) {
  DiagnosticReport rep{"signal_curves", {{"samples", n_samples}, {"kappa_max", base.kappa_max}}, {}};
  const std::vector<double> ts{0.1, 0.25, 0.5, 0.75, 1.0};
  for (int d : {3, 16}) {
    KernelConfig cfg = base;
    cfg.d = d;
    const auto tables = build_tables(cfg);
    const auto kind = PathKind::vmf(cfg.kappa_max);
    const auto curve = expected_cosine_curves(kind, d, ts, n_samples, &tables, seed + static_cast<std::uint64_t>(d));
    double worst = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double a = bessel_ratio(d, kind.kappa(ts[i]));
      worst = std::max(worst, std::abs(curve.mean[i] - a) / curve.stderr_[i]);
    }
    rep.add("vmf_d" + std::to_string(d) + "_max_z", worst, "<", 3.0);
  }
  {
    const std::vector<double> gt{0.25, 0.5, 0.75};
    const auto curve = expected_cosine_curves(PathKind::geodesic(), 1000, gt, n_samples / 4, nullptr, seed + 1000);
    double worst = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      worst = std::max(worst, std::abs(curve.mean[i] - std::sin(std::numbers::pi * gt[i] / 2.0)));
    }
    rep.add("slerp_d1000_max_abs_dev", worst, "<", 0.01);
  }
  {
    KernelConfig cfg = base;
    cfg.d = 10;
    const auto tables = build_tables(cfg);
    const auto kind = PathKind::vmf(cfg.kappa_max);
    const std::vector<double> t{0.05 / cfg.kappa_max};
    const auto curve = expected_cosine_curves(kind, 10, t, n_samples * 5, &tables, seed + 10);
    rep.add("vmf_small_kappa_z", std::abs(curve.mean[0] - 0.005) / curve.stderr_[0], "<", 3.0);
  }
  return rep;
}

// ---- sampler TV --------------------------------------------------------------------

std::vector<double> decoded_counts(const OracleSpec& spec, std::span<const SampleResult> results) {
  std::vector<double> counts(spec.pmf().size(), 0.0);
  for (const auto& r : results) counts[spec.index_of(r.tokens)] += 1.0;
  return counts;
}

std::vector<TvCase> default_tv_cases(std::uint64_t seed) {
  std::vector<TvCase> cases;
  SamplerConfig ode;
  ode.n_predictor = 200;
  ode.seed = seed;
  cases.push_back({"ode_n200", ode, 0.05});
  SamplerConfig pc;
  pc.n_predictor = 100;
  pc.k_corrector = 1;
  pc.epsilon = 1e-3;
  pc.seed = seed + 1;
  cases.push_back({"pc_n100_k1", pc, 0.05});
  SamplerConfig sde;
  sde.n_predictor = 400;
  sde.sigma = 0.5;
  sde.seed = seed + 2;
  cases.push_back({"sde_n400_sigma0.5", sde, 0.07});
  return cases;
}

DiagnosticReport check_sampler_tv(const VmfTables& tables, std::span<const TvCase> cases, int n_samples,
                                  std::uint64_t seed) {
  DiagnosticReport rep{"sampler_tv", {{"samples", n_samples}, {"seed", static_cast<double>(seed)}}, {}};
  const auto spec = tiny_task_spec();
  const auto emb = tiny_task_embeddings();
  const auto kind = PathKind::vmf(tables.kappa_max());
  const OracleSource oracle(spec, kind, emb);
  const SamplerContext ctx{kind, &emb, &tables, &oracle, nullptr, 3};
  for (const auto& c : cases) {
    const auto res = sample_batch(ctx, c.config, n_samples);
    const double tv = total_variation(decoded_counts(spec, res), spec.pmf());
    rep.add("tv_" + c.label, tv, "<", c.threshold);
  }
  return rep;
}

}  // namespace vmfflow
