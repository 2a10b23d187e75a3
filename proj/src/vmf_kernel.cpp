#include "vmfflow/vmf_kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "vmfflow/error.hpp"
#include "vmfflow/matrix.hpp"

namespace vmfflow {

namespace {

// 8-point Gauss-Legendre nodes/weights on [-1, 1].
constexpr std::array<double, 8> kGlNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// The endpoint cells carry the sin^{d-2} zero of the integrand; give them
// extra panels.
constexpr int kEndpointPanelFactor = 8;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Integrand of the radial integrals in the angle variable theta = acos(mu):
// (1 - mu^2)^{(d-3)/2} e^{kappa mu} dmu = sin^{d-2}(theta) e^{kappa cos theta} dtheta.
double log_angular_weight(double theta, int d, double kappa) {
  const double lw = kappa * std::cos(theta);
  return d == 2 ? lw : lw + (d - 2) * std::log(std::sin(theta));
}

// log of the psi~ denominator f(mu)(1 - mu^2) at an interior node.
double log_denominator(double theta, int d, double kappa) {
  return (d - 1) * std::log(std::sin(theta)) + kappa * std::cos(theta);
}

struct CellIntegrals {
  double moment = 0.0;  // int (mu - A) w(mu) dmu, scaled by e^{-ref}
  double mass = 0.0;    // int w(mu) dmu, scaled by e^{-ref}
};

// Integrals over the mu-cell whose angle range is [theta_lo, theta_hi].
CellIntegrals cell_integrals(double theta_lo, double theta_hi, int d, double kappa, double a,
                             double ref, int panels) {
  CellIntegrals out;
  const double width = (theta_hi - theta_lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double lo = theta_lo + p * width;
    const double half = 0.5 * width;
    const double mid = lo + half;
    for (std::size_t q = 0; q < kGlNodes.size(); ++q) {
      const double th = mid + half * kGlNodes[q];
      const double w = half * kGlWeights[q] * std::exp(log_angular_weight(th, d, kappa) - ref);
      out.mass += w;
      out.moment += (std::cos(th) - a) * w;
    }
  }
  return out;
}

// Maximum over theta of log_angular_weight, used as the per-column shift of
// the CDF integrand.
double log_angular_weight_max(int d, double kappa) {
  if (d == 2) return kappa;
  if (kappa == 0.0) return 0.0;
  const double dm2 = d - 2;
  const double c = (-dm2 + std::sqrt(dm2 * dm2 + 4.0 * kappa * kappa)) / (2.0 * kappa);
  return 0.5 * dm2 * std::log1p(-c * c) + kappa * c;
}

double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

// Slope of psi~ at mu = +1 / -1, from differentiating the psi ODE at the
// singular endpoints.
double psi_slope_plus(int d, double kappa, double b) {
  return (1.0 - (2.0 * kappa + d - 1) * b) / (d + 1);
}
double psi_slope_minus(int d, double kappa, double b) {
  return (-1.0 - (2.0 * kappa - d + 1) * b) / (d + 1);
}

void build_psi_column(const KernelConfig& cfg, int j, double a, std::span<double> col) {
  const int n = cfg.n_mu;
  const int d = cfg.d;
  const double kappa = cfg.kappa_at(j);
  auto theta = [&](int i) { return std::acos(cfg.mu_at(i)); };
  auto panels = [&](int cell_lo) {
    return (cell_lo == 0 || cell_lo == n - 2) ? cfg.panels_per_cell * kEndpointPanelFactor
                                              : cfg.panels_per_cell;
  };

  // Left sweep for mu <= A: R_i = F(mu_i) / D(mu_i) with F the integral from
  // -1. Each step rescales by the density ratio of neighbouring nodes, so no
  // global shift (and no underflow) is involved.
  double ratio = 0.0;
  double prev_log_d = 0.0;
  int i = 1;
  for (; i < n - 1 && cfg.mu_at(i) <= a; ++i) {
    const double th = theta(i);
    const double log_d = log_denominator(th, d, kappa);
    const auto c = cell_integrals(th, theta(i - 1), d, kappa, a, log_d, panels(i - 1));
    ratio = (i == 1 ? 0.0 : ratio * std::exp(prev_log_d - log_d)) + c.moment;
    prev_log_d = log_d;
    col[i] = -ratio;
  }
  // Right sweep for mu > A, integrating from +1 so that every term has the
  // same sign.
  for (int k = n - 2; k >= i; --k) {
    const double th = theta(k);
    const double log_d = log_denominator(th, d, kappa);
    const auto c = cell_integrals(theta(k + 1), th, d, kappa, a, log_d, panels(k));
    ratio = (k == n - 2 ? 0.0 : ratio * std::exp(prev_log_d - log_d)) + c.moment;
    prev_log_d = log_d;
    col[k] = ratio;
  }

  const double b_plus = psi_boundary_plus(d, a);
  const double b_minus = psi_boundary_minus(d, a);
  col[0] = b_minus;
  col[n - 1] = b_plus;

  if (cfg.blend_width > 0.0) {
    const double s_plus = psi_slope_plus(d, kappa, b_plus);
    const double s_minus = psi_slope_minus(d, kappa, b_minus);
    for (int k = 1; k < n - 1; ++k) {
      const double mu = cfg.mu_at(k);
      const double dist_minus = mu + 1.0;
      const double dist_plus = 1.0 - mu;
      if (dist_minus < cfg.blend_width) {
        const double wgt = smoothstep(dist_minus / cfg.blend_width);
        col[k] = wgt * col[k] + (1.0 - wgt) * (b_minus + s_minus * dist_minus);
      } else if (dist_plus < cfg.blend_width) {
        const double wgt = smoothstep(dist_plus / cfg.blend_width);
        col[k] = wgt * col[k] + (1.0 - wgt) * (b_plus - s_plus * dist_plus);
      }
    }
  }

  for (int k = 0; k < n; ++k) {
    if (!std::isfinite(col[k]) || col[k] <= 0.0) {
      throw TableBuildError("psi~ not finite and positive at mu=" + std::to_string(cfg.mu_at(k)) +
                            ", kappa=" + std::to_string(kappa));
    }
  }
}

void build_cdf_column(const KernelConfig& cfg, int j, std::span<double> log_density,
                      std::span<double> cdf) {
  const int n = cfg.n_mu;
  const int d = cfg.d;
  const double kappa = cfg.kappa_at(j);
  const double shift = log_angular_weight_max(d, kappa);

  double max_log = kNegInf;
  for (int i = 0; i < n; ++i) {
    log_density[i] = log_radial_density(cfg.mu_at(i), kappa, d);
    if (std::isfinite(log_density[i])) max_log = std::max(max_log, log_density[i]);
  }
  for (int i = 0; i < n; ++i) log_density[i] -= max_log;

  cdf[0] = 0.0;
  for (int i = 1; i < n; ++i) {
    const int panels = (i == 1 || i == n - 1) ? cfg.panels_per_cell * kEndpointPanelFactor
                                              : cfg.panels_per_cell;
    const auto c = cell_integrals(std::acos(cfg.mu_at(i)), std::acos(cfg.mu_at(i - 1)), d, kappa,
                                  0.0, shift, panels);
    cdf[i] = cdf[i - 1] + c.mass;
  }
  const double total = cdf[n - 1];
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw TableBuildError("radial density has no mass at kappa=" + std::to_string(kappa));
  }
  for (int i = 1; i < n - 1; ++i) cdf[i] /= total;
  cdf[n - 1] = 1.0;
  for (int i = 1; i < n; ++i) {
    if (cdf[i] < cdf[i - 1]) {
      throw TableBuildError("non-monotone CDF column at kappa=" + std::to_string(kappa));
    }
  }
}

struct GridCoord {
  int lo;
  double frac;
};

GridCoord locate(double x, double lo, double step, int n) {
  const double pos = (x - lo) / step;
  int i = static_cast<int>(std::floor(pos));
  i = std::clamp(i, 0, n - 2);
  return {i, std::clamp(pos - i, 0.0, 1.0)};
}

}  // namespace

void KernelConfig::validate() const {
  if (d < 2) throw InvalidConfig("d must be >= 2");
  if (!(kappa_max > 0.0)) throw InvalidConfig("kappa_max must be > 0");
  if (n_mu < 64 || n_kappa < 64) throw InvalidConfig("grids need at least 64 points per axis");
  if (!(cf_tol > 0.0)) throw InvalidConfig("cf_tol must be > 0");
  if (blend_width < 0.0 || blend_width >= 1.0) throw InvalidConfig("blend_width must be in [0,1)");
  if (panels_per_cell < 1) throw InvalidConfig("panels_per_cell must be >= 1");
}

double bessel_ratio(int d, double kappa, double tol) {
  if (d < 2) throw InvalidConfig("bessel_ratio needs d >= 2");
  if (kappa < 0.0) throw InvalidConfig("bessel_ratio needs kappa >= 0");
  if (kappa == 0.0) return 0.0;
  const double nu = 0.5 * d - 1.0;
  auto evaluate = [&](long depth) {
    double r = 0.0;
    for (long j = depth; j >= 1; --j) r = kappa / (2.0 * (nu + j) + kappa * r);
    return r;
  };
  constexpr long kMaxDepth = 1L << 22;
  long depth = 64;
  double prev = evaluate(depth);
  while (depth < kMaxDepth) {
    depth *= 2;
    const double cur = evaluate(depth);
    if (std::abs(cur - prev) < tol) return cur;
    prev = cur;
  }
  throw NoConvergence("continued fraction for A_" + std::to_string(d) + "(" +
                      std::to_string(kappa) + ") did not converge");
}

double log_radial_density(double mu, double kappa, int d) {
  const double one_minus = 1.0 - mu * mu;
  const double linear = kappa * mu;
  if (d == 3) return linear;
  if (one_minus <= 0.0) {
    return d > 3 ? kNegInf : std::numeric_limits<double>::infinity();
  }
  return 0.5 * (d - 3) * std::log(one_minus) + linear;
}

double psi_boundary_plus(int d, double a) { return (1.0 - a) / (d - 1); }
double psi_boundary_minus(int d, double a) { return (1.0 + a) / (d - 1); }

PsiTable build_psi_table(const KernelConfig& config, Exec exec) {
  config.validate();
  PsiTable table;
  table.config = config;
  table.values.assign(static_cast<std::size_t>(config.n_mu) * config.n_kappa, 0.0);
  table.bessel_ratio_col.resize(config.n_kappa);
  for (int j = 0; j < config.n_kappa; ++j) {
    table.bessel_ratio_col[j] = bessel_ratio(config.d, config.kappa_at(j), config.cf_tol);
  }
  for (int j = 1; j < config.n_kappa; ++j) {
    if (!(table.bessel_ratio_col[j] > table.bessel_ratio_col[j - 1]) ||
        !(table.bessel_ratio_col[j] < 1.0)) {
      throw TableBuildError("Bessel ratio column not strictly increasing below 1");
    }
  }

  auto column = [&](int j) {
    std::span<double> col(table.values.data() + static_cast<std::size_t>(j) * config.n_mu,
                          config.n_mu);
    build_psi_column(config, j, table.bessel_ratio_col[j], col);
  };
  if (exec == Exec::Serial) {
    for (int j = 0; j < config.n_kappa; ++j) column(j);
  } else {
    // Exceptions must not escape an OpenMP region; collect and rethrow.
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < config.n_kappa; ++j) {
      try {
        column(j);
      } catch (...) {
#pragma omp critical(vmfflow_psi_fail)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return table;
}

RadialCdfTable build_cdf_table(const KernelConfig& config, Exec exec) {
  config.validate();
  RadialCdfTable table;
  table.config = config;
  const std::size_t total = static_cast<std::size_t>(config.n_mu) * config.n_kappa;
  table.log_density.assign(total, 0.0);
  table.cdf.assign(total, 0.0);
  auto column = [&](int j) {
    const std::size_t off = static_cast<std::size_t>(j) * config.n_mu;
    build_cdf_column(config, j, {table.log_density.data() + off, std::size_t(config.n_mu)},
                     {table.cdf.data() + off, std::size_t(config.n_mu)});
  };
  if (exec == Exec::Serial) {
    for (int j = 0; j < config.n_kappa; ++j) column(j);
  } else {
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < config.n_kappa; ++j) {
      try {
        column(j);
      } catch (...) {
#pragma omp critical(vmfflow_cdf_fail)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
  }
  return table;
}

VmfTables build_tables(const KernelConfig& config, Exec exec) {
  return {build_psi_table(config, exec), build_cdf_table(config, exec)};
}

double psi_lookup(const PsiTable& table, double mu, double kappa) {
  const auto& c = table.config;
  const auto m = locate(std::clamp(mu, -1.0, 1.0), -1.0, c.mu_step(), c.n_mu);
  const auto k = locate(std::clamp(kappa, 0.0, c.kappa_max), 0.0, c.kappa_step(), c.n_kappa);
  const double v00 = table.at(m.lo, k.lo);
  const double v10 = table.at(m.lo + 1, k.lo);
  const double v01 = table.at(m.lo, k.lo + 1);
  const double v11 = table.at(m.lo + 1, k.lo + 1);
  const double lo = v00 + m.frac * (v10 - v00);
  const double hi = v01 + m.frac * (v11 - v01);
  return lo + k.frac * (hi - lo);
}

double bessel_ratio_lookup(const PsiTable& table, double kappa) {
  const auto& c = table.config;
  const auto k = locate(std::clamp(kappa, 0.0, c.kappa_max), 0.0, c.kappa_step(), c.n_kappa);
  const double a0 = table.bessel_ratio_col[k.lo];
  return a0 + k.frac * (table.bessel_ratio_col[k.lo + 1] - a0);
}

double cdf_lookup(const RadialCdfTable& table, double mu, double kappa) {
  const auto& c = table.config;
  const auto m = locate(std::clamp(mu, -1.0, 1.0), -1.0, c.mu_step(), c.n_mu);
  const auto k = locate(std::clamp(kappa, 0.0, c.kappa_max), 0.0, c.kappa_step(), c.n_kappa);
  const double lo = table.cdf_at(m.lo, k.lo) +
                    m.frac * (table.cdf_at(m.lo + 1, k.lo) - table.cdf_at(m.lo, k.lo));
  const double hi = table.cdf_at(m.lo, k.lo + 1) +
                    m.frac * (table.cdf_at(m.lo + 1, k.lo + 1) - table.cdf_at(m.lo, k.lo + 1));
  return lo + k.frac * (hi - lo);
}

double sample_cosine(const RadialCdfTable& table, double kappa, double u) {
  const auto& c = table.config;
  const auto k = locate(std::clamp(kappa, 0.0, c.kappa_max), 0.0, c.kappa_step(), c.n_kappa);
  const double* lo = table.cdf.data() + static_cast<std::size_t>(k.lo) * c.n_mu;
  const double* hi = lo + c.n_mu;
  auto column = [&](int i) { return lo[i] + k.frac * (hi[i] - lo[i]); };

  if (u <= 0.0) return -1.0;
  if (u >= 1.0) return 1.0;
  // First node whose CDF reaches u.
  int left = 0;
  int right = c.n_mu - 1;
  while (left < right) {
    const int mid = (left + right) / 2;
    if (column(mid) >= u) {
      right = mid;
    } else {
      left = mid + 1;
    }
  }
  const int i1 = left;
  const int i0 = i1 - 1;
  const double c0 = column(i0);
  const double c1 = column(i1);
  const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 1.0;
  return std::clamp(c.mu_at(i0) + frac * c.mu_step(), -1.0, 1.0);
}

void sample_vmf(std::span<const double> w, double kappa, const RadialCdfTable& table, Rng& rng,
                std::span<double> out) {
  const double mu = sample_cosine(table, kappa, rng.uniform());
  // Uniform unit direction in the tangent plane at w.
  double tn = 0.0;
  do {
    rng.fill_normal(out);
    project_tangent(w, out, out);
    tn = norm(out);
  } while (tn < 1e-12);
  const double radial = std::sqrt(std::max(0.0, 1.0 - mu * mu)) / tn;
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = mu * w[i] + radial * out[i];
  normalize_inplace(out);
}

UnitVector sample_vmf(const UnitVector& w, double kappa, const RadialCdfTable& table, Rng& rng) {
  std::vector<double> out(w.dim());
  sample_vmf(w.coords(), kappa, table, rng, out);
  return UnitVector(std::move(out));
}

}  // namespace vmfflow
