#pragma once

// Runnable numerical diagnostics. Every metric carries its tolerance and the
// outcome of the comparison.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vmfflow/samplers.hpp"
#include "vmfflow/vmf_kernel.hpp"

namespace vmfflow {

struct Metric {
  std::string name;
  double value = 0.0;
  std::string op;  // "<", "<=", ">", ">="
  double threshold = 0.0;
  bool pass = false;
};

struct DiagnosticReport {
  std::string name;
  std::vector<std::pair<std::string, double>> params;
  std::vector<Metric> metrics;

  /// Appends a metric and evaluates it.
  const Metric& add(std::string metric, double value, std::string op, double threshold);
  bool passed() const;
  /// One JSON object on a single line.
  std::string to_json() const;
};

/// Max-norm residual of (1-s^2) psi' + (kappa (1-s^2) - (d-1) s) psi - (A - s)
/// with psi~ from the table (bilinear in kappa), 5-point central differences
/// on the mu grid, over |s| <= s_max.
double psi_ode_residual(const PsiTable& table, double kappa, double s_max = 0.99);

/// `flip_sign` negates the table before checking (mutation sanity hook).
DiagnosticReport check_psi_ode(std::span<const int> ds, std::span<const double> kappas,
                               const KernelConfig& base, double tol = 1e-3, bool flip_sign = false);

/// psi~(+-1, kappa) against (1 -+ A_d(kappa)) / (d - 1) over the kappa grid
/// and psi~(., 0) against 1 / (d - 1).
DiagnosticReport check_psi_closed_forms(std::span<const int> ds, const KernelConfig& base,
                                        bool flip_sign = false);

/// A_3 against coth k - 1/k, and the k^3 order of A_d(k) - k/d.
DiagnosticReport check_bessel_ratio();

/// Empirical mean cosine of sample_vmf against A_d(kappa) for (3, 2),
/// (8, 10) and (16, 100).
DiagnosticReport check_vmf_sampling(const KernelConfig& base, int n_samples, std::uint64_t seed);

/// Cosines from the uniform law, moved by ds/dkappa = psi~(s, kappa)(1 - s^2)
/// in n_steps Euler steps, compared by KS to the radial law at kappa_max.
DiagnosticReport check_flux_transport(const VmfTables& tables, double kappa_max, int n_particles,
                                      int n_steps, std::uint64_t seed);

/// Uniform points on S^2 moved by the full tangent field toward w = e3;
/// KS of the terminal cosine and of the azimuth around w.
DiagnosticReport check_sphere_continuity(const VmfTables& tables, double kappa_max, int n_particles,
                                         int n_steps, std::uint64_t seed);

/// Conditional scores (vMF, VP, VE) and a tiny-instance marginal score
/// against projected central differences of log densities.
DiagnosticReport check_scores(const VmfTables& tables_d3, std::uint64_t seed, double tol = 1e-3);

/// Mean cosine curves: vMF against A_d(kappa_t), slerp at d = 1000 against
/// sin(pi t / 2), and the small-kappa slope.
DiagnosticReport check_signal_curves(const KernelConfig& base, int n_samples, std::uint64_t seed);

struct TvCase {
  std::string label;
  SamplerConfig config;
  double threshold;
};

/// Decoded joint vs p_data on the tiny oracle task.
DiagnosticReport check_sampler_tv(const VmfTables& tables, std::span<const TvCase> cases, int n_samples,
                                  std::uint64_t seed);

/// The three acceptance configurations plus the coarse n = 4 run.
std::vector<TvCase> default_tv_cases(std::uint64_t seed);

/// Empirical pmf counts of decoded sequences (index per OracleSpec).
std::vector<double> decoded_counts(const OracleSpec& spec, std::span<const SampleResult> results);

/// Points of the spherical Fibonacci lattice on S^2.
std::vector<std::array<double, 3>> fibonacci_sphere(int n);

}  // namespace vmfflow
