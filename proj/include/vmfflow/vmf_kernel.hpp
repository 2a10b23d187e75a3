#pragma once

// von Mises-Fisher special-function machinery: the Bessel ratio A_d(kappa),
// the tabulated velocity scalar psi~(mu, kappa), the radial CDF used for
// inverse-CDF sampling, and vMF sampling itself.

#include <filesystem>
#include <span>
#include <vector>

#include "vmfflow/exec.hpp"
#include "vmfflow/rng.hpp"
#include "vmfflow/sphere.hpp"

namespace vmfflow {

struct KernelConfig {
  int d = 3;
  double kappa_max = 50.0;
  int n_mu = 512;
  int n_kappa = 512;
  double cf_tol = 1e-14;
  /// Half-width in mu of the smoothstep blend toward the first-order
  /// expansion of psi~ about mu = +-1. The locally rescaled quadrature does
  /// not underflow near the endpoints, so the blend is off by default.
  double blend_width = 0.0;
  /// Gauss-Legendre panels per mu-cell (8 nodes each, in the angle variable).
  int panels_per_cell = 2;

  double mu_step() const { return 2.0 / (n_mu - 1); }
  double kappa_step() const { return kappa_max / (n_kappa - 1); }
  double mu_at(int i) const { return i == n_mu - 1 ? 1.0 : -1.0 + i * mu_step(); }
  double kappa_at(int j) const { return j == n_kappa - 1 ? kappa_max : j * kappa_step(); }

  /// Throws InvalidConfig when a field is out of range.
  void validate() const;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

/// psi~(mu, kappa) on the uniform grid; values[j * n_mu + i] holds
/// (mu_i, kappa_j), i.e. mu is the fast axis.
struct PsiTable {
  KernelConfig config;
  std::vector<double> values;
  std::vector<double> bessel_ratio_col;  // A_d(kappa_j)

  double at(int i, int j) const { return values[static_cast<std::size_t>(j) * config.n_mu + i]; }
};

/// Per-column log radial density (max-shifted) and normalized CDF, same
/// layout as PsiTable.
struct RadialCdfTable {
  KernelConfig config;
  std::vector<double> log_density;
  std::vector<double> cdf;

  double cdf_at(int i, int j) const { return cdf[static_cast<std::size_t>(j) * config.n_mu + i]; }
};

/// Both tables for one (d, kappa_max) pair, as consumed by the paths and
/// samplers.
struct VmfTables {
  PsiTable psi;
  RadialCdfTable cdf;

  int d() const { return psi.config.d; }
  double kappa_max() const { return psi.config.kappa_max; }
};

/// A_d(kappa) = I_{d/2}(kappa) / I_{d/2-1}(kappa), evaluated by the backward
/// Gauss continued fraction. Depth starts at 64 and doubles until two
/// successive evaluations agree to `tol`; throws NoConvergence past 2^22.
double bessel_ratio(int d, double kappa, double tol = 1e-14);

/// (d-3)/2 log(1 - mu^2) + kappa mu; -inf at mu = +-1 for d > 3.
double log_radial_density(double mu, double kappa, int d);

PsiTable build_psi_table(const KernelConfig& config, Exec exec = Exec::Parallel);
RadialCdfTable build_cdf_table(const KernelConfig& config, Exec exec = Exec::Parallel);
VmfTables build_tables(const KernelConfig& config, Exec exec = Exec::Parallel);

/// Closed-form boundary values of psi~ at mu = +1 and mu = -1.
double psi_boundary_plus(int d, double bessel_ratio);
double psi_boundary_minus(int d, double bessel_ratio);

/// Bilinear interpolation of the psi~ grid; mu and kappa are clamped.
double psi_lookup(const PsiTable& table, double mu, double kappa);

/// Bessel ratio at kappa, linearly interpolated from the table column.
double bessel_ratio_lookup(const PsiTable& table, double kappa);

/// Radial CDF at (mu, kappa), bilinear.
double cdf_lookup(const RadialCdfTable& table, double mu, double kappa);

/// Inverse of the kappa-interpolated CDF column, piecewise linear in mu.
/// Returns the smallest mu whose interpolated CDF reaches u.
double sample_cosine(const RadialCdfTable& table, double kappa, double u);

/// x = mu w + sqrt(1 - mu^2) v with mu from sample_cosine and v a uniform
/// unit tangent direction at w.
void sample_vmf(std::span<const double> w, double kappa, const RadialCdfTable& table,
                Rng& rng, std::span<double> out);
UnitVector sample_vmf(const UnitVector& w, double kappa, const RadialCdfTable& table, Rng& rng);

// ---- table files --------------------------------------------------------

void save_table(const PsiTable& table, const std::filesystem::path& path);
void save_table(const RadialCdfTable& table, const std::filesystem::path& path);
PsiTable load_psi_table(const std::filesystem::path& path);
RadialCdfTable load_cdf_table(const std::filesystem::path& path);

/// Canonical file names inside a table directory.
std::filesystem::path psi_table_path(const std::filesystem::path& dir, const KernelConfig& c);
std::filesystem::path cdf_table_path(const std::filesystem::path& dir, const KernelConfig& c);

/// Load both tables from `dir` when present and matching, otherwise build
/// them in memory.
VmfTables load_or_build_tables(const KernelConfig& config, const std::filesystem::path& dir);

/// Default table directory: $VMFFLOW_TABLE_DIR, else "tables".
std::filesystem::path default_table_dir();

}  // namespace vmfflow
