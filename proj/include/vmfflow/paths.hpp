#pragma once

// The four conditional noise processes: vMF, geodesic (slerp from a uniform
// draw), VP (linear Gaussian interpolation) and VE (additive Gaussian).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "vmfflow/rng.hpp"
#include "vmfflow/vmf_kernel.hpp"

namespace vmfflow {

enum class PathTag { VMF, GEODESIC, VP, VE };

/// Time cap for VP velocity and score, and the VE sigma floor.
inline constexpr double kVpTimeCap = 1e-3;
inline constexpr double kVeSigmaMin = 1e-3;

struct PathKind {
  PathTag tag = PathTag::VMF;
  double kappa_max = 0.0;  // VMF only
  double sigma_max = 0.0;  // VE only

  static PathKind vmf(double kappa_max);
  static PathKind geodesic();
  static PathKind vp();
  static PathKind ve(double sigma_max);

  bool spherical() const { return tag == PathTag::VMF || tag == PathTag::GEODESIC; }
  bool has_score() const { return tag != PathTag::GEODESIC; }

  /// Norm the embeddings are held at: 1 on the sphere, sqrt(d) for VE,
  /// 0 meaning "unconstrained" for VP.
  double embedding_norm(int d) const;

  /// Linear concentration schedule kappa_t = kappa_max t (VMF).
  double kappa(double t) const { return kappa_max * t; }
  double kappa_dot(double /*t*/) const { return kappa_max; }

  /// sigma_t = sigma_max^(1-t) sigma_min^t, floored at sigma_min (VE).
  double sigma(double t) const;
  /// d/dt log sigma_t (constant for the geometric schedule).
  double log_sigma_rate() const;

  /// Throws InvalidConfig when required parameters are missing.
  void validate() const;

  std::string name() const;
  static PathKind parse(const std::string& name, double kappa_max, double sigma_max);

  friend bool operator==(const PathKind&, const PathKind&) = default;
};

std::string to_string(PathTag tag);

/// Draws x_t given the clean embedding w. `tables` is required for VMF and
/// ignored otherwise. Geodesic resamples x0 once on an antipodal draw.
void corrupt(const PathKind& kind, std::span<const double> w, double t, const VmfTables* tables,
             Rng& rng, std::span<double> out);

/// v_t(x | w). For VMF this is kappa_dot psi~(<w,x>, kappa_t) P_x(w).
void conditional_velocity(const PathKind& kind, std::span<const double> x,
                          std::span<const double> w, double t, const VmfTables* tables,
                          std::span<double> out);

/// Riemannian (VMF) or Euclidean (VP, VE) score of p_t(x | w).
/// Throws ScoreUnavailable for GEODESIC.
void conditional_score(const PathKind& kind, std::span<const double> x,
                       std::span<const double> w, double t, std::span<double> out);

/// Scalar factor g with v_t(x | w) = g P_x(w) on the geodesic path:
/// phi / ((1 - t) sin phi), phi = angle(x, w). Throws TimeSingularity at t >= 1.
double geodesic_speed(double cosine, double t);

/// Log of p_t(x | w) up to a w-independent constant. Used by the oracle.
double conditional_log_likelihood(const PathKind& kind, std::span<const double> x,
                                  std::span<const double> w, double t);

/// u = kappa_t / kappa_max (VMF), t (VP), 1 - sigma_t / sigma_max (VE).
/// Throws ProgressUnavailable for GEODESIC.
double progress(const PathKind& kind, double t);

/// VE: x / sqrt(sigma_t^2 + 1); identity otherwise. `out` may alias `x`.
void precondition_input(const PathKind& kind, std::span<const double> x, double t,
                        std::span<double> out);

struct CosineCurve {
  std::vector<double> t;
  std::vector<double> mean;
  std::vector<double> stderr_;
};

/// Monte-Carlo estimate of E<w, x_t> on a spherical path, w = e1.
CosineCurve expected_cosine_curves(const PathKind& kind, int d, std::span<const double> t_grid,
                                   int n_samples, const VmfTables* tables, std::uint64_t seed);

}  // namespace vmfflow
