#include "vmfflow/paths.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "vmfflow/error.hpp"
#include "vmfflow/matrix.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/stats.hpp"

namespace vmfflow {

PathKind PathKind::vmf(double kappa_max) { return {PathTag::VMF, kappa_max, 0.0}; }
PathKind PathKind::geodesic() { return {PathTag::GEODESIC, 0.0, 0.0}; }
PathKind PathKind::vp() { return {PathTag::VP, 0.0, 0.0}; }
PathKind PathKind::ve(double sigma_max) { return {PathTag::VE, 0.0, sigma_max}; }

double PathKind::embedding_norm(int d) const {
  switch (tag) {
    case PathTag::VMF:
    case PathTag::GEODESIC:
      return 1.0;
    case PathTag::VE:
      return std::sqrt(static_cast<double>(d));
    case PathTag::VP:
      return 0.0;
  }
  return 0.0;
}

double PathKind::sigma(double t) const {
  const double s = std::pow(sigma_max, 1.0 - t) * std::pow(kVeSigmaMin, t);
  return std::max(s, kVeSigmaMin);
}

double PathKind::log_sigma_rate() const { return std::log(kVeSigmaMin / sigma_max); }

void PathKind::validate() const {
  if (tag == PathTag::VMF && !(kappa_max > 0.0)) throw InvalidConfig("vmf path needs kappa_max > 0");
  if (tag == PathTag::VE && !(sigma_max > kVeSigmaMin)) {
    throw InvalidConfig("ve path needs sigma_max > 1e-3");
  }
}

std::string to_string(PathTag tag) {
  switch (tag) {
    case PathTag::VMF: return "vmf";
    case PathTag::GEODESIC: return "geodesic";
    case PathTag::VP: return "vp";
    case PathTag::VE: return "ve";
  }
  return "?";
}

std::string PathKind::name() const { return to_string(tag); }

PathKind PathKind::parse(const std::string& name, double kappa_max, double sigma_max) {
  PathKind k;
  if (name == "vmf") k = vmf(kappa_max);
  else if (name == "geodesic") k = geodesic();
  else if (name == "vp") k = vp();
  else if (name == "ve") k = ve(sigma_max);
  else throw InvalidConfig("unknown path '" + name + "'");
  k.validate();
  return k;
}

namespace {

void require_tables(const PathKind& kind, const VmfTables* tables) {
  if (kind.tag == PathTag::VMF && tables == nullptr) {
    throw InvalidConfig("vmf path requires kernel tables");
  }
}

void check_vp_time(double t) {
  if (t > 1.0 - kVpTimeCap) {
    throw TimeSingularity("vp path evaluated at t = " + std::to_string(t) + " > 1 - 1e-3");
  }
}

}  // namespace

void corrupt(const PathKind& kind, std::span<const double> w, double t, const VmfTables* tables,
             Rng& rng, std::span<double> out) {
  const std::size_t d = w.size();
  switch (kind.tag) {
    case PathTag::VMF:
      require_tables(kind, tables);
      sample_vmf(w, kind.kappa(t), tables->cdf, rng, out);
      return;
    case PathTag::GEODESIC: {
      std::vector<double> x0(d);
      for (int attempt = 0;; ++attempt) {
        sample_uniform_sphere(x0, rng);
        try {
          slerp(x0, w, t, out);
          return;
        } catch (const AntipodalPoints&) {
          if (attempt > 0) throw;
        }
      }
    }
    case PathTag::VP:
      for (std::size_t i = 0; i < d; ++i) out[i] = (1.0 - t) * rng.normal() + t * w[i];
      return;
    case PathTag::VE: {
      const double s = kind.sigma(t);
      for (std::size_t i = 0; i < d; ++i) out[i] = w[i] + s * rng.normal();
      return;
    }
  }
}

double geodesic_speed(double cosine, double t) {
  if (t >= 1.0) throw TimeSingularity("geodesic velocity undefined at t = 1");
  const double c = std::clamp(cosine, -1.0, 1.0);
  const double phi = std::acos(c);
  const double s = std::sin(phi);
  // phi / sin(phi) -> 1 as phi -> 0.
  const double ratio = phi < 1e-6 ? 1.0 + phi * phi / 6.0 : phi / s;
  if (!std::isfinite(ratio)) {
    throw AntipodalPoints("geodesic velocity undefined at the antipode");
  }
  return ratio / (1.0 - t);
}

void conditional_velocity(const PathKind& kind, std::span<const double> x,
                          std::span<const double> w, double t, const VmfTables* tables,
                          std::span<double> out) {
  const std::size_t d = x.size();
  switch (kind.tag) {
    case PathTag::VMF: {
      require_tables(kind, tables);
      const double s = clamped_cosine(w, x);
      const double g = kind.kappa_dot(t) * psi_lookup(tables->psi, s, kind.kappa(t));
      for (std::size_t i = 0; i < d; ++i) out[i] = g * (w[i] - s * x[i]);
      return;
    }
    case PathTag::GEODESIC: {
      const double s = clamped_cosine(w, x);
      const double g = geodesic_speed(s, t);
      for (std::size_t i = 0; i < d; ++i) out[i] = g * (w[i] - s * x[i]);
      return;
    }
    case PathTag::VP: {
      check_vp_time(t);
      const double inv = 1.0 / (1.0 - t);
      for (std::size_t i = 0; i < d; ++i) out[i] = (w[i] - x[i]) * inv;
      return;
    }
    case PathTag::VE: {
      const double r = kind.log_sigma_rate();
      for (std::size_t i = 0; i < d; ++i) out[i] = r * (x[i] - w[i]);
      return;
    }
  }
}

void conditional_score(const PathKind& kind, std::span<const double> x,
                       std::span<const double> w, double t, std::span<double> out) {
  const std::size_t d = x.size();
  switch (kind.tag) {
    case PathTag::VMF: {
      const double k = kind.kappa(t);
      const double s = dot(w, x);
      for (std::size_t i = 0; i < d; ++i) out[i] = k * (w[i] - s * x[i]);
      return;
    }
    case PathTag::GEODESIC:
      throw ScoreUnavailable("the geodesic path has no closed-form score");
    case PathTag::VP: {
      check_vp_time(t);
      const double inv = 1.0 / ((1.0 - t) * (1.0 - t));
      for (std::size_t i = 0; i < d; ++i) out[i] = (t * w[i] - x[i]) * inv;
      return;
    }
    case PathTag::VE: {
      const double s = kind.sigma(t);
      const double inv = 1.0 / (s * s);
      for (std::size_t i = 0; i < d; ++i) out[i] = (w[i] - x[i]) * inv;
      return;
    }
  }
}

double conditional_log_likelihood(const PathKind& kind, std::span<const double> x,
                                  std::span<const double> w, double t) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  switch (kind.tag) {
    case PathTag::VMF:
      return kind.kappa(t) * dot(w, x);
    case PathTag::GEODESIC: {
      // x_t = slerp(x0, w, t) contracts the angle to w by (1 - t); the
      // density follows from the change of variables on the polar angle.
      const double d = static_cast<double>(x.size());
      const double tt = std::min(t, 1.0 - 1e-12);
      const double phi = std::acos(clamped_cosine(w, x));
      const double theta = phi / (1.0 - tt);
      if (theta >= std::numbers::pi) return kNegInf;
      double log_ratio;
      if (phi < 1e-8) {
        log_ratio = -std::log(1.0 - tt);
      } else {
        log_ratio = std::log(std::sin(theta)) - std::log(std::sin(phi));
      }
      return (d - 2.0) * log_ratio - std::log(1.0 - tt);
    }
    case PathTag::VP: {
      const double tt = std::min(t, 1.0 - 1e-6);
      const double var = (1.0 - tt) * (1.0 - tt);
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = x[i] - tt * w[i];
        r2 += r * r;
      }
      return -0.5 * r2 / var;
    }
    case PathTag::VE: {
      const double s = kind.sigma(t);
      double r2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = x[i] - w[i];
        r2 += r * r;
      }
      return -0.5 * r2 / (s * s);
    }
  }
  return kNegInf;
}

double progress(const PathKind& kind, double t) {
  switch (kind.tag) {
    case PathTag::VMF:
      return kind.kappa(t) / kind.kappa_max;
    case PathTag::VP:
      return t;
    case PathTag::VE:
      return 1.0 - kind.sigma(t) / kind.sigma_max;
    case PathTag::GEODESIC:
      break;
  }
  throw ProgressUnavailable("the geodesic path has no progress variable");
}

void precondition_input(const PathKind& kind, std::span<const double> x, double t,
                        std::span<double> out) {
  double scale = 1.0;
  if (kind.tag == PathTag::VE) {
    const double s = kind.sigma(t);
    scale = 1.0 / std::sqrt(s * s + 1.0);
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = scale * x[i];
}

CosineCurve expected_cosine_curves(const PathKind& kind, int d, std::span<const double> t_grid,
                                   int n_samples, const VmfTables* tables, std::uint64_t seed) {
  if (!kind.spherical()) throw InvalidConfig("cosine curves need a spherical path");
  CosineCurve curve;
  const auto w = UnitVector::basis(static_cast<std::size_t>(d), 0);
  for (std::size_t g = 0; g < t_grid.size(); ++g) {
    const double t = t_grid[g];
    const std::uint64_t grid_seed = Rng::stream(seed, g).next_u64();
    std::vector<double> cosines(static_cast<std::size_t>(n_samples));
#pragma omp parallel
    {
      std::vector<double> x(static_cast<std::size_t>(d));
#pragma omp for schedule(static)
      for (int i = 0; i < n_samples; ++i) {
        Rng rng = Rng::stream(grid_seed, static_cast<std::uint64_t>(i));
        corrupt(kind, w.coords(), t, tables, rng, x);
        cosines[static_cast<std::size_t>(i)] = x[0];
      }
    }
    const auto ms = mean_stderr(cosines);
    curve.t.push_back(t);
    curve.mean.push_back(ms.mean);
    curve.stderr_.push_back(ms.stderr_);
  }
  return curve;
}

}  // namespace vmfflow
