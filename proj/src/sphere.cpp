#include "vmfflow/sphere.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vmfflow/error.hpp"
#include "vmfflow/matrix.hpp"

namespace vmfflow {

namespace {
constexpr double kMinRetractNorm = 1e-12;
constexpr double kAntipodalMargin = 1e-6;
constexpr double kCoincidentAngle = 1e-8;
}  // namespace

UnitVector::UnitVector(std::vector<double> coords) : coords_(std::move(coords)) {
  if (coords_.size() < 2) throw InvalidConfig("unit vectors need d >= 2");
  normalize_inplace(coords_);
}

UnitVector UnitVector::basis(std::size_t d, std::size_t i) {
  std::vector<double> e(d, 0.0);
  e.at(i) = 1.0;
  return UnitVector(std::move(e));
}

void project_tangent(std::span<const double> x, std::span<const double> w,
                     std::span<double> out) {
  const double c = dot(w, x);
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = w[i] - c * x[i];
}

void normalize_inplace(std::span<double> x) {
  const double n = norm(x);
  if (!(n >= kMinRetractNorm)) {
    throw DegenerateRetraction("vector norm " + std::to_string(n) + " below 1e-12");
  }
  const double inv = 1.0 / n;
  for (double& v : x) v *= inv;
}

void retract_inplace(std::span<double> x, std::span<const double> step) {
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += step[i];
  normalize_inplace(x);
}

void sample_uniform_sphere(std::span<double> out, Rng& rng) {
  // A Gaussian draw is zero with probability 0; redraw anyway to stay total.
  do {
    rng.fill_normal(out);
  } while (norm(out) < kMinRetractNorm);
  normalize_inplace(out);
}

double clamped_cosine(std::span<const double> a, std::span<const double> b) {
  return std::clamp(dot(a, b), -1.0, 1.0);
}

TangentVector project_tangent(const UnitVector& x, std::span<const double> w) {
  std::vector<double> out(x.dim());
  project_tangent(x.coords(), w, out);
  return {x, std::move(out)};
}

UnitVector retract(const UnitVector& x, std::span<const double> step) {
  std::vector<double> y(x.coords().begin(), x.coords().end());
  retract_inplace(y, step);
  return UnitVector(std::move(y));
}

UnitVector sample_uniform_sphere(std::size_t d, Rng& rng) {
  std::vector<double> v(d);
  sample_uniform_sphere(v, rng);
  return UnitVector(std::move(v));
}

TangentVector sample_tangent_gaussian(const UnitVector& x, Rng& rng) {
  std::vector<double> z(x.dim());
  rng.fill_normal(z);
  project_tangent(x.coords(), z, z);
  return {x, std::move(z)};
}

void slerp(std::span<const double> x0, std::span<const double> x1, double t,
           std::span<double> out) {
  const double c = clamped_cosine(x0, x1);
  const double theta = std::acos(c);
  if (theta > std::numbers::pi - kAntipodalMargin) {
    throw AntipodalPoints("geodesic between antipodal points is not unique");
  }
  if (theta < kCoincidentAngle) {
    std::copy(x1.begin(), x1.end(), out.begin());
    return;
  }
  const double s = std::sin(theta);
  const double a = std::sin((1.0 - t) * theta) / s;
  const double b = std::sin(t * theta) / s;
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * x1[i];
}

UnitVector slerp(const UnitVector& x0, const UnitVector& x1, double t) {
  std::vector<double> out(x0.dim());
  slerp(x0.coords(), x1.coords(), t, out);
  return UnitVector(std::move(out));
}

}  // namespace vmfflow
