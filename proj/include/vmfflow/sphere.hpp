#pragma once

#include <span>
#include <vector>

#include "vmfflow/rng.hpp"

namespace vmfflow {

/// Point on S^{d-1}. The constructor normalizes, so a UnitVector always has
/// norm 1 to within rounding.
class UnitVector {
 public:
  explicit UnitVector(std::vector<double> coords);

  /// Standard basis vector e_i in R^d.
  static UnitVector basis(std::size_t d, std::size_t i);

  std::size_t dim() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

 private:
  std::vector<double> coords_;
};

/// Vector in the tangent space at `base`.
struct TangentVector {
  UnitVector base;
  std::vector<double> coords;
};

// ---- span-level primitives (used by hot loops; no allocation) -------------

/// out = w - <w,x> x. `out` may alias `w`.
void project_tangent(std::span<const double> x, std::span<const double> w,
                     std::span<double> out);

/// x <- (x + step) / ||x + step||. Throws DegenerateRetraction if the sum has
/// norm below 1e-12.
void retract_inplace(std::span<double> x, std::span<const double> step);

/// Normalize in place; throws DegenerateRetraction on a (near) zero vector.
void normalize_inplace(std::span<double> x);

/// Fill `out` with a uniform draw on S^{d-1}.
void sample_uniform_sphere(std::span<double> out, Rng& rng);

/// Cosine <a,b> clamped to [-1,1].
double clamped_cosine(std::span<const double> a, std::span<const double> b);

// ---- value-level API --------------------------------------------------------

TangentVector project_tangent(const UnitVector& x, std::span<const double> w);
UnitVector retract(const UnitVector& x, std::span<const double> step);
UnitVector sample_uniform_sphere(std::size_t d, Rng& rng);
TangentVector sample_tangent_gaussian(const UnitVector& x, Rng& rng);

/// Geodesic interpolation from x0 (t=0) to x1 (t=1). Throws AntipodalPoints
/// when the angle exceeds pi - 1e-6; returns x1 when the angle is below 1e-8.
UnitVector slerp(const UnitVector& x0, const UnitVector& x1, double t);

/// Span version of slerp writing into `out`.
void slerp(std::span<const double> x0, std::span<const double> x1, double t,
           std::span<double> out);

}  // namespace vmfflow
