#include "vmfflow/flow_field.hpp"

#include <cmath>
#include <vector>

#include "vmfflow/error.hpp"
#include "vmfflow/sphere.hpp"

namespace vmfflow {

namespace {

// Writes out_l = sum_k a_k w_k + b x_l for one position.
inline void combine_row(const EmbeddingTable& emb, std::span<const double> a, double b,
                        std::span<const double> x, std::span<double> out) {
  const std::size_t d = x.size();
  for (std::size_t i = 0; i < d; ++i) out[i] = b * x[i];
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double ak = a[k];
    if (ak == 0.0) continue;
    const auto w = emb.vectors.row(k);
    for (std::size_t i = 0; i < d; ++i) out[i] += ak * w[i];
  }
}

void field_row(const PathKind& kind, std::span<const double> p, std::span<const double> x,
               double t, const EmbeddingTable& emb, const VmfTables* tables,
               const FieldTerms& terms, std::span<double> a, std::span<double> out) {
  const std::size_t n = p.size();
  switch (kind.tag) {
    case PathTag::VMF: {
      const double kappa = kind.kappa(t);
      const double vel = std::isnan(terms.kappa_increment) ? terms.velocity * kind.kappa_dot(t)
                                                           : terms.kappa_increment;
      const double sc = terms.score * kappa;
      double b = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double s = clamped_cosine(emb.vectors.row(k), x);
        double c = sc;
        if (vel != 0.0) c += vel * psi_lookup(tables->psi, s, kappa);
        a[k] = p[k] * c;
        b -= a[k] * s;
      }
      combine_row(emb, a, b, x, out);
      return;
    }
    case PathTag::GEODESIC: {
      if (terms.score != 0.0) throw ScoreUnavailable("the geodesic path has no closed-form score");
      double b = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double s = clamped_cosine(emb.vectors.row(k), x);
        a[k] = p[k] * terms.velocity * geodesic_speed(s, t);
        b -= a[k] * s;
      }
      combine_row(emb, a, b, x, out);
      return;
    }
    case PathTag::VP: {
      if (t > 1.0 - kVpTimeCap) {
        throw TimeSingularity("vp path evaluated at t = " + std::to_string(t) + " > 1 - 1e-3");
      }
      const double inv = 1.0 / (1.0 - t);
      const double cv = terms.velocity * inv;
      const double cs = terms.score * inv * inv;
      // velocity: sum p (w - x)/(1-t); score: sum p (t w - x)/(1-t)^2.
      for (std::size_t k = 0; k < n; ++k) a[k] = p[k] * (cv + cs * t);
      combine_row(emb, a, -(cv + cs), x, out);
      return;
    }
    case PathTag::VE: {
      const double r = kind.log_sigma_rate();
      const double sg = kind.sigma(t);
      const double cs = terms.score / (sg * sg);
      const double cv = terms.velocity * r;
      // velocity: r (x - sum p w); score: (sum p w - x) / sigma^2.
      for (std::size_t k = 0; k < n; ++k) a[k] = p[k] * (cs - cv);
      combine_row(emb, a, cv - cs, x, out);
      return;
    }
  }
}

}  // namespace

void assemble_field(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                    const EmbeddingTable& emb, const VmfTables* tables, const FieldTerms& terms,
                    Matrix& out, Exec exec) {
  if (post.rows() != x.rows() || post.cols() != emb.vectors.rows() || x.cols() != emb.vectors.cols()) {
    throw InvalidConfig("field assembly shape mismatch");
  }
  const bool needs_psi = terms.velocity != 0.0 || !std::isnan(terms.kappa_increment);
  if (kind.tag == PathTag::VMF && tables == nullptr && needs_psi) {
    throw InvalidConfig("vmf velocity requires tables");
  }
  if (kind.tag == PathTag::GEODESIC && terms.score != 0.0) {
    throw ScoreUnavailable("the geodesic path has no closed-form score");
  }
  if (out.rows() != x.rows() || out.cols() != x.cols()) out = Matrix(x.rows(), x.cols());
  const auto rows = static_cast<long>(x.rows());
  const std::size_t n = post.cols();

  if (exec == Exec::Serial || rows < 2) {
    std::vector<double> a(n);
    for (long l = 0; l < rows; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      field_row(kind, post.row(ul), x.row(ul), t, emb, tables, terms, a, out.row(ul));
    }
    return;
  }

  std::exception_ptr failure;
#pragma omp parallel
  {
    std::vector<double> a(n);
#pragma omp for schedule(static)
    for (long l = 0; l < rows; ++l) {
      const auto ul = static_cast<std::size_t>(l);
      try {
        field_row(kind, post.row(ul), x.row(ul), t, emb, tables, terms, a, out.row(ul));
      } catch (...) {
#pragma omp critical(vmfflow_field_error)
        if (!failure) failure = std::current_exception();
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
}

Matrix marginal_velocity(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x,
                         double t, const EmbeddingTable& emb, const VmfTables* tables, Exec exec) {
  Matrix out;
  assemble_field(kind, post, x, t, emb, tables, FieldTerms{1.0, 0.0}, out, exec);
  return out;
}

Matrix marginal_score(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                      const EmbeddingTable& emb, Exec exec) {
  if (!kind.has_score()) throw ScoreUnavailable("the geodesic path has no closed-form score");
  Matrix out;
  assemble_field(kind, post, x, t, emb, nullptr, FieldTerms{0.0, 1.0}, out, exec);
  return out;
}

Matrix sde_drift(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                 const EmbeddingTable& emb, const VmfTables* tables, double sigma, Exec exec) {
  if (sigma < 0.0) throw InvalidConfig("sigma must be non-negative");
  Matrix out;
  assemble_field(kind, post, x, t, emb, tables, FieldTerms{1.0, 0.5 * sigma * sigma}, out, exec);
  return out;
}

namespace reference {

Matrix marginal_velocity(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x,
                         double t, const EmbeddingTable& emb, const VmfTables* tables) {
  Matrix out(x.rows(), x.cols(), 0.0);
  std::vector<double> v(x.cols());
  for (std::size_t l = 0; l < x.rows(); ++l) {
    for (std::size_t k = 0; k < post.cols(); ++k) {
      conditional_velocity(kind, x.row(l), emb.vectors.row(k), t, tables, v);
      for (std::size_t i = 0; i < v.size(); ++i) out(l, i) += post(l, k) * v[i];
    }
  }
  return out;
}

Matrix marginal_score(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                      const EmbeddingTable& emb) {
  Matrix out(x.rows(), x.cols(), 0.0);
  std::vector<double> v(x.cols());
  for (std::size_t l = 0; l < x.rows(); ++l) {
    for (std::size_t k = 0; k < post.cols(); ++k) {
      conditional_score(kind, x.row(l), emb.vectors.row(k), t, v);
      for (std::size_t i = 0; i < v.size(); ++i) out(l, i) += post(l, k) * v[i];
    }
  }
  return out;
}

}  // namespace reference

}  // namespace vmfflow
