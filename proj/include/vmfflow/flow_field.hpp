#pragma once

// Marginal velocity, score and SDE drift assembled from a posterior matrix.
// All three are posterior-weighted sums over tokens and share one fused
// traversal.

#include <limits>

#include "vmfflow/exec.hpp"
#include "vmfflow/matrix.hpp"
#include "vmfflow/paths.hpp"
#include "vmfflow/posterior.hpp"

namespace vmfflow {

/// out = a * v_t(x) + b * score_t(x). For the vMF path, `kappa_increment`
/// (when set) replaces a * kappa_dot, so an Euler step can be taken in
/// concentration space without forming kappa_dot.
struct FieldTerms {
  double velocity = 0.0;
  double score = 0.0;
  double kappa_increment = std::numeric_limits<double>::quiet_NaN();
};

/// One fused pass over (l, k): cosines, per-kind weights, tangent assembly.
/// Parallel over positions when exec is Parallel.
void assemble_field(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                    const EmbeddingTable& emb, const VmfTables* tables, const FieldTerms& terms,
                    Matrix& out, Exec exec = Exec::Parallel);

Matrix marginal_velocity(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x,
                         double t, const EmbeddingTable& emb, const VmfTables* tables,
                         Exec exec = Exec::Parallel);

/// Throws ScoreUnavailable for GEODESIC.
Matrix marginal_score(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                      const EmbeddingTable& emb, Exec exec = Exec::Parallel);

/// marginal_velocity + sigma^2 / 2 * marginal_score.
Matrix sde_drift(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                 const EmbeddingTable& emb, const VmfTables* tables, double sigma,
                 Exec exec = Exec::Parallel);

namespace reference {

/// Unfused assembly: posterior-weighted sum of conditional_velocity /
/// conditional_score calls, one temporary per (l, k). Kept as the test and
/// benchmark baseline.
Matrix marginal_velocity(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x,
                         double t, const EmbeddingTable& emb, const VmfTables* tables);
Matrix marginal_score(const PathKind& kind, const PosteriorMatrix& post, const Matrix& x, double t,
                      const EmbeddingTable& emb);

}  // namespace reference

}  // namespace vmfflow
