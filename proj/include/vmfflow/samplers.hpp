#pragma once

// Euler predictor, Langevin corrector, the predictor-corrector loop, the SDE
// sampler, time grids and decoding.

#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vmfflow/exec.hpp"
#include "vmfflow/flow_field.hpp"
#include "vmfflow/matrix.hpp"
#include "vmfflow/paths.hpp"
#include "vmfflow/posterior.hpp"
#include "vmfflow/rng.hpp"
#include "vmfflow/schedule.hpp"

namespace vmfflow {

struct SamplerConfig {
  int n_predictor = 128;
  int k_corrector = 0;
  double epsilon = 1e-3;
  bool warp_aware = false;
  bool damping = false;
  double sigma = 0.0;
  std::uint64_t seed = 0;

  int nfe() const { return n_predictor * (1 + k_corrector); }
  /// Flag string in sweep notation: "-", "w", "d" or "wd".
  std::string flags() const;
  /// Throws InvalidConfig for bad ranges and ScoreUnavailable when a
  /// corrector or diffusion is requested on a path without a score.
  void validate(const PathKind& kind) const;
};

struct ClueMask {
  std::vector<bool> pinned;
  std::vector<int> values;

  bool empty() const { return pinned.empty(); }
};

/// Uniform grid, or the warp-aware grid when config.warp_aware and a warp
/// is given.
std::vector<double> time_grid(const SamplerConfig& config, const WarpSchedule* warp);

/// epsilon (1 - u)^2 with u = progress(kind, t) when damping, else epsilon.
double effective_epsilon(const SamplerConfig& config, const PathKind& kind, double t);

/// Latest time a path may be evaluated at by a sampler (VP is capped).
double sampler_time(const PathKind& kind, double t);

/// x <- retract(x + dt v) on spherical paths, x + dt v otherwise. On the
/// vMF path dt kappa_dot is replaced by kappa(t + dt) - kappa(t).
void euler_step(const PathKind& kind, Matrix& state, const PosteriorMatrix& post, double t,
                double dt, const EmbeddingTable& emb, const VmfTables* tables);

/// One Langevin move using the posterior evaluated at the current state:
/// x <- retract(x + P_x(eps g + sqrt(2 eps) xi)). `noise = false` suppresses
/// xi (test hook).
void langevin_step(const PathKind& kind, Matrix& state, const PosteriorMatrix& post, double t,
                   double eps_eff, const EmbeddingTable& emb, Rng& rng, bool noise = true);

/// Overwrite pinned rows with their clue embeddings.
void apply_clues(const ClueMask& clues, const EmbeddingTable& emb, Matrix& state);

/// Initial state: uniform on the sphere, N(0, I) for VP, sigma_max N(0, I)
/// for VE.
void sample_prior(const PathKind& kind, Rng& rng, Matrix& state);

/// Per-position argmax of <w_k, x_hat> + b_k, ties to the lowest index.
std::vector<int> decode(const EmbeddingTable& emb, const Matrix& x_hat);
/// Argmax per row of a logit matrix, ties to the lowest index.
std::vector<int> argmax_rows(const Matrix& logits);

struct SampleResult {
  Matrix state;
  std::vector<int> tokens;
  int nfe_used = 0;
  double terminal_entropy = 0.0;
};

/// Everything a sampler needs besides the RNG. `source` supplies logits;
/// `emb` must be the embedding table the source decodes against.
struct SamplerContext {
  PathKind kind;
  const EmbeddingTable* emb = nullptr;
  const VmfTables* tables = nullptr;
  const PosteriorSource* source = nullptr;
  const WarpSchedule* warp = nullptr;
  int dim = 0;
};

/// Predictor-corrector loop (k = 0 is the plain ODE sampler).
SampleResult pc_sample(const SamplerContext& ctx, const SamplerConfig& config,
                       const ClueMask* clues, Rng& rng);

/// Euler-Maruyama on the SDE with drift sde_drift and tangent noise.
SampleResult sde_sample(const SamplerContext& ctx, const SamplerConfig& config,
                        const ClueMask* clues, Rng& rng);

/// `count` sequences; sequence i uses Rng::stream(config.seed, i) and
/// clue mask clues[i] when given. Uses sde_sample when sigma > 0.
std::vector<SampleResult> sample_batch(const SamplerContext& ctx, const SamplerConfig& config,
                                       int count, std::span<const ClueMask> clues = {},
                                       Exec exec = Exec::Parallel);

/// Wraps a source and counts logits() calls.
class CountingSource final : public PosteriorSource {
 public:
  explicit CountingSource(const PosteriorSource& inner) : inner_(&inner) {}
  int vocab() const override { return inner_->vocab(); }
  int length() const override { return inner_->length(); }
  void logits(const Matrix& x, double t, Matrix& out) const override {
    calls_.fetch_add(1, std::memory_order_relaxed);
    inner_->logits(x, t, out);
  }
  long calls() const { return calls_.load(); }

 private:
  const PosteriorSource* inner_;
  mutable std::atomic<long> calls_{0};
};

}  // namespace vmfflow
