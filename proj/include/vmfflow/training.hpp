#pragma once

// Cross-entropy training of the posterior model with warp-based time
// sampling, plus the desk-scale data sources.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "vmfflow/posterior.hpp"
#include "vmfflow/schedule.hpp"
#include "vmfflow/vmf_kernel.hpp"

namespace vmfflow {

/// One training sequence. `pinned` marks clue positions: they are held at
/// their clean embedding and excluded from the loss. Empty means none.
struct Example {
  std::vector<int> tokens;
  std::vector<bool> pinned;
};

using DataSource = std::function<Example(Rng&)>;

struct TrainConfig {
  int steps = 20000;
  int batch_size = 256;
  double learning_rate = 1e-2;
  double momentum = 0.9;
  std::optional<double> ema_decay;
  bool time_conditioned = false;
  int hidden = 64;
  bool train_embeddings = true;
  int warp_bins = 100;
  double warp_step = 1e-2;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CeBatchItem {
  std::vector<int> tokens;
  Matrix x;
  double t = 0.0;
  std::vector<bool> mask;  // positions that count; empty means all
};

struct CeResult {
  double mean = 0.0;               // over batch and counted positions
  std::vector<double> per_sample;  // mean over counted positions
};

/// -log p(true token), probabilities floored at 1e-300.
CeResult ce_loss(const PosteriorSource& source, std::span<const CeBatchItem> batch);

/// avg <- decay avg + (1 - decay) current, blockwise.
void ema_update(Model& avg, const Model& current, double decay);

struct StepMetrics {
  int step = 0;
  double loss = 0.0;
  double warp_loss = 0.0;
};

/// Owns the model, momentum buffer, optional EMA copy and the warp. The warp
/// is fitted in the noise coordinate 1 - t, where the cross-entropy is
/// increasing; flow_warp() is its reflection and is what t is drawn from.
class Trainer {
 public:
  Trainer(TrainConfig config, Model model, const VmfTables* tables, DataSource data);

  StepMetrics step();
  void run(int steps, const std::function<void(const StepMetrics&)>& on_step = {});

  const Model& model() const { return model_; }
  Model& model() { return model_; }
  const Model* ema() const { return ema_ ? &*ema_ : nullptr; }
  WarpSchedule flow_warp() const { return noise_warp_.reflected(); }
  const WarpSchedule& noise_warp() const { return noise_warp_; }
  void set_flow_warp(const WarpSchedule& w) { noise_warp_ = w.reflected(); }
  int steps_done() const { return step_; }
  const TrainConfig& config() const { return config_; }

 private:
  TrainConfig config_;
  Model model_;
  Model velocity_;
  std::optional<Model> ema_;
  const VmfTables* tables_;
  DataSource data_;
  WarpSchedule noise_warp_;
  int step_ = 0;
};

/// Draws a training item: t from the warp, x_t by corruption, clue
/// positions pinned.
CeBatchItem make_item(const Model& model, const VmfTables* tables, const Example& ex, double t,
                      Rng& rng);

/// Held-out comparison against the exact posterior. CE is the expectation
/// under the oracle posterior, so model_ce - oracle_ce is the mean KL.
struct OracleComparison {
  double model_ce = 0.0;
  double oracle_ce = 0.0;
  double kl = 0.0;
};

/// Midpoint grid (j + 0.5) / n.
std::vector<double> midpoint_grid(int n);

OracleComparison compare_to_oracle(const PosteriorSource& model, const OracleSpec& spec,
                                   const PathKind& kind, const EmbeddingTable& emb,
                                   const VmfTables* tables, std::span<const double> t_grid,
                                   int per_t, std::uint64_t seed);

// ---- data ------------------------------------------------------------------

/// i.i.d. sequences from an explicit pmf.
DataSource synthetic_source(const OracleSpec& spec);

std::vector<std::vector<int>> gen_synthetic_task(const OracleSpec& spec, int count, Rng& rng);

/// The tiny oracle task: N = 3, L = 2 with p_data = (0.5, 0.3, 0.2) x
/// (0.2, 0.3, 0.5).
OracleSpec tiny_task_spec();

/// Embeddings e1, e2, e3 in R^3, zero biases.
EmbeddingTable tiny_task_embeddings();

}  // namespace vmfflow
