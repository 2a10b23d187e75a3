#include "vmfflow/training.hpp"

#include <cmath>
#include <exception>

#include "vmfflow/error.hpp"
#include "vmfflow/paths.hpp"

namespace vmfflow {

namespace {
// Batches are split into this many fixed chunks whose gradients are summed
// in order, so results do not depend on the thread count.
constexpr int kChunks = 16;
}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw InvalidConfig("steps must be >= 1");
  if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw InvalidConfig("learning_rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidConfig("momentum must be in [0, 1)");
  if (ema_decay && !(*ema_decay >= 0.0 && *ema_decay < 1.0)) throw InvalidConfig("ema decay must be in [0, 1)");
  if (hidden < 1) throw InvalidConfig("hidden must be >= 1");
  if (warp_bins < 2) throw InvalidConfig("warp_bins must be >= 2");
}

CeResult ce_loss(const PosteriorSource& source, std::span<const CeBatchItem> batch) {
  if (batch.empty()) throw InvalidConfig("empty batch");
  CeResult res;
  res.per_sample.resize(batch.size());
  double total = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& item = batch[i];
    const auto p = source.posterior(item.x, item.t);
    double s = 0.0;
    double c = 0.0;
    for (std::size_t l = 0; l < item.tokens.size(); ++l) {
      if (!item.mask.empty() && !item.mask[l]) continue;
      s -= std::log(std::max(p(l, static_cast<std::size_t>(item.tokens[l])), 1e-300));
      c += 1.0;
    }
    res.per_sample[i] = c > 0.0 ? s / c : 0.0;
    total += s;
    count += c;
  }
  res.mean = count > 0.0 ? total / count : 0.0;
  return res;
}

void ema_update(Model& avg, const Model& current, double decay) {
  auto dst = avg.blocks();
  const auto src = current.blocks();
  for (std::size_t b = 0; b < dst.size(); ++b) {
    for (std::size_t i = 0; i < dst[b].size(); ++i) {
      dst[b][i] = decay * dst[b][i] + (1.0 - decay) * src[b][i];
    }
  }
}

CeBatchItem make_item(const Model& model, const VmfTables* tables, const Example& ex, double t,
                      Rng& rng) {
  const auto l = ex.tokens.size();
  const auto d = static_cast<std::size_t>(model.dim());
  CeBatchItem item{ex.tokens, Matrix(l, d), t, {}};
  if (!ex.pinned.empty()) item.mask.resize(l);
  for (std::size_t pos = 0; pos < l; ++pos) {
    const auto w = model.emb.vectors.row(static_cast<std::size_t>(ex.tokens[pos]));
    const bool pinned = !ex.pinned.empty() && ex.pinned[pos];
    if (!ex.pinned.empty()) item.mask[pos] = !pinned;
    if (pinned) {
      std::copy(w.begin(), w.end(), item.x.row(pos).begin());
    } else {
      corrupt(model.kind, w, t, tables, rng, item.x.row(pos));
    }
  }
  return item;
}

Trainer::Trainer(TrainConfig config, Model model, const VmfTables* tables, DataSource data)
    : config_(config),
      model_(std::move(model)),
      velocity_(model_.zeros_like()),
      tables_(tables),
      data_(std::move(data)),
      noise_warp_(WarpSchedule::identity(config.warp_bins)) {
  config_.validate();
  if (model_.kind.tag == PathTag::VMF && tables_ == nullptr) throw InvalidConfig("vmf training needs tables");
  if (config_.ema_decay) ema_ = model_;
}

StepMetrics Trainer::step() {
  const int b = config_.batch_size;
  const std::uint64_t step_seed = Rng::splitmix64(config_.seed ^ (0xA24BAED4963EE407ULL * (step_ + 1)));
  const WarpSchedule warp = flow_warp();

  std::vector<Model> grads(kChunks, velocity_);
  for (auto& g : grads) {
    for (auto blk : g.blocks()) std::fill(blk.begin(), blk.end(), 0.0);
  }
  std::vector<double> loss_sum(static_cast<std::size_t>(b), 0.0);
  std::vector<double> count(static_cast<std::size_t>(b), 0.0);
  std::vector<double> times(static_cast<std::size_t>(b), 0.0);
  std::exception_ptr failure;

#pragma omp parallel for schedule(static, 1)
  for (int c = 0; c < kChunks; ++c) {
    try {
      const int lo = c * b / kChunks;
      const int hi = (c + 1) * b / kChunks;
      for (int i = lo; i < hi; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        Rng rng = Rng::stream(step_seed, ui);
        const Example ex = data_(rng);
        const double t = warp.inverse(rng.uniform());
        const auto item = make_item(model_, tables_, ex, t, rng);
        loss_sum[ui] = backbone_backward(model_, item.x, t, item.tokens, item.mask,
                                         grads[static_cast<std::size_t>(c)]);
        double n = 0.0;
        for (std::size_t l = 0; l < item.tokens.size(); ++l) n += item.mask.empty() || item.mask[l] ? 1.0 : 0.0;
        count[ui] = n;
        times[ui] = t;
      }
    } catch (...) {
#pragma omp critical(vmfflow_train_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  double total = 0.0, n_total = 0.0;
  for (int i = 0; i < b; ++i) {
    total += loss_sum[static_cast<std::size_t>(i)];
    n_total += count[static_cast<std::size_t>(i)];
  }
  const double loss = n_total > 0.0 ? total / n_total : 0.0;
  if (!std::isfinite(loss)) {
    throw NonFiniteLoss("loss is " + std::to_string(loss) + " at step " + std::to_string(step_));
  }

  // Reduce chunk gradients in fixed order, then momentum SGD.
  const double inv = n_total > 0.0 ? 1.0 / n_total : 0.0;
  auto vel = velocity_.blocks();
  auto par = model_.blocks();
  std::vector<std::vector<std::span<double>>> chunk_blocks;
  for (auto& cg : grads) chunk_blocks.push_back(cg.blocks());
  for (std::size_t blk = 0; blk < par.size(); ++blk) {
    if (blk == 0 && !config_.train_embeddings) continue;
    for (std::size_t j = 0; j < par[blk].size(); ++j) {
      double g = 0.0;
      for (const auto& cb : chunk_blocks) g += cb[blk][j];
      g *= inv;
      vel[blk][j] = config_.momentum * vel[blk][j] + g;
      par[blk][j] -= config_.learning_rate * vel[blk][j];
    }
  }
  // Renormalizing is not bitwise idempotent, so skip it when the embeddings did not move.
  if (config_.train_embeddings && config_.learning_rate != 0.0) renormalize_embeddings(model_.emb);
  if (ema_) ema_update(*ema_, model_, *config_.ema_decay);

  std::vector<WarpSample> ws;
  ws.reserve(static_cast<std::size_t>(b));
  for (int i = 0; i < b; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (count[ui] > 0.0) ws.push_back({1.0 - times[ui], loss_sum[ui] / count[ui]});
  }
  const double warp_loss = noise_warp_.objective(ws).loss;
  noise_warp_.fit_step(ws, config_.warp_step);

  ++step_;
  return {step_, loss, warp_loss};
}

void Trainer::run(int steps, const std::function<void(const StepMetrics&)>& on_step) {
  for (int i = 0; i < steps; ++i) {
    const auto m = step();
    if (on_step) on_step(m);
  }
}

std::vector<double> midpoint_grid(int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(j)] = (j + 0.5) / n;
  return g;
}

OracleComparison compare_to_oracle(const PosteriorSource& model, const OracleSpec& spec,
                                   const PathKind& kind, const EmbeddingTable& emb,
                                   const VmfTables* tables, std::span<const double> t_grid,
                                   int per_t, std::uint64_t seed) {
  if (per_t < 1 || t_grid.empty()) throw InvalidConfig("empty held-out grid");
  const auto l = static_cast<std::size_t>(spec.length());
  const auto d = static_cast<std::size_t>(emb.dim());
  const auto total = static_cast<long>(t_grid.size()) * per_t;
  std::vector<double> model_ce(static_cast<std::size_t>(total), 0.0);
  std::vector<double> oracle_ce(static_cast<std::size_t>(total), 0.0);
  std::exception_ptr failure;

#pragma omp parallel for schedule(static)
  for (long i = 0; i < total; ++i) {
    try {
      const auto ui = static_cast<std::size_t>(i);
      const double t = t_grid[ui / static_cast<std::size_t>(per_t)];
      Rng rng = Rng::stream(seed, ui);
      const auto tokens = spec.sample(rng);
      Matrix x(l, d);
      for (std::size_t pos = 0; pos < l; ++pos) {
        corrupt(kind, emb.vectors.row(static_cast<std::size_t>(tokens[pos])), t, tables, rng, x.row(pos));
      }
      const auto q = oracle_posterior(spec, kind, emb, x, t);
      const auto p = model.posterior(x, t);
      double mc = 0.0, oc = 0.0;
      for (std::size_t pos = 0; pos < l; ++pos) {
        for (std::size_t k = 0; k < q.cols(); ++k) {
          const double qk = q(pos, k);
          if (qk <= 0.0) continue;
          mc -= qk * std::log(std::max(p(pos, k), 1e-300));
          oc -= qk * std::log(qk);
        }
      }
      model_ce[ui] = mc / static_cast<double>(l);
      oracle_ce[ui] = oc / static_cast<double>(l);
    } catch (...) {
#pragma omp critical(vmfflow_eval_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  OracleComparison out;
  for (long i = 0; i < total; ++i) {
    out.model_ce += model_ce[static_cast<std::size_t>(i)];
    out.oracle_ce += oracle_ce[static_cast<std::size_t>(i)];
  }
  out.model_ce /= static_cast<double>(total);
  out.oracle_ce /= static_cast<double>(total);
  out.kl = out.model_ce - out.oracle_ce;
  return out;
}

DataSource synthetic_source(const OracleSpec& spec) {
  return [spec](Rng& rng) { return Example{spec.sample(rng), {}}; };
}

std::vector<std::vector<int>> gen_synthetic_task(const OracleSpec& spec, int count, Rng& rng) {
  std::vector<std::vector<int>> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(spec.sample(rng));
  return out;
}

OracleSpec tiny_task_spec() {
  return OracleSpec::factorized({{0.5, 0.3, 0.2}, {0.2, 0.3, 0.5}});
}

EmbeddingTable tiny_task_embeddings() {
  EmbeddingTable emb{Matrix(3, 3, 0.0), std::vector<double>(3, 0.0), NormConvention::Unit};
  for (std::size_t k = 0; k < 3; ++k) emb.vectors(k, k) = 1.0;
  return emb;
}

}  // namespace vmfflow
