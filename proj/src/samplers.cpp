#include "vmfflow/samplers.hpp"

#include <cmath>
#include <exception>

#include "vmfflow/error.hpp"
#include "vmfflow/sphere.hpp"

namespace vmfflow {

std::string SamplerConfig::flags() const {
  if (warp_aware && damping) return "wd";
  if (warp_aware) return "w";
  if (damping) return "d";
  return "-";
}

void SamplerConfig::validate(const PathKind& kind) const {
  if (n_predictor < 1) throw InvalidConfig("n must be >= 1");
  if (k_corrector < 0) throw InvalidConfig("k must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidConfig("epsilon must be > 0");
  if (!(sigma >= 0.0)) throw InvalidConfig("sigma must be >= 0");
  if (!kind.has_score() && (k_corrector > 0 || sigma > 0.0)) {
    throw ScoreUnavailable(kind.name() + " path has no score; use the predictor only (k = 0, sigma = 0)");
  }
}

std::vector<double> time_grid(const SamplerConfig& config, const WarpSchedule* warp) {
  const int n = config.n_predictor;
  if (n < 1) throw InvalidConfig("n must be >= 1");
  if (config.warp_aware && warp != nullptr) return warp->aware_grid(n);
  std::vector<double> grid(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) grid[static_cast<std::size_t>(i)] = static_cast<double>(i) / n;
  return grid;
}

double effective_epsilon(const SamplerConfig& config, const PathKind& kind, double t) {
  if (!config.damping) return config.epsilon;
  const double u = progress(kind, t);
  return config.epsilon * (1.0 - u) * (1.0 - u);
}

double sampler_time(const PathKind& kind, double t) {
  if (kind.tag == PathTag::VP) return std::min(t, 1.0 - kVpTimeCap);
  return t;
}

void euler_step(const PathKind& kind, Matrix& state, const PosteriorMatrix& post, double t,
                double dt, const EmbeddingTable& emb, const VmfTables* tables) {
  if (!(dt > 0.0)) throw InvalidConfig("dt must be > 0");
  FieldTerms terms{dt, 0.0};
  if (kind.tag == PathTag::VMF) terms.kappa_increment = kind.kappa(t + dt) - kind.kappa(t);
  Matrix inc;
  assemble_field(kind, post, state, t, emb, tables, terms, inc, Exec::Serial);
  for (std::size_t l = 0; l < state.rows(); ++l) {
    if (kind.spherical()) {
      retract_inplace(state.row(l), inc.row(l));
    } else {
      auto x = state.row(l);
      const auto v = inc.row(l);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += v[i];
    }
  }
}

void langevin_step(const PathKind& kind, Matrix& state, const PosteriorMatrix& post, double t,
                   double eps_eff, const EmbeddingTable& emb, Rng& rng, bool noise) {
  if (!kind.has_score()) throw ScoreUnavailable(kind.name() + " path has no score");
  if (eps_eff < 0.0) throw InvalidConfig("corrector step must be >= 0");
  if (eps_eff == 0.0) return;
  Matrix g;
  assemble_field(kind, post, state, t, emb, nullptr, FieldTerms{0.0, 1.0}, g, Exec::Serial);
  const double amp = std::sqrt(2.0 * eps_eff);
  std::vector<double> eta(state.cols());
  for (std::size_t l = 0; l < state.rows(); ++l) {
    auto x = state.row(l);
    const auto gl = g.row(l);
    for (std::size_t i = 0; i < eta.size(); ++i) {
      eta[i] = eps_eff * gl[i] + (noise ? amp * rng.normal() : 0.0);
    }
    if (kind.spherical()) {
      project_tangent(x, eta, eta);
      retract_inplace(x, eta);
    } else {
      for (std::size_t i = 0; i < eta.size(); ++i) x[i] += eta[i];
    }
  }
}

void apply_clues(const ClueMask& clues, const EmbeddingTable& emb, Matrix& state) {
  for (std::size_t l = 0; l < clues.pinned.size(); ++l) {
    if (!clues.pinned[l]) continue;
    const auto w = emb.vectors.row(static_cast<std::size_t>(clues.values[l]));
    std::copy(w.begin(), w.end(), state.row(l).begin());
  }
}

void sample_prior(const PathKind& kind, Rng& rng, Matrix& state) {
  for (std::size_t l = 0; l < state.rows(); ++l) {
    auto x = state.row(l);
    switch (kind.tag) {
      case PathTag::VMF:
      case PathTag::GEODESIC:
        sample_uniform_sphere(x, rng);
        break;
      case PathTag::VP:
        rng.fill_normal(x);
        break;
      case PathTag::VE:
        rng.fill_normal(x);
        for (double& v : x) v *= kind.sigma_max;
        break;
    }
  }
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t l = 0; l < logits.rows(); ++l) {
    const auto r = logits.row(l);
    std::size_t best = 0;
    for (std::size_t k = 1; k < r.size(); ++k) {
      if (r[k] > r[best]) best = k;
    }
    out[l] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> decode(const EmbeddingTable& emb, const Matrix& x_hat) {
  Matrix s;
  head_logits(emb, x_hat, s);
  return argmax_rows(s);
}

namespace {

void check_context(const SamplerContext& ctx) {
  if (ctx.emb == nullptr || ctx.source == nullptr) throw InvalidConfig("sampler needs embeddings and a source");
  if (ctx.kind.tag == PathTag::VMF && ctx.tables == nullptr) throw InvalidConfig("vmf sampler needs tables");
}

Matrix evaluate(const SamplerContext& ctx, const Matrix& state, double t, int& nfe) {
  Matrix p;
  ctx.source->logits(state, sampler_time(ctx.kind, t), p);
  softmax_rows(p, p);
  ++nfe;
  return p;
}

void finish(const SamplerContext& ctx, SampleResult& res) {
  Matrix s;
  ctx.source->logits(res.state, sampler_time(ctx.kind, 1.0), s);
  res.tokens = argmax_rows(s);
  softmax_rows(s, s);
  double h = 0.0;
  for (double p : s.flat()) {
    if (p > 0.0) h -= p * std::log(p);
  }
  res.terminal_entropy = h / static_cast<double>(s.rows());
}

}  // namespace

SampleResult pc_sample(const SamplerContext& ctx, const SamplerConfig& config,
                       const ClueMask* clues, Rng& rng) {
  check_context(ctx);
  config.validate(ctx.kind);
  const auto grid = time_grid(config, ctx.warp);
  SampleResult res;
  res.state = Matrix(static_cast<std::size_t>(ctx.source->length()), static_cast<std::size_t>(ctx.dim));
  sample_prior(ctx.kind, rng, res.state);
  if (clues != nullptr) apply_clues(*clues, *ctx.emb, res.state);

  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = grid[i];
    const double dt = grid[i + 1] - t;
    const auto post = evaluate(ctx, res.state, t, res.nfe_used);
    euler_step(ctx.kind, res.state, post, sampler_time(ctx.kind, t), dt, *ctx.emb, ctx.tables);
    if (clues != nullptr) apply_clues(*clues, *ctx.emb, res.state);

    const double t1 = grid[i + 1];
    for (int j = 0; j < config.k_corrector; ++j) {
      const auto p = evaluate(ctx, res.state, t1, res.nfe_used);
      const double eps = effective_epsilon(config, ctx.kind, t1);
      langevin_step(ctx.kind, res.state, p, sampler_time(ctx.kind, t1), eps, *ctx.emb, rng);
      if (clues != nullptr) apply_clues(*clues, *ctx.emb, res.state);
    }
  }
  finish(ctx, res);
  return res;
}

SampleResult sde_sample(const SamplerContext& ctx, const SamplerConfig& config,
                        const ClueMask* clues, Rng& rng) {
  check_context(ctx);
  config.validate(ctx.kind);
  const auto grid = time_grid(config, ctx.warp);
  const auto& kind = ctx.kind;
  SampleResult res;
  res.state = Matrix(static_cast<std::size_t>(ctx.source->length()), static_cast<std::size_t>(ctx.dim));
  sample_prior(kind, rng, res.state);
  if (clues != nullptr) apply_clues(*clues, *ctx.emb, res.state);

  const double sigma = config.sigma;
  std::vector<double> step(static_cast<std::size_t>(ctx.dim));
  Matrix inc;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double t = sampler_time(kind, grid[i]);
    const double dt = grid[i + 1] - grid[i];
    const auto post = evaluate(ctx, res.state, grid[i], res.nfe_used);
    FieldTerms terms{dt, dt * 0.5 * sigma * sigma};
    if (kind.tag == PathTag::VMF) terms.kappa_increment = kind.kappa(t + dt) - kind.kappa(t);
    assemble_field(kind, post, res.state, t, *ctx.emb, ctx.tables, terms, inc, Exec::Serial);
    const double amp = sigma * std::sqrt(dt);
    for (std::size_t l = 0; l < res.state.rows(); ++l) {
      auto x = res.state.row(l);
      const auto v = inc.row(l);
      if (sigma > 0.0) {
        rng.fill_normal(step);
        if (kind.spherical()) project_tangent(x, step, step);
        for (std::size_t c = 0; c < step.size(); ++c) step[c] = v[c] + amp * step[c];
      } else {
        std::copy(v.begin(), v.end(), step.begin());
      }
      if (kind.spherical()) {
        retract_inplace(x, step);
      } else {
        for (std::size_t c = 0; c < step.size(); ++c) x[c] += step[c];
      }
    }
    if (clues != nullptr) apply_clues(*clues, *ctx.emb, res.state);
  }
  finish(ctx, res);
  return res;
}

std::vector<SampleResult> sample_batch(const SamplerContext& ctx, const SamplerConfig& config,
                                       int count, std::span<const ClueMask> clues, Exec exec) {
  config.validate(ctx.kind);
  if (!clues.empty() && clues.size() != static_cast<std::size_t>(count)) {
    throw InvalidConfig("one clue mask per sequence required");
  }
  std::vector<SampleResult> out(static_cast<std::size_t>(count));
  std::exception_ptr failure;
  auto run = [&](int i) {
    const auto ui = static_cast<std::size_t>(i);
    Rng rng = Rng::stream(config.seed, ui);
    const ClueMask* mask = clues.empty() ? nullptr : &clues[ui];
    out[ui] = config.sigma > 0.0 ? sde_sample(ctx, config, mask, rng) : pc_sample(ctx, config, mask, rng);
  };
  if (exec == Exec::Serial) {
    for (int i = 0; i < count; ++i) run(i);
    return out;
  }
#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < count; ++i) {
    try {
      run(i);
    } catch (...) {
#pragma omp critical(vmfflow_sample_error)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace vmfflow
