#include "vmfflow/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "vmfflow/error.hpp"
#include "vmfflow/sphere.hpp"

namespace vmfflow {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

NormConvention convention_for(const PathKind& kind) {
  switch (kind.tag) {
    case PathTag::VMF:
    case PathTag::GEODESIC:
      return NormConvention::Unit;
    case PathTag::VE:
      return NormConvention::SqrtD;
    case PathTag::VP:
      return NormConvention::Free;
  }
  return NormConvention::Unit;
}

const char* to_string(NormConvention c) {
  switch (c) {
    case NormConvention::Unit: return "unit";
    case NormConvention::SqrtD: return "sqrt_d";
    case NormConvention::Free: return "free";
  }
  return "?";
}

NormConvention parse_convention(const std::string& s) {
  if (s == "unit") return NormConvention::Unit;
  if (s == "sqrt_d") return NormConvention::SqrtD;
  if (s == "free") return NormConvention::Free;
  throw FormatError("unknown norm convention '" + s + "'");
}

namespace {
double target_norm(NormConvention c, int d) {
  switch (c) {
    case NormConvention::Unit: return 1.0;
    case NormConvention::SqrtD: return std::sqrt(static_cast<double>(d));
    case NormConvention::Free: return 0.0;
  }
  return 0.0;
}
}  // namespace

EmbeddingTable init_embeddings(int n_tokens, int d, NormConvention convention, Rng& rng) {
  EmbeddingTable emb{Matrix(static_cast<std::size_t>(n_tokens), static_cast<std::size_t>(d)),
                     std::vector<double>(static_cast<std::size_t>(n_tokens), 0.0), convention};
  for (std::size_t k = 0; k < emb.vectors.rows(); ++k) sample_uniform_sphere(emb.vectors.row(k), rng);
  if (convention == NormConvention::SqrtD) renormalize_embeddings(emb);
  return emb;
}

void renormalize_embeddings(EmbeddingTable& emb) {
  const double target = target_norm(emb.convention, emb.dim());
  if (target == 0.0) return;
  for (std::size_t k = 0; k < emb.vectors.rows(); ++k) {
    auto row = emb.vectors.row(k);
    const double n = norm(row);
    if (!(n >= 1e-12)) throw ZeroEmbedding("embedding row " + std::to_string(k) + " has zero norm");
    const double s = target / n;
    for (double& v : row) v *= s;
  }
}

void softmax_rows(const Matrix& logits, Matrix& out) {
  if (&out != &logits) out = Matrix(logits.rows(), logits.cols());
  for (std::size_t l = 0; l < logits.rows(); ++l) {
    const auto in = logits.row(l);
    auto o = out.row(l);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t k = 0; k < in.size(); ++k) z += (o[k] = std::exp(in[k] - m));
    for (double& v : o) v /= z;
  }
}

void head_logits(const EmbeddingTable& emb, const Matrix& x_hat, Matrix& out) {
  const std::size_t n = emb.vectors.rows();
  if (out.rows() != x_hat.rows() || out.cols() != n) out = Matrix(x_hat.rows(), n);
  for (std::size_t l = 0; l < x_hat.rows(); ++l) {
    for (std::size_t k = 0; k < n; ++k) out(l, k) = dot(emb.vectors.row(k), x_hat.row(l)) + emb.biases[k];
  }
}

PosteriorMatrix softmax_head(const EmbeddingTable& emb, const Matrix& x_hat) {
  Matrix s;
  head_logits(emb, x_hat, s);
  softmax_rows(s, s);
  return s;
}

PosteriorMatrix PosteriorSource::posterior(const Matrix& x, double t) const {
  Matrix s;
  logits(x, t, s);
  softmax_rows(s, s);
  return s;
}

// ---- oracle ----------------------------------------------------------------

OracleSpec::OracleSpec(int n, int l, std::vector<double> pmf) : n_(n), l_(l), pmf_(std::move(pmf)) {
  double total = 0.0;
  for (double p : pmf_) {
    if (!(p >= 0.0)) throw InvalidConfig("pmf entries must be non-negative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidConfig("pmf must sum to 1");
  cdf_.resize(pmf_.size());
  std::partial_sum(pmf_.begin(), pmf_.end(), cdf_.begin());
  for (std::size_t i = 0; i < pmf_.size(); ++i) {
    if (pmf_[i] > 0.0) support_.emplace_back(i, std::log(pmf_[i]));
  }
}

OracleSpec OracleSpec::joint(int n_tokens, int length, std::vector<double> pmf) {
  if (n_tokens < 1 || length < 1) throw InvalidConfig("oracle needs N, L >= 1");
  double size = std::pow(static_cast<double>(n_tokens), length);
  if (size > static_cast<double>(kMaxOracleSupport)) {
    throw InstanceTooLarge("N^L = " + std::to_string(size) + " exceeds 1e6");
  }
  if (pmf.size() != static_cast<std::size_t>(size)) throw InvalidConfig("pmf size must be N^L");
  return OracleSpec(n_tokens, length, std::move(pmf));
}

OracleSpec OracleSpec::factorized(const std::vector<std::vector<double>>& marginals) {
  if (marginals.empty()) throw InvalidConfig("need at least one position");
  const int n = static_cast<int>(marginals.front().size());
  const int l = static_cast<int>(marginals.size());
  for (const auto& m : marginals) {
    if (static_cast<int>(m.size()) != n) throw InvalidConfig("marginals must share N");
  }
  const double size = std::pow(static_cast<double>(n), l);
  if (size > static_cast<double>(kMaxOracleSupport)) {
    throw InstanceTooLarge("N^L = " + std::to_string(size) + " exceeds 1e6");
  }
  std::vector<double> pmf(static_cast<std::size_t>(size));
  for (std::size_t idx = 0; idx < pmf.size(); ++idx) {
    double p = 1.0;
    std::size_t rest = idx;
    for (int pos = l - 1; pos >= 0; --pos) {
      p *= marginals[static_cast<std::size_t>(pos)][rest % static_cast<std::size_t>(n)];
      rest /= static_cast<std::size_t>(n);
    }
    pmf[idx] = p;
  }
  // Renormalize away rounding so the joint sums to 1 within 1e-12.
  const double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (double& p : pmf) p /= total;
  return OracleSpec(n, l, std::move(pmf));
}

std::size_t OracleSpec::index_of(std::span<const int> tokens) const {
  std::size_t idx = 0;
  for (int tok : tokens) idx = idx * static_cast<std::size_t>(n_) + static_cast<std::size_t>(tok);
  return idx;
}

std::vector<int> OracleSpec::tokens_of(std::size_t index) const {
  std::vector<int> out(static_cast<std::size_t>(l_));
  for (int pos = l_ - 1; pos >= 0; --pos) {
    out[static_cast<std::size_t>(pos)] = static_cast<int>(index % static_cast<std::size_t>(n_));
    index /= static_cast<std::size_t>(n_);
  }
  return out;
}

std::vector<double> OracleSpec::marginal(int position) const {
  std::vector<double> m(static_cast<std::size_t>(n_), 0.0);
  for (const auto& [idx, logp] : support_) {
    m[static_cast<std::size_t>(tokens_of(idx)[static_cast<std::size_t>(position)])] += pmf_[idx];
  }
  return m;
}

std::vector<int> OracleSpec::sample(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(it - cdf_.begin()), pmf_.size() - 1);
  while (pmf_[idx] == 0.0 && idx > 0) --idx;
  return tokens_of(idx);
}

void oracle_log_posterior(const OracleSpec& spec, const PathKind& kind, const EmbeddingTable& emb,
                          const Matrix& x, double t, Matrix& out) {
  const auto n = static_cast<std::size_t>(spec.vocab());
  const auto l = static_cast<std::size_t>(spec.length());
  if (x.rows() != l || emb.vectors.rows() != n) throw InvalidConfig("oracle shape mismatch");

  Matrix ll(l, n);
  for (std::size_t pos = 0; pos < l; ++pos) {
    for (std::size_t k = 0; k < n; ++k) {
      ll(pos, k) = conditional_log_likelihood(kind, x.row(pos), emb.vectors.row(k), t);
    }
  }

  const auto& support = spec.support();
  std::vector<double> logw(support.size());
  double top = kNegInf;
  std::vector<int> toks(l);
  for (std::size_t s = 0; s < support.size(); ++s) {
    std::size_t rest = support[s].first;
    double lw = support[s].second;
    for (std::size_t pos = l; pos-- > 0;) {
      lw += ll(pos, rest % n);
      rest /= n;
    }
    logw[s] = lw;
    top = std::max(top, lw);
  }
  if (top == kNegInf) {
    // No sequence can produce x (possible on the geodesic path): fall back
    // to the prior marginals.
    for (std::size_t s = 0; s < support.size(); ++s) logw[s] = support[s].second;
    top = *std::max_element(logw.begin(), logw.end());
  }

  Matrix mass(l, n, 0.0);
  for (std::size_t s = 0; s < support.size(); ++s) {
    const double wgt = std::exp(logw[s] - top);
    if (wgt == 0.0) continue;
    std::size_t rest = support[s].first;
    for (std::size_t pos = l; pos-- > 0;) {
      mass(pos, rest % n) += wgt;
      rest /= n;
    }
  }
  out = Matrix(l, n);
  for (std::size_t pos = 0; pos < l; ++pos) {
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) z += mass(pos, k);
    for (std::size_t k = 0; k < n; ++k) {
      out(pos, k) = mass(pos, k) > 0.0 ? std::log(mass(pos, k) / z) : kNegInf;
    }
  }
}

PosteriorMatrix oracle_posterior(const OracleSpec& spec, const PathKind& kind,
                                 const EmbeddingTable& emb, const Matrix& x, double t) {
  Matrix s;
  oracle_log_posterior(spec, kind, emb, x, t, s);
  softmax_rows(s, s);
  return s;
}

OracleSource::OracleSource(OracleSpec spec, PathKind kind, EmbeddingTable emb)
    : spec_(std::move(spec)), kind_(kind), emb_(std::move(emb)) {
  if (emb_.vocab() != spec_.vocab()) throw InvalidConfig("embedding count must equal N");
}

void OracleSource::logits(const Matrix& x, double t, Matrix& out) const {
  oracle_log_posterior(spec_, kind_, emb_, x, t, out);
}

// ---- backbone ----------------------------------------------------------------

TinyBackbone TinyBackbone::zeros(int length, int dim, int hidden, bool time_conditioned) {
  TinyBackbone net;
  net.length = length;
  net.dim = dim;
  net.hidden = hidden;
  net.time_conditioned = time_conditioned;
  const auto h = static_cast<std::size_t>(hidden);
  const auto ld = static_cast<std::size_t>(length * dim);
  net.w1 = Matrix(h, static_cast<std::size_t>(net.input_dim()));
  net.b1.assign(h, 0.0);
  net.w2 = Matrix(ld, h);
  net.b2.assign(ld, 0.0);
  return net;
}

TinyBackbone TinyBackbone::init(int length, int dim, int hidden, bool time_conditioned, Rng& rng) {
  auto net = zeros(length, dim, hidden, time_conditioned);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(net.input_dim()));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (double& v : net.w1.flat()) v = s1 * rng.normal();
  for (double& v : net.w2.flat()) v = s2 * rng.normal();
  return net;
}

void TinyBackbone::forward(std::span<const double> x, double t, std::span<double> out,
                           std::span<double> hidden_out) const {
  const auto h = static_cast<std::size_t>(hidden);
  const auto nx = static_cast<std::size_t>(length * dim);
  std::vector<double> local;
  if (hidden_out.empty()) {
    local.resize(h);
    hidden_out = local;
  }
  for (std::size_t j = 0; j < h; ++j) {
    const auto row = w1.row(j);
    double a = b1[j];
    for (std::size_t i = 0; i < nx; ++i) a += row[i] * x[i];
    if (time_conditioned) a += row[nx] * t;
    hidden_out[j] = std::tanh(a);
  }
  for (std::size_t o = 0; o < nx; ++o) {
    const auto row = w2.row(o);
    double a = b2[o];
    for (std::size_t j = 0; j < h; ++j) a += row[j] * hidden_out[j];
    out[o] = a;
  }
}

Model Model::init(const PathKind& kind, int n_tokens, int length, int dim, int hidden,
                  bool time_conditioned, Rng& rng) {
  Model m{kind, init_embeddings(n_tokens, dim, convention_for(kind), rng),
          TinyBackbone::init(length, dim, hidden, time_conditioned, rng)};
  return m;
}

Model Model::zeros_like() const {
  Model z{kind, emb, TinyBackbone::zeros(net.length, net.dim, net.hidden, net.time_conditioned)};
  z.emb.vectors.fill(0.0);
  std::fill(z.emb.biases.begin(), z.emb.biases.end(), 0.0);
  return z;
}

std::vector<std::span<double>> Model::blocks() {
  return {emb.vectors.flat(), emb.biases, net.w1.flat(), net.b1, net.w2.flat(), net.b2};
}

std::vector<std::span<const double>> Model::blocks() const {
  return {emb.vectors.flat(), emb.biases, net.w1.flat(), net.b1, net.w2.flat(), net.b2};
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks()) n += b.size();
  return n;
}

void Model::logits(const Matrix& x, double t, Matrix& out) const {
  Matrix input(x.rows(), x.cols());
  precondition_input(kind, x.flat(), t, input.flat());
  Matrix x_hat(x.rows(), x.cols());
  net.forward(input.flat(), t, x_hat.flat());
  head_logits(emb, x_hat, out);
}

double backbone_backward(const Model& model, const Matrix& x, double t, std::span<const int> targets,
                         const std::vector<bool>& mask, Model& grad) {
  const auto& net = model.net;
  const auto h = static_cast<std::size_t>(net.hidden);
  const auto l = x.rows();
  const auto d = x.cols();
  const auto n = static_cast<std::size_t>(model.vocab());
  const auto nx = l * d;

  Matrix input(l, d);
  precondition_input(model.kind, x.flat(), t, input.flat());
  std::vector<double> hid(h);
  Matrix x_hat(l, d);
  net.forward(input.flat(), t, x_hat.flat(), hid);
  Matrix probs;
  head_logits(model.emb, x_hat, probs);
  softmax_rows(probs, probs);

  double loss = 0.0;
  Matrix dxhat(l, d, 0.0);
  for (std::size_t pos = 0; pos < l; ++pos) {
    if (!mask.empty() && !mask[pos]) continue;
    const auto y = static_cast<std::size_t>(targets[pos]);
    loss -= std::log(std::max(probs(pos, y), 1e-300));
    auto dx = dxhat.row(pos);
    for (std::size_t k = 0; k < n; ++k) {
      const double g = probs(pos, k) - (k == y ? 1.0 : 0.0);
      if (g == 0.0) continue;
      const auto w = model.emb.vectors.row(k);
      auto gw = grad.emb.vectors.row(k);
      for (std::size_t i = 0; i < d; ++i) {
        dx[i] += g * w[i];
        gw[i] += g * x_hat(pos, i);
      }
      grad.emb.biases[k] += g;
    }
  }

  std::vector<double> dhid(h, 0.0);
  const auto dout = dxhat.flat();
  for (std::size_t o = 0; o < nx; ++o) {
    const double g = dout[o];
    if (g == 0.0) continue;
    grad.net.b2[o] += g;
    auto gw2 = grad.net.w2.row(o);
    const auto w2 = net.w2.row(o);
    for (std::size_t j = 0; j < h; ++j) {
      gw2[j] += g * hid[j];
      dhid[j] += g * w2[j];
    }
  }
  const auto in = input.flat();
  for (std::size_t j = 0; j < h; ++j) {
    const double da = dhid[j] * (1.0 - hid[j] * hid[j]);
    if (da == 0.0) continue;
    grad.net.b1[j] += da;
    auto gw1 = grad.net.w1.row(j);
    for (std::size_t i = 0; i < nx; ++i) gw1[i] += da * in[i];
    if (net.time_conditioned) gw1[nx] += da * t;
  }
  return loss;
}

}  // namespace vmfflow
