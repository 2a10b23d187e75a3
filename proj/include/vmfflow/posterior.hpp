#pragma once

// Sources of the per-position posterior p_t^l(w_k | x): the softmax head over
// token embeddings, the brute-force Bayes oracle, and the small trainable
// backbone.

#include <cstdint>
#include <span>
#include <vector>

#include "vmfflow/matrix.hpp"
#include "vmfflow/paths.hpp"
#include "vmfflow/rng.hpp"

namespace vmfflow {

enum class NormConvention { Unit, SqrtD, Free };

NormConvention convention_for(const PathKind& kind);
const char* to_string(NormConvention c);
NormConvention parse_convention(const std::string& s);

struct EmbeddingTable {
  Matrix vectors;               // N x d
  std::vector<double> biases;   // N
  NormConvention convention = NormConvention::Unit;

  int vocab() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
};

/// Gaussian-then-normalize rows (scaled to the convention), zero biases.
EmbeddingTable init_embeddings(int n_tokens, int d, NormConvention convention, Rng& rng);

/// Rescale rows to the convention's norm. Throws ZeroEmbedding on a row with
/// norm below 1e-12. No-op for the Free convention.
void renormalize_embeddings(EmbeddingTable& emb);

/// L x N row-stochastic matrix.
using PosteriorMatrix = Matrix;

/// Row-wise softmax with max subtraction. `logits` and `out` may alias.
void softmax_rows(const Matrix& logits, Matrix& out);

/// s_k^l = <w_k, x_hat^l> + b_k.
void head_logits(const EmbeddingTable& emb, const Matrix& x_hat, Matrix& out);

PosteriorMatrix softmax_head(const EmbeddingTable& emb, const Matrix& x_hat);

/// Anything that maps a noisy state (L x d) at time t to posterior logits
/// (L x N). Implementations must be safe for concurrent const calls.
class PosteriorSource {
 public:
  virtual ~PosteriorSource() = default;
  virtual int vocab() const = 0;
  virtual int length() const = 0;
  virtual void logits(const Matrix& x, double t, Matrix& out) const = 0;

  PosteriorMatrix posterior(const Matrix& x, double t) const;
};

// ---- exact oracle ---------------------------------------------------------

inline constexpr std::size_t kMaxOracleSupport = 1'000'000;

/// Joint pmf over W^L. Sequence index: token of position 0 is the most
/// significant digit in base N.
class OracleSpec {
 public:
  static OracleSpec joint(int n_tokens, int length, std::vector<double> pmf);
  static OracleSpec factorized(const std::vector<std::vector<double>>& marginals);

  int vocab() const { return n_; }
  int length() const { return l_; }
  const std::vector<double>& pmf() const { return pmf_; }

  std::size_t index_of(std::span<const int> tokens) const;
  std::vector<int> tokens_of(std::size_t index) const;
  /// Per-position marginal of p_data.
  std::vector<double> marginal(int position) const;
  /// Draw a sequence by inverse CDF over the flattened pmf.
  std::vector<int> sample(Rng& rng) const;

  /// Support entries (nonzero probability) as (index, log p).
  const std::vector<std::pair<std::size_t, double>>& support() const { return support_; }

 private:
  OracleSpec(int n, int l, std::vector<double> pmf);
  int n_ = 0;
  int l_ = 0;
  std::vector<double> pmf_;
  std::vector<double> cdf_;
  std::vector<std::pair<std::size_t, double>> support_;
};

/// Exact log posterior by enumerating the support of p_data with weights
/// p_t(x | w) p_data(w); log C_d cancels across w and is never formed.
void oracle_log_posterior(const OracleSpec& spec, const PathKind& kind, const EmbeddingTable& emb,
                          const Matrix& x, double t, Matrix& out);

PosteriorMatrix oracle_posterior(const OracleSpec& spec, const PathKind& kind,
                                 const EmbeddingTable& emb, const Matrix& x, double t);

class OracleSource final : public PosteriorSource {
 public:
  OracleSource(OracleSpec spec, PathKind kind, EmbeddingTable emb);
  int vocab() const override { return spec_.vocab(); }
  int length() const override { return spec_.length(); }
  void logits(const Matrix& x, double t, Matrix& out) const override;

  const OracleSpec& spec() const { return spec_; }
  const EmbeddingTable& embeddings() const { return emb_; }

 private:
  OracleSpec spec_;
  PathKind kind_;
  EmbeddingTable emb_;
};

// ---- trainable backbone ---------------------------------------------------

/// Two-layer tanh MLP from the flattened state (+ t when time conditioned)
/// to L*d outputs.
struct TinyBackbone {
  int length = 0;
  int dim = 0;
  int hidden = 64;
  bool time_conditioned = false;
  Matrix w1;                 // hidden x input_dim
  std::vector<double> b1;    // hidden
  Matrix w2;                 // L*d x hidden
  std::vector<double> b2;    // L*d

  int input_dim() const { return length * dim + (time_conditioned ? 1 : 0); }

  static TinyBackbone init(int length, int dim, int hidden, bool time_conditioned, Rng& rng);
  static TinyBackbone zeros(int length, int dim, int hidden, bool time_conditioned);

  /// x_hat = W2 tanh(W1 [x; t] + b1) + b2. `hidden_out` (size hidden) keeps
  /// the activations for backward; pass an empty span to skip.
  void forward(std::span<const double> x, double t, std::span<double> out,
               std::span<double> hidden_out = {}) const;
};

/// Parameters of the posterior model: embeddings, biases and backbone.
struct Model {
  PathKind kind;
  EmbeddingTable emb;
  TinyBackbone net;

  int vocab() const { return emb.vocab(); }
  int length() const { return net.length; }
  int dim() const { return net.dim; }

  static Model init(const PathKind& kind, int n_tokens, int length, int dim, int hidden,
                    bool time_conditioned, Rng& rng);
  /// Same shapes, all parameters zero (gradient / momentum buffers).
  Model zeros_like() const;

  /// Parameter blocks in checkpoint order: embeddings, biases, W1, b1, W2, b2.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  std::size_t parameter_count() const;

  /// Posterior logits for a noisy state.
  void logits(const Matrix& x, double t, Matrix& out) const;
};

/// Gradient of the summed CE over unmasked positions for one sample,
/// accumulated into `grad`. Returns the loss. `mask` empty means all
/// positions count.
double backbone_backward(const Model& model, const Matrix& x, double t, std::span<const int> targets,
                         const std::vector<bool>& mask, Model& grad);

class ModelSource final : public PosteriorSource {
 public:
  explicit ModelSource(const Model& model) : model_(&model) {}
  int vocab() const override { return model_->vocab(); }
  int length() const override { return model_->length(); }
  void logits(const Matrix& x, double t, Matrix& out) const override { model_->logits(x, t, out); }

 private:
  const Model* model_;
};

}  // namespace vmfflow
