#pragma once

// Learned piecewise-linear time warp. F~ has input bin widths
// softmax(logits_in) and output heights exp(logits_out); the CDF is
// F = F~ / F~(1).

#include <span>
#include <vector>

namespace vmfflow {

struct ConcentrationSchedule {
  double kappa_max = 1.0;
  double kappa(double t) const { return kappa_max * t; }
  double kappa_dot(double /*t*/) const { return kappa_max; }
};

struct WarpSample {
  double t = 0.0;
  double loss = 0.0;
};

struct WarpGradient {
  std::vector<double> logits_in;
  std::vector<double> logits_out;
  double loss = 0.0;
};

class WarpSchedule {
 public:
  /// All logits at -log(n_bins): the identity warp.
  static WarpSchedule identity(int n_bins);

  WarpSchedule(std::vector<double> logits_in, std::vector<double> logits_out, double beta = 1.0);

  int n_bins() const { return static_cast<int>(logits_in_.size()); }
  double beta() const { return beta_; }
  const std::vector<double>& logits_in() const { return logits_in_; }
  const std::vector<double>& logits_out() const { return logits_out_; }

  /// Input edges (n_bins + 1, first 0, last 1).
  std::vector<double> input_edges() const;
  /// Normalized cumulative output heights (n_bins + 1, first 0, last 1).
  std::vector<double> output_edges() const;

  /// F~(1) = sum exp(logits_out).
  double total() const;
  /// Normalized CDF, with the power variant applied when beta != 1.
  double cdf(double t) const;
  /// Exact inverse of cdf().
  double inverse(double u) const;

  /// Value and analytic gradient of mean (F(t)^beta F~(1) - loss)^2.
  WarpGradient objective(std::span<const WarpSample> batch) const;
  /// One gradient-descent step on both logit sets.
  void fit_step(std::span<const WarpSample> batch, double step_size);

  /// The warp of 1 - T when T follows this warp: bins in reverse order.
  WarpSchedule reflected() const;

  /// n + 1 points t_i = inverse(i / n), endpoints pinned to 0 and 1.
  std::vector<double> aware_grid(int n) const;

  friend bool operator==(const WarpSchedule&, const WarpSchedule&) = default;

 private:
  struct Located {
    int bin;
    double frac;
  };
  Located locate(double t, const std::vector<double>& edges) const;

  std::vector<double> logits_in_;
  std::vector<double> logits_out_;
  double beta_ = 1.0;
};

}  // namespace vmfflow
