#include "vmfflow/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "vmfflow/error.hpp"

namespace vmfflow {

namespace {

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) z += (out[i] = std::exp(logits[i] - m));
  for (double& v : out) v /= z;
  return out;
}

std::vector<double> cumulative(const std::vector<double>& widths) {
  std::vector<double> edges(widths.size() + 1, 0.0);
  for (std::size_t i = 0; i < widths.size(); ++i) edges[i + 1] = edges[i] + widths[i];
  edges.back() = 1.0;
  return edges;
}

}  // namespace

WarpSchedule WarpSchedule::identity(int n_bins) {
  if (n_bins < 2) throw InvalidConfig("warp needs at least 2 bins");
  const double l = -std::log(static_cast<double>(n_bins));
  return WarpSchedule(std::vector<double>(static_cast<std::size_t>(n_bins), l),
                      std::vector<double>(static_cast<std::size_t>(n_bins), l));
}

WarpSchedule::WarpSchedule(std::vector<double> logits_in, std::vector<double> logits_out,
                           double beta)
    : logits_in_(std::move(logits_in)), logits_out_(std::move(logits_out)), beta_(beta) {
  if (logits_in_.size() < 2 || logits_in_.size() != logits_out_.size()) {
    throw InvalidConfig("warp logits must have equal length >= 2");
  }
  if (!(beta_ > 0.0)) throw InvalidConfig("warp beta must be positive");
}

std::vector<double> WarpSchedule::input_edges() const { return cumulative(softmax(logits_in_)); }
std::vector<double> WarpSchedule::output_edges() const { return cumulative(softmax(logits_out_)); }

double WarpSchedule::total() const {
  double s = 0.0;
  for (double l : logits_out_) s += std::exp(l);
  return s;
}

WarpSchedule::Located WarpSchedule::locate(double t, const std::vector<double>& edges) const {
  const int n = n_bins();
  t = std::clamp(t, 0.0, 1.0);
  const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, t);
  const int j = static_cast<int>(it - (edges.begin() + 1));
  const double width = edges[static_cast<std::size_t>(j) + 1] - edges[static_cast<std::size_t>(j)];
  double frac = width > 0.0 ? (t - edges[static_cast<std::size_t>(j)]) / width : 0.0;
  frac = std::clamp(frac, 0.0, 1.0);
  return {std::min(j, n - 1), frac};
}

double WarpSchedule::cdf(double t) const {
  const auto xin = input_edges();
  const auto out = output_edges();
  const auto [j, frac] = locate(t, xin);
  const auto ju = static_cast<std::size_t>(j);
  const double f = out[ju] + frac * (out[ju + 1] - out[ju]);
  return beta_ == 1.0 ? f : std::pow(f, beta_);
}

double WarpSchedule::inverse(double u) const {
  const double f = beta_ == 1.0 ? u : std::pow(std::clamp(u, 0.0, 1.0), 1.0 / beta_);
  const auto xin = input_edges();
  const auto out = output_edges();
  const auto [j, frac] = locate(f, out);
  const auto ju = static_cast<std::size_t>(j);
  return xin[ju] + frac * (xin[ju + 1] - xin[ju]);
}

WarpGradient WarpSchedule::objective(std::span<const WarpSample> batch) const {
  const int n = n_bins();
  const auto nu = static_cast<std::size_t>(n);
  const auto widths = softmax(logits_in_);
  const auto xin = cumulative(widths);
  std::vector<double> e(nu), cum_e(nu + 1, 0.0);
  for (std::size_t i = 0; i < nu; ++i) {
    e[i] = std::exp(logits_out_[i]);
    cum_e[i + 1] = cum_e[i] + e[i];
  }
  const double s = cum_e.back();

  WarpGradient g{std::vector<double>(nu, 0.0), std::vector<double>(nu, 0.0), 0.0};
  if (batch.empty()) return g;
  const double scale = 2.0 / static_cast<double>(batch.size());
  for (const auto& sample : batch) {
    const auto [j, frac] = locate(sample.t, xin);
    const auto ju = static_cast<std::size_t>(j);
    const double u = cum_e[ju] + frac * e[ju];
    const double f = u / s;
    const double fb = beta_ == 1.0 ? f : std::pow(f, beta_);
    const double pred = s * fb;
    const double r = pred - sample.loss;
    g.loss += r * r;

    // pred = S^(1-beta) U^beta.
    const double dpred_du = beta_ == 1.0 ? 1.0 : (f > 0.0 ? beta_ * std::pow(f, beta_ - 1.0) : 0.0);
    const double c = scale * r;
    for (std::size_t i = 0; i < nu; ++i) {
      double du = 0.0;
      if (i < ju) du = e[i];
      else if (i == ju) du = frac * e[i];
      g.logits_out[i] += c * ((1.0 - beta_) * fb * e[i] + dpred_du * du);

      const double dx = (i < ju ? widths[i] : 0.0) - widths[i] * xin[ju];
      const double dw = (i == ju ? widths[ju] : 0.0) - widths[ju] * widths[i];
      const double dfrac = -dx / widths[ju] - frac * dw / widths[ju];
      g.logits_in[i] += c * dpred_du * e[ju] * dfrac;
    }
  }
  g.loss /= static_cast<double>(batch.size());
  return g;
}

void WarpSchedule::fit_step(std::span<const WarpSample> batch, double step_size) {
  const auto g = objective(batch);
  for (std::size_t i = 0; i < logits_in_.size(); ++i) {
    logits_in_[i] -= step_size * g.logits_in[i];
    logits_out_[i] -= step_size * g.logits_out[i];
  }
}

WarpSchedule WarpSchedule::reflected() const {
  return WarpSchedule(std::vector<double>(logits_in_.rbegin(), logits_in_.rend()),
                      std::vector<double>(logits_out_.rbegin(), logits_out_.rend()), beta_);
}

std::vector<double> WarpSchedule::aware_grid(int n) const {
  if (n < 1) throw InvalidConfig("grid needs n >= 1");
  std::vector<double> grid(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) grid[static_cast<std::size_t>(i)] = inverse(static_cast<double>(i) / n);
  grid.front() = 0.0;
  grid.back() = 1.0;
  return grid;
}

}  // namespace vmfflow
