#include "vmfflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vmfflow {

MeanStderr mean_stderr(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  if (xs.empty()) return {};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = xs.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf) {
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = cdf(s[i]);
    sup = std::max({sup, std::abs(static_cast<double>(i + 1) / n - f),
                    std::abs(f - static_cast<double>(i) / n)});
  }
  return sup;
}

double ks_uniform(std::span<const double> samples, double lo, double hi) {
  return ks_statistic(samples, [lo, hi](double x) { return std::clamp((x - lo) / (hi - lo), 0.0, 1.0); });
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return sup;
}

double total_variation(std::span<const double> counts, std::span<const double> pmf) {
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double tv = 0.0;
  for (std::size_t i = 0; i < pmf.size(); ++i) {
    const double c = i < counts.size() ? counts[i] : 0.0;
    tv += std::abs(c / total - pmf[i]);
  }
  return 0.5 * tv;
}

}  // namespace vmfflow
