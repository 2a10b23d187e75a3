#pragma once

// Small statistics helpers for the diagnostics: moments, KS statistics and
// total variation against a known pmf.

#include <functional>
#include <span>
#include <vector>

namespace vmfflow {

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MeanStderr mean_stderr(std::span<const double> xs);

/// One-sample Kolmogorov-Smirnov statistic sup |F_n - F|. Sorts a copy.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

/// KS against the uniform law on [lo, hi].
double ks_uniform(std::span<const double> samples, double lo, double hi);

/// Two-sample KS statistic.
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Half the l1 distance between empirical frequencies and a pmf.
double total_variation(std::span<const double> counts, std::span<const double> pmf);

}  // namespace vmfflow
