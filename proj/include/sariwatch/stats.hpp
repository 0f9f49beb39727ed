#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "sariwatch/errors.hpp"
#include "sariwatch/timeseries.hpp"

namespace sariwatch {

// ---------------------------------------------------------------------------
// Quantiles and the boxplot fence
// ---------------------------------------------------------------------------

/// Quantile of an already sorted sample, linear interpolation between the
/// closest order statistics (h = (n-1)·prob).
double quantile_sorted(std::span<const double> sorted, double prob);

struct Quartiles {
  double q1 = 0.0;
  double q3 = 0.0;
};

Quartiles quartiles(std::span<const double> xs);

template <typename Derived>
Quartiles quartiles(const Eigen::DenseBase<Derived>& xs) {
  const Eigen::VectorXd copy = xs.template cast<double>();
  return quartiles(std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())));
}

/// [q1 - k·iqr, q3 + k·iqr]
struct BoxplotFence {
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double k = 3.0;

  static BoxplotFence fit(std::span<const double> xs, double k = 3.0);

  double lower() const { return q1 - k * iqr; }
  double upper() const { return q3 + k * iqr; }
  bool contains(double x) const { return x >= lower() && x <= upper(); }
};

/// 0-based positions of the values outside the fence fitted to xs itself.
std::vector<Index> boxplot_outliers(std::span<const double> xs, double k = 3.0);

template <typename Derived>
std::vector<Index> boxplot_outliers(const Eigen::DenseBase<Derived>& xs, double k = 3.0) {
  const Eigen::VectorXd copy = xs.template cast<double>();
  return boxplot_outliers(std::span<const double>(copy.data(), static_cast<std::size_t>(copy.size())),
                          k);
}

// ---------------------------------------------------------------------------
// Seeded resampling
// ---------------------------------------------------------------------------

/// mt19937_64 plus an unbiased bounded draw. Unlike std::uniform_int_distribution
/// the mapping from engine output to index is fixed here, so a seed gives the
/// same stream on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct MeanCI {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int reps = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
};

/// Percentile bootstrap interval for the mean. Deterministic in (xs, reps, level, seed).
MeanCI bootstrap_mean_ci(std::span<const double> xs, int reps, double level, std::uint64_t seed);

inline MeanCI bootstrap_mean_ci(const Eigen::VectorXd& xs, int reps, double level,
                                std::uint64_t seed) {
  return bootstrap_mean_ci(std::span<const double>(xs.data(), static_cast<std::size_t>(xs.size())),
                           reps, level, seed);
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

enum class Alternative { two_sided, greater, less };

struct TestResult {
  /// min(W+, W-) for two-sided tests, W+ otherwise.
  double statistic = 0.0;
  double p_value = 1.0;
  double alpha = 0.05;
  bool significant = false;
  Index nonzero = 0;  // pairs left after dropping zero differences
  bool exact = true;
};

struct WilcoxonOptions {
  double alpha = 0.05;
  Alternative alternative = Alternative::two_sided;
  /// Largest number of non-zero differences handled by the exact distribution.
  Index exact_limit = 20;
};

/// Signed-rank test of the differences d against zero. Zero differences are
/// dropped, ties share the average rank. The exact null distribution over all
/// 2^m sign assignments is used for m <= exact_limit; otherwise a normal
/// approximation with tie and continuity correction.
TestResult wilcoxon_signed_rank(std::span<const double> differences,
                                const WilcoxonOptions& options = {});

/// Paired form on d_i = a_i - b_i.
TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                const WilcoxonOptions& options = {});

}  // namespace sariwatch
