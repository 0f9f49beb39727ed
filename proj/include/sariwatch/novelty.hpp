#pragma once

// Inertial baseline, pre-novelty noise, novelty and under-reporting.
//
//   baseline   yhat_i = SEMA of <y[i-p·s], ..., y[i-s]>     (seasonal EMA one season back)
//   noise      eps_i  = y_i - yhat_i over the pre-novelty window, mean eps_bar
//   novelty    eta_i  = y_i - yhat_i - eps_bar               for t <= i <= |y|
//   weekly     sub_i  = eta_i - cov_i
//   cumulative cur_i  = sum_{j=t..i} sub_j
//   rate       tx_i   = cur_i / sum_{j=t..i} cov_j

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "sariwatch/stats.hpp"
#include "sariwatch/timeseries.hpp"

namespace sariwatch {

/// Closed 1-based index interval.
struct IndexRange {
  Index first = 1;
  Index last = 0;

  Index size() const { return last >= first ? last - first + 1 : 0; }
  bool contains(Index i) const { return i >= first && i <= last; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct InertialBaseline {
  IndexRange range;
  Eigen::VectorXd predicted;  // predicted(k) belongs to index range.first + k
  Index p = 0;
  Index s = 0;

  /// Prediction at 1-based index i.
  double at(Index i) const;
};

/// Seasonal exponential moving average over the p seasonal predecessors of
/// each index in range. Needs i - p·s >= 1 throughout.
InertialBaseline build_baseline(const TimeSeries& y, Index p, Index s, IndexRange range);

/// Weeks t - cycles·s .. t-1, clipped below to the first index with a baseline.
IndexRange default_noise_window(Index t, Index p, Index s, Index cycles = 4);

struct NoiseSummary {
  IndexRange window;
  Eigen::VectorXd residuals;  // residuals(k) belongs to window.first + k
  double mean = 0.0;
  MeanCI ci;

  /// Residual at 1-based index i.
  double at(Index i) const;
};

struct BootstrapSettings {
  int reps = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
};

/// eps_i = y_i - baseline_i over window, plus the bootstrap CI of the mean.
/// The window must end before t and be covered by the baseline.
NoiseSummary pre_novelty_noise(const TimeSeries& y, const InertialBaseline& baseline,
                               IndexRange window, Index t, const BootstrapSettings& bootstrap);

/// eta_i = y_i - baseline_i - noise_mean for t <= i <= |y|. Negative values are kept.
Eigen::VectorXd novelty_series(const TimeSeries& y, const InertialBaseline& baseline,
                               double noise_mean, Index t);

struct UnderReport {
  Eigen::VectorXd sub;  // weekly
  Eigen::VectorXd cur;  // cumulative
  Eigen::VectorXd tx;   // cumulative rate; NaN while no reported observations yet
  double cum_novelty = 0.0;
  double cum_reported = 0.0;
  /// tx at the final week, absent when the cumulative reported count is zero.
  std::optional<double> rate;
};

/// eta and cov are aligned on t..|y|.
UnderReport under_report(const Eigen::VectorXd& eta, const Eigen::VectorXd& cov);

struct RateEstimate {
  std::optional<double> rate;
  double margin = 0.0;
};

/// Final rate evaluated with eps_bar, eps_min and eps_max in place of the
/// noise term; the margin is the larger deviation of the two endpoint rates.
/// cov is aligned on t..|y|.
RateEstimate rate_with_margin(const TimeSeries& y, const InertialBaseline& baseline,
                              const NoiseSummary& noise, const Eigen::VectorXd& cov, Index t);

/// How the novelty-vs-noise gate is formed.
enum class NoiseGateForm {
  one_sample,  // signed-rank of (eta_i - eps_bar) against zero
  paired,      // eta_i paired with eps_{i-s}, the residual one season earlier
};

struct GateOptions {
  double alpha = 0.05;
  Alternative alternative = Alternative::two_sided;
  NoiseGateForm noise_form = NoiseGateForm::one_sample;
  Index s = 52;  // lag for the paired form
};

struct GateResult {
  TestResult novelty;      // the ° gate
  TestResult underreport;  // the • gate
  bool novelty_significant = false;
  bool underreport_significant = false;
};

/// eta and cov are aligned on t..|y|.
GateResult significance_gates(const Eigen::VectorXd& eta, const NoiseSummary& noise,
                              const Eigen::VectorXd& cov, Index t, const GateOptions& options);

enum class Withheld {
  none,
  no_novelty,       // ° novelty indistinguishable from noise
  no_underreport,   // • novelty indistinguishable from reported counts
  no_reported,      // no reported observations in the window
};

std::string_view withheld_code(Withheld w);

struct WeekRecord {
  Index index = 0;
  double observed = 0.0;
  double baseline = 0.0;
  double novelty = 0.0;
  double reported = 0.0;
  double sub = 0.0;
  double cur = 0.0;
  double tx = 0.0;  // NaN while no reported observations yet
};

struct NoveltyConfig {
  Index p = 4;
  Index s = 52;
  Index t = 584;
  /// Pre-novelty window; default_noise_window(t, p, s, noise_cycles) when unset.
  std::optional<IndexRange> noise_window;
  Index noise_cycles = 4;
  BootstrapSettings bootstrap;
  GateOptions gates;
};

struct NoveltyResult {
  Index t = 0;
  InertialBaseline baseline;  // over noise window and t..|y|
  NoiseSummary noise;
  std::vector<WeekRecord> weeks;
  double cum_novelty = 0.0;
  double cum_reported = 0.0;
  std::optional<double> raw_rate;  // tx_{|y|} regardless of gates
  double margin = 0.0;
  GateResult gates;
  Withheld withheld = Withheld::none;

  /// The rate as it may be reported: absent whenever withheld.
  std::optional<double> rate() const {
    return withheld == Withheld::none ? raw_rate : std::nullopt;
  }
};

/// Full chain for one series: baseline, noise, novelty, under-reporting,
/// gates, rate ± margin. |y| is y.size(); reported must have the same length.
NoveltyResult estimate_novelty(const TimeSeries& y, const TimeSeries& reported,
                               const NoveltyConfig& config);

}  // namespace sariwatch
