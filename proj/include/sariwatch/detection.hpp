#pragma once

// Rupture detectors: Adaptive Normalization (anomalies from moving-average
// residuals) and Change Finder (change points from smoothed regression
// scores). Both apply the 3·IQR boxplot fence from stats.hpp.

#include <Eigen/Core>

#include <vector>

#include "sariwatch/timeseries.hpp"

namespace sariwatch {

/// Detected events for one series. Indices are 1-based and sorted.
struct EventSet {
  SeriesLabel label;
  std::vector<Index> anomalies;
  std::vector<Index> change_points;
  Index p = 0;  // averaging term count used by the detector
  Index m = 0;  // regression window, 0 when not applicable
};

/// Non-negative scores aligned to series indices first..first+size-1.
struct ScoreSeries {
  Index first = 1;
  Eigen::VectorXd values;

  Index last() const { return first + values.size() - 1; }
};

struct AdaptiveNormalizationResult {
  EventSet events;
  /// eps_i = y_i - SMA_{i,p}, defined for p <= i <= |y|.
  ScoreSeries noise;
};

AdaptiveNormalizationResult adaptive_normalization_detail(const TimeSeries& y, Index p,
                                                          double k = 3.0);

/// Anomalies only; change_points stays empty.
inline EventSet adaptive_normalization(const TimeSeries& y, Index p, double k = 3.0) {
  return adaptive_normalization_detail(y, p, k).events;
}

struct ChangeFinderResult {
  EventSet events;
  ScoreSeries scores;    // s_i, i >= m
  ScoreSeries smoothed;  // SMA of s with p terms, i >= m + p - 1
  /// Change-point indices before run collapsing.
  std::vector<Index> raw_change_points;
};

/// Phase 1: trailing-window OLS (value on position) over [i-m+1, i], scored
/// by the squared residual at i; fence outliers of s are anomalies. Phase 2:
/// fence outliers of the p-term moving average of s are change points, each
/// run of consecutive flags reported by its first index. An index flagged by
/// both phases is kept only as a change point.
ChangeFinderResult change_finder_detail(const TimeSeries& y, Index p, Index m, double k = 3.0);

inline EventSet change_finder(const TimeSeries& y, Index p, Index m, double k = 3.0) {
  return change_finder_detail(y, p, m, k).events;
}

/// Anomalies taken from the first set, change points from the second.
EventSet consolidate_events(const EventSet& anomalies, const EventSet& change_points);

/// First index of every run of consecutive indices in a sorted set.
std::vector<Index> collapse_runs(const std::vector<Index>& sorted);

}  // namespace sariwatch
