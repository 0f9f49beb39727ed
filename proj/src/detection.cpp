#include "sariwatch/detection.hpp"

#include <algorithm>
#include <string>

#include "sariwatch/errors.hpp"
#include "sariwatch/stats.hpp"

namespace sariwatch {

namespace {

std::vector<Index> fence_indices(const ScoreSeries& series, double k) {
  std::vector<Index> out = boxplot_outliers(series.values, k);
  for (Index& i : out) i += series.first;
  return out;
}

}  // namespace

std::vector<Index> collapse_runs(const std::vector<Index>& sorted) {
  std::vector<Index> out;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (k == 0 || sorted[k] != sorted[k - 1] + 1) out.push_back(sorted[k]);
  }
  return out;
}

AdaptiveNormalizationResult adaptive_normalization_detail(const TimeSeries& y, Index p, double k) {
  if (p < 1) throw BoundsError("adaptive_normalization: p >= 1 violated");
  if (y.size() < p) {
    throw BoundsError("adaptive_normalization: |y| >= p violated (|y|=" + std::to_string(y.size()) +
                      ", p=" + std::to_string(p) + ")");
  }
  const Eigen::VectorXd& v = y.values();

  AdaptiveNormalizationResult out;
  out.noise.first = p;
  out.noise.values.resize(y.size() - p + 1);
  for (Index i = p; i <= y.size(); ++i) {
    // y_i - mean(window) written as the mean of (y_i - y_j): same value, but
    // an offset added to the whole series cancels term by term.
    const double yi = v(i - 1);
    double acc = 0.0;
    for (Index j = i - p + 1; j <= i; ++j) acc += yi - v(j - 1);
    out.noise.values(i - p) = acc / static_cast<double>(p);
  }

  out.events.label = y.label();
  out.events.p = p;
  out.events.anomalies = fence_indices(out.noise, k);
  return out;
}

ChangeFinderResult change_finder_detail(const TimeSeries& y, Index p, Index m, double k) {
  if (p < 1) throw BoundsError("change_finder: p >= 1 violated");
  if (m < 2) throw BoundsError("change_finder: regression window m >= 2 violated");
  if (y.size() < m + p) {
    throw BoundsError("change_finder: |y| >= m + p violated (|y|=" + std::to_string(y.size()) +
                      ", m=" + std::to_string(m) + ", p=" + std::to_string(p) + ")");
  }
  const Eigen::VectorXd& v = y.values();
  const double md = static_cast<double>(m);
  const double x_last = (md - 1.0) / 2.0;  // positions centred on the window
  const double sxx = md * (md * md - 1.0) / 12.0;

  ChangeFinderResult out;
  out.scores.first = m;
  out.scores.values.resize(y.size() - m + 1);
  for (Index i = m; i <= y.size(); ++i) {
    const Index start = i - m;  // 0-based start of [i-m+1, i]
    const double last = v(i - 1);
    double sum_r = 0.0;
    double sxy = 0.0;
    for (Index j = 0; j < m; ++j) {
      const double r = v(start + j) - last;
      sum_r += r;
      sxy += (static_cast<double>(j) - x_last) * r;
    }
    const double slope = sxy / sxx;
    // y_i - (mean + slope * x_last), with everything taken relative to y_i
    const double residual = -sum_r / md - slope * x_last;
    out.scores.values(i - m) = residual * residual;
  }

  out.smoothed.first = m + p - 1;
  out.smoothed.values = moving_average_series(out.scores.values, AverageSpec{p, 1, AverageKind::simple});

  out.raw_change_points = fence_indices(out.smoothed, k);
  out.events.label = y.label();
  out.events.p = p;
  out.events.m = m;
  out.events.change_points = collapse_runs(out.raw_change_points);

  for (Index i : fence_indices(out.scores, k)) {
    if (!std::binary_search(out.events.change_points.begin(), out.events.change_points.end(), i))
      out.events.anomalies.push_back(i);
  }
  return out;
}

EventSet consolidate_events(const EventSet& anomalies, const EventSet& change_points) {
  if (!(anomalies.label == change_points.label)) {
    throw DomainError("consolidate_events: label mismatch (" + to_string(anomalies.label) + " vs " +
                      to_string(change_points.label) + ")");
  }
  EventSet out;
  out.label = anomalies.label;
  out.anomalies = anomalies.anomalies;
  out.change_points = change_points.change_points;
  out.p = anomalies.p;
  out.m = change_points.m;
  return out;
}

}  // namespace sariwatch
