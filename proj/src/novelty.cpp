#include "sariwatch/novelty.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sariwatch/errors.hpp"

namespace sariwatch {

namespace {

std::string range_text(IndexRange r) {
  return std::to_string(r.first) + ".." + std::to_string(r.last);
}

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

double InertialBaseline::at(Index i) const {
  if (!range.contains(i)) {
    throw BoundsError("baseline has no prediction for index " + std::to_string(i) + " (defined on " +
                      range_text(range) + ")");
  }
  return predicted(i - range.first);
}

double NoiseSummary::at(Index i) const {
  if (!window.contains(i)) {
    throw BoundsError("no residual for index " + std::to_string(i) + " (noise window " +
                      range_text(window) + ")");
  }
  return residuals(i - window.first);
}

InertialBaseline build_baseline(const TimeSeries& y, Index p, Index s, IndexRange range) {
  if (p < 1 || s < 1) throw BoundsError("build_baseline: p >= 1 and s >= 1 required");
  if (range.size() == 0) throw DomainError("build_baseline: empty range " + range_text(range));
  if (range.last > y.size()) {
    throw BoundsError("build_baseline: range " + range_text(range) + " exceeds |y|=" +
                      std::to_string(y.size()));
  }
  if (range.first - p * s < 1) {
    throw BoundsError("build_baseline: insufficient seasonal history at index " +
                      std::to_string(range.first) + " (needs i - p*s >= 1 with p=" +
                      std::to_string(p) + ", s=" + std::to_string(s) + ")");
  }

  InertialBaseline out;
  out.range = range;
  out.p = p;
  out.s = s;
  out.predicted.resize(range.size());
  const AverageSpec spec{p, s, AverageKind::exponential};
  for (Index i = range.first; i <= range.last; ++i) {
    out.predicted(i - range.first) = moving_average(y.values(), i - s, spec);
  }
  return out;
}

IndexRange default_noise_window(Index t, Index p, Index s, Index cycles) {
  return {std::max(t - cycles * s, p * s + 1), t - 1};
}

NoiseSummary pre_novelty_noise(const TimeSeries& y, const InertialBaseline& baseline,
                               IndexRange window, Index t, const BootstrapSettings& bootstrap) {
  if (window.size() == 0) throw DomainError("pre_novelty_noise: empty window " + range_text(window));
  if (window.last >= t) {
    throw DomainError("pre_novelty_noise: window " + range_text(window) +
                      " must end before t=" + std::to_string(t));
  }
  if (window.first < baseline.range.first || window.last > baseline.range.last) {
    throw BoundsError("pre_novelty_noise: window " + range_text(window) +
                      " not covered by baseline " + range_text(baseline.range));
  }

  NoiseSummary out;
  out.window = window;
  out.residuals.resize(window.size());
  for (Index i = window.first; i <= window.last; ++i) {
    out.residuals(i - window.first) = y[i] - baseline.at(i);
  }
  out.ci = bootstrap_mean_ci(out.residuals, bootstrap.reps, bootstrap.level, bootstrap.seed);
  out.mean = out.ci.mean;
  return out;
}

Eigen::VectorXd novelty_series(const TimeSeries& y, const InertialBaseline& baseline,
                               double noise_mean, Index t) {
  if (t < 1 || t > y.size()) {
    throw BoundsError("novelty_series: t=" + std::to_string(t) + " outside 1..|y|=" +
                      std::to_string(y.size()));
  }
  Eigen::VectorXd eta(y.size() - t + 1);
  for (Index i = t; i <= y.size(); ++i) eta(i - t) = (y[i] - baseline.at(i)) - noise_mean;
  return eta;
}

UnderReport under_report(const Eigen::VectorXd& eta, const Eigen::VectorXd& cov) {
  if (eta.size() != cov.size()) {
    throw DomainError("under_report: novelty and reported series differ in length (" +
                      std::to_string(eta.size()) + " vs " + std::to_string(cov.size()) + ")");
  }
  if (eta.size() == 0) throw DomainError("under_report: empty novelty window");

  UnderReport out;
  out.sub = eta - cov;
  out.cur.resize(eta.size());
  out.tx.resize(eta.size());
  double cur = 0.0;
  double reported = 0.0;
  double novelty = 0.0;
  for (Index k = 0; k < eta.size(); ++k) {
    cur += out.sub(k);
    reported += cov(k);
    novelty += eta(k);
    out.cur(k) = cur;
    out.tx(k) = reported > 0.0 ? cur / reported : std::numeric_limits<double>::quiet_NaN();
  }
  out.cum_novelty = novelty;
  out.cum_reported = reported;
  if (reported > 0.0) out.rate = out.tx(eta.size() - 1);
  return out;
}

RateEstimate rate_with_margin(const TimeSeries& y, const InertialBaseline& baseline,
                              const NoiseSummary& noise, const Eigen::VectorXd& cov, Index t) {
  const auto final_rate = [&](double eps) {
    return under_report(novelty_series(y, baseline, eps, t), cov).rate;
  };
  RateEstimate out;
  out.rate = final_rate(noise.mean);
  if (!out.rate) return out;
  const double at_lo = *final_rate(noise.ci.lo);
  const double at_hi = *final_rate(noise.ci.hi);
  out.margin = std::max(std::abs(at_lo - *out.rate), std::abs(at_hi - *out.rate));
  return out;
}

GateResult significance_gates(const Eigen::VectorXd& eta, const NoiseSummary& noise,
                              const Eigen::VectorXd& cov, Index t, const GateOptions& options) {
  if (eta.size() < 1) throw DomainError("significance_gates: empty novelty window");
  if (cov.size() != eta.size()) throw DomainError("significance_gates: cov not aligned with eta");

  const WilcoxonOptions wopts{options.alpha, options.alternative};
  GateResult out;
  if (options.noise_form == NoiseGateForm::one_sample) {
    const Eigen::VectorXd shifted = eta.array() - noise.mean;
    out.novelty = wilcoxon_signed_rank(as_span(shifted), wopts);
  } else {
    Eigen::VectorXd lagged(eta.size());
    for (Index k = 0; k < eta.size(); ++k) lagged(k) = noise.at(t + k - options.s);
    out.novelty = wilcoxon_signed_rank(as_span(eta), as_span(lagged), wopts);
  }
  out.underreport = wilcoxon_signed_rank(as_span(eta), as_span(cov), wopts);
  out.novelty_significant = out.novelty.significant;
  out.underreport_significant = out.underreport.significant;
  return out;
}

std::string_view withheld_code(Withheld w) {
  switch (w) {
    case Withheld::none: return "";
    case Withheld::no_novelty: return "°";
    case Withheld::no_underreport: return "•";
    case Withheld::no_reported: return "no-reported";
  }
  return "";
}

NoveltyResult estimate_novelty(const TimeSeries& y, const TimeSeries& reported,
                               const NoveltyConfig& config) {
  if (reported.size() != y.size()) {
    throw DomainError("estimate_novelty: reported series length " +
                      std::to_string(reported.size()) + " differs from |y|=" +
                      std::to_string(y.size()));
  }
  const Index t = config.t;
  if (t < 2 || t > y.size()) {
    throw BoundsError("estimate_novelty: t=" + std::to_string(t) + " outside 2..|y|=" +
                      std::to_string(y.size()));
  }
  const IndexRange window =
      config.noise_window.value_or(default_noise_window(t, config.p, config.s, config.noise_cycles));

  NoveltyResult out;
  out.t = t;
  out.baseline = build_baseline(y, config.p, config.s, {std::min(window.first, t), y.size()});
  out.noise = pre_novelty_noise(y, out.baseline, window, t, config.bootstrap);

  const Eigen::VectorXd eta = novelty_series(y, out.baseline, out.noise.mean, t);
  const Eigen::VectorXd cov = reported.values().tail(y.size() - t + 1);
  const UnderReport ur = under_report(eta, cov);
  const RateEstimate estimate = rate_with_margin(y, out.baseline, out.noise, cov, t);

  out.weeks.reserve(static_cast<std::size_t>(eta.size()));
  for (Index k = 0; k < eta.size(); ++k) {
    const Index i = t + k;
    out.weeks.push_back({i, y[i], out.baseline.at(i), eta(k), cov(k), ur.sub(k), ur.cur(k), ur.tx(k)});
  }
  out.cum_novelty = ur.cum_novelty;
  out.cum_reported = ur.cum_reported;
  out.raw_rate = estimate.rate;
  out.margin = estimate.margin;
  out.gates = significance_gates(eta, out.noise, cov, t, config.gates);

  if (!ur.rate) {
    out.withheld = Withheld::no_reported;
  } else if (!out.gates.novelty_significant) {
    out.withheld = Withheld::no_novelty;
  } else if (!out.gates.underreport_significant) {
    out.withheld = Withheld::no_underreport;
  }
  return out;
}

}  // namespace sariwatch
