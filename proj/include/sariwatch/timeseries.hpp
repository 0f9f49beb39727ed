#pragma once

// Weekly series, subsequence extraction, and the simple / exponential moving
// averages (continuous and seasonal). Everything here is header-only and
// templated on the scalar type of the underlying Eigen vector.
//
// Indexing follows the surveillance convention: position 1 is the oldest
// week and position |y| the most recent. Eigen storage stays 0-based; the
// conversion happens once, at the API boundary.

#include <Eigen/Core>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "sariwatch/errors.hpp"

namespace sariwatch {

using Index = Eigen::Index;

enum class Measure { cases, deaths };

constexpr std::string_view to_string(Measure m) {
  return m == Measure::cases ? "cases" : "deaths";
}

/// Accepts English and Portuguese spellings, case-insensitive.
inline std::optional<Measure> parse_measure(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "cases" || lower == "casos" || lower == "case") return Measure::cases;
  if (lower == "deaths" || lower == "obitos" || lower == "óbitos" || lower == "death")
    return Measure::deaths;
  return std::nullopt;
}

struct SeriesLabel {
  std::string region;
  Measure measure = Measure::cases;

  friend bool operator==(const SeriesLabel&, const SeriesLabel&) = default;
};

inline std::string to_string(const SeriesLabel& label) {
  return label.region + "/" + std::string(to_string(label.measure));
}

/// Non-negative weekly counts for one (region, measure) pair.
template <typename Scalar>
class BasicTimeSeries {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTimeSeries() = default;

  BasicTimeSeries(SeriesLabel label, Vector values)
      : label_(std::move(label)), values_(std::move(values)) {
    for (Index k = 0; k < values_.size(); ++k) {
      const Scalar v = values_(k);
      if (!std::isfinite(static_cast<double>(v)) || v < Scalar(0)) {
        throw DomainError("time series " + to_string(label_) + ": value at index " +
                          std::to_string(k + 1) + " is negative or not finite");
      }
    }
  }

  const SeriesLabel& label() const { return label_; }
  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }

  /// 1-based access.
  Scalar operator[](Index i) const {
    if (i < 1 || i > size()) {
      throw BoundsError("time series " + to_string(label_) + ": index " + std::to_string(i) +
                        " outside 1.." + std::to_string(size()));
    }
    return values_(i - 1);
  }

  /// The first n weeks (n = new |y|).
  BasicTimeSeries head(Index n) const {
    if (n < 0 || n > size()) {
      throw BoundsError("time series " + to_string(label_) + ": cannot keep " +
                        std::to_string(n) + " of " + std::to_string(size()) + " weeks");
    }
    return BasicTimeSeries(label_, values_.head(n));
  }

 private:
  SeriesLabel label_;
  Vector values_;
};

using TimeSeries = BasicTimeSeries<double>;

template <typename Scalar>
struct BasicSubsequence {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> values;
  Index origin = 0;  // 1-based index of the newest element
  Index lag = 1;     // 1 = continuous
};

using Subsequence = BasicSubsequence<double>;

/// <y[i-(p-1)s], ..., y[i-s], y[i]>. Requires i - (p-1)s >= 1, which is
/// stricter than p <= i whenever s > 1.
template <typename Derived>
BasicSubsequence<typename Derived::Scalar> seasonal_subsequence(
    const Eigen::DenseBase<Derived>& y, Index i, Index p, Index s) {
  const auto where = [&] {
    return " (i=" + std::to_string(i) + ", p=" + std::to_string(p) + ", s=" + std::to_string(s) +
           ", |y|=" + std::to_string(y.size()) + ")";
  };
  if (p < 1) throw BoundsError("subsequence: p >= 1 violated" + where());
  if (s < 1) throw BoundsError("subsequence: s >= 1 violated" + where());
  if (i < 1 || i > y.size()) throw BoundsError("subsequence: 1 <= i <= |y| violated" + where());
  if (i - (p - 1) * s < 1) {
    throw BoundsError(s == 1 ? "subsequence: p <= i violated" + where()
                             : "subsequence: i - (p-1)*s >= 1 violated" + where());
  }

  BasicSubsequence<typename Derived::Scalar> out;
  out.values.resize(p);
  out.origin = i;
  out.lag = s;
  for (Index k = 0; k < p; ++k) out.values(k) = y.derived().coeff(i - 1 - (p - 1 - k) * s);
  return out;
}

/// <y[i-(p-1)], ..., y[i]>.
template <typename Derived>
BasicSubsequence<typename Derived::Scalar> subsequence(const Eigen::DenseBase<Derived>& y, Index i,
                                                       Index p) {
  return seasonal_subsequence(y, i, p, 1);
}

template <typename Scalar>
BasicSubsequence<Scalar> subsequence(const BasicTimeSeries<Scalar>& y, Index i, Index p) {
  return subsequence(y.values(), i, p);
}

template <typename Scalar>
BasicSubsequence<Scalar> seasonal_subsequence(const BasicTimeSeries<Scalar>& y, Index i, Index p,
                                              Index s) {
  return seasonal_subsequence(y.values(), i, p, s);
}

enum class AverageKind { simple, exponential };

struct AverageSpec {
  Index p = 1;
  Index s = 1;  // 1 = continuous, otherwise the seasonal lag
  AverageKind kind = AverageKind::simple;
};

/// Smallest i at which an average with these parameters is defined.
constexpr Index first_defined_index(const AverageSpec& spec) { return (spec.p - 1) * spec.s + 1; }

/// alpha_k = (1 - 2/(p+1))^(p-k) for k = 1..p, oldest first. The newest term
/// always has weight 1.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> exponential_weights(Index p) {
  if (p < 1) throw BoundsError("exponential_weights: p >= 1 violated");
  const Scalar decay = Scalar(1) - Scalar(2) / Scalar(p + 1);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(p);
  w(p - 1) = Scalar(1);
  for (Index k = p - 2; k >= 0; --k) w(k) = w(k + 1) * decay;
  return w;
}

/// Simple or exponential moving average of the (seasonal) subsequence ending at i.
template <typename Derived>
typename Derived::Scalar moving_average(const Eigen::DenseBase<Derived>& y, Index i,
                                        const AverageSpec& spec) {
  using Scalar = typename Derived::Scalar;
  const auto seq = seasonal_subsequence(y, i, spec.p, spec.s);
  Scalar avg;
  if (spec.kind == AverageKind::simple) {
    avg = seq.values.mean();
  } else {
    const auto w = exponential_weights<Scalar>(spec.p);
    avg = w.dot(seq.values) / w.sum();
  }
  // A weighted mean lies in [min, max]; rounding can step just outside.
  return std::clamp(avg, seq.values.minCoeff(), seq.values.maxCoeff());
}

template <typename Scalar>
Scalar moving_average(const BasicTimeSeries<Scalar>& y, Index i, const AverageSpec& spec) {
  return moving_average(y.values(), i, spec);
}

/// Averages at every defined index, i.e. first_defined_index(spec)..|y|.
/// Element 0 of the result belongs to index first_defined_index(spec).
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> moving_average_series(
    const Eigen::DenseBase<Derived>& y, const AverageSpec& spec) {
  const Index first = first_defined_index(spec);
  if (spec.p < 1 || spec.s < 1 || y.size() < first) {
    throw BoundsError("moving_average_series: series of length " + std::to_string(y.size()) +
                      " too short for p=" + std::to_string(spec.p) +
                      ", s=" + std::to_string(spec.s));
  }
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out(y.size() - first + 1);
  for (Index i = first; i <= y.size(); ++i) out(i - first) = moving_average(y, i, spec);
  return out;
}

}  // namespace sariwatch
