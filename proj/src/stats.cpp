#include "sariwatch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace sariwatch {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct SignedRanks {
  std::vector<double> ranks;  // average ranks of |d|, in input order
  std::vector<bool> positive;
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

SignedRanks rank_nonzero(const std::vector<double>& d) {
  const std::size_t m = d.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  SignedRanks out;
  out.ranks.assign(m, 0.0);
  out.positive.assign(m, false);
  std::size_t start = 0;
  while (start < m) {
    std::size_t end = start + 1;
    while (end < m && std::abs(d[order[end]]) == std::abs(d[order[start]])) ++end;
    // positions start..end-1 hold ranks start+1..end
    const double avg = 0.5 * static_cast<double>(start + 1 + end);
    for (std::size_t k = start; k < end; ++k) out.ranks[order[k]] = avg;
    const double t = static_cast<double>(end - start);
    out.tie_term += t * t * t - t;
    start = end;
  }
  for (std::size_t k = 0; k < m; ++k) out.positive[k] = d[k] > 0.0;
  return out;
}

// Lower and upper tail probabilities of W+ under the null, counted over all
// 2^m sign assignments. Average ranks are half-integers, so doubled ranks
// are integers and the distribution of 2·W+ fits an integer-indexed table.
std::pair<double, double> exact_tails(const std::vector<double>& ranks, double w_plus) {
  std::vector<long> doubled(ranks.size());
  long total = 0;
  for (std::size_t k = 0; k < ranks.size(); ++k) {
    doubled[k] = std::lround(2.0 * ranks[k]);
    total += doubled[k];
  }
  std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
  counts[0] = 1.0;
  long reach = 0;
  for (long r : doubled) {
    for (long w = reach; w >= 0; --w) {
      if (counts[static_cast<std::size_t>(w)] != 0.0)
        counts[static_cast<std::size_t>(w + r)] += counts[static_cast<std::size_t>(w)];
    }
    reach += r;
  }
  const long observed = std::lround(2.0 * w_plus);
  double le = 0.0;
  double ge = 0.0;
  for (long w = 0; w <= total; ++w) {
    if (w <= observed) le += counts[static_cast<std::size_t>(w)];
    if (w >= observed) ge += counts[static_cast<std::size_t>(w)];
  }
  const double n_assign = std::ldexp(1.0, static_cast<int>(ranks.size()));
  return {le / n_assign, ge / n_assign};
}

}  // namespace

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  prob = std::clamp(prob, 0.0, 1.0);
  const double h = static_cast<double>(sorted.size() - 1) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Quartiles quartiles(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("quartiles of an empty sample");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  return {quantile_sorted(sorted, 0.25), quantile_sorted(sorted, 0.75)};
}

BoxplotFence BoxplotFence::fit(std::span<const double> xs, double k) {
  const Quartiles q = quartiles(xs);
  return {q.q1, q.q3, q.q3 - q.q1, k};
}

std::vector<Index> boxplot_outliers(std::span<const double> xs, double k) {
  const BoxplotFence fence = BoxplotFence::fit(xs, k);
  std::vector<Index> out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!fence.contains(xs[i])) out.push_back(static_cast<Index>(i));
  }
  return out;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw DomainError("Rng::below(0)");
  // reject the first (2^64 mod n) values so every residue is equally likely
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return x % n;
  }
}

MeanCI bootstrap_mean_ci(std::span<const double> xs, int reps, double level, std::uint64_t seed) {
  if (xs.size() < 2) {
    throw DomainError("bootstrap_mean_ci: need at least 2 observations, got " +
                      std::to_string(xs.size()));
  }
  if (reps < 1) throw DomainError("bootstrap_mean_ci: reps must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw DomainError("bootstrap_mean_ci: level must be in (0, 1)");

  const std::size_t n = xs.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  Rng rng(seed);
  std::vector<double> means(static_cast<std::size_t>(reps));
  for (double& m : means) {
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += xs[rng.below(n)];
    m = sum * inv_n;
  }
  std::sort(means.begin(), means.end());

  MeanCI ci;
  ci.mean = std::accumulate(xs.begin(), xs.end(), 0.0) * inv_n;
  ci.lo = quantile_sorted(means, (1.0 - level) / 2.0);
  ci.hi = quantile_sorted(means, 1.0 - (1.0 - level) / 2.0);
  ci.reps = reps;
  ci.level = level;
  ci.seed = seed;
  return ci;
}

TestResult wilcoxon_signed_rank(std::span<const double> differences,
                                const WilcoxonOptions& options) {
  TestResult result;
  result.alpha = options.alpha;

  std::vector<double> d;
  d.reserve(differences.size());
  for (double x : differences) {
    if (!std::isfinite(x)) throw DomainError("wilcoxon_signed_rank: non-finite difference");
    if (x != 0.0) d.push_back(x);
  }
  const auto m = static_cast<Index>(d.size());
  result.nonzero = m;
  if (m == 0) return result;  // p = 1, not significant

  const SignedRanks sr = rank_nonzero(d);
  double w_plus = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    if (sr.positive[k]) w_plus += sr.ranks[k];
  }
  const double md = static_cast<double>(m);
  const double total = md * (md + 1.0) / 2.0;
  const double w_minus = total - w_plus;
  result.statistic =
      options.alternative == Alternative::two_sided ? std::min(w_plus, w_minus) : w_plus;

  double p = 1.0;
  if (m <= options.exact_limit) {
    result.exact = true;
    const auto [le, ge] = exact_tails(sr.ranks, w_plus);
    switch (options.alternative) {
      case Alternative::two_sided: p = 2.0 * std::min(le, ge); break;
      case Alternative::greater: p = ge; break;
      case Alternative::less: p = le; break;
    }
  } else {
    result.exact = false;
    const double variance = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0 - sr.tie_term / 48.0;
    const double sigma = std::sqrt(std::max(variance, 0.0));
    const double centered = w_plus - total / 2.0;
    if (sigma > 0.0) {
      switch (options.alternative) {
        case Alternative::two_sided: {
          const double correction = centered > 0 ? 0.5 : (centered < 0 ? -0.5 : 0.0);
          const double z = (centered - correction) / sigma;
          p = 2.0 * std::min(normal_cdf(z), 1.0 - normal_cdf(z));
          break;
        }
        case Alternative::greater: p = 1.0 - normal_cdf((centered - 0.5) / sigma); break;
        case Alternative::less: p = normal_cdf((centered + 0.5) / sigma); break;
      }
    }
  }
  result.p_value = std::clamp(p, 0.0, 1.0);
  result.significant = result.p_value < options.alpha;
  return result;
}

TestResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                const WilcoxonOptions& options) {
  if (a.size() != b.size()) {
    throw DomainError("wilcoxon_signed_rank: paired samples differ in length (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw DomainError("wilcoxon_signed_rank: empty sample");
  std::vector<double> d(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) d[k] = a[k] - b[k];
  return wilcoxon_signed_rank(std::span<const double>(d), options);
}

}  // namespace sariwatch
