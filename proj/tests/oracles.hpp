#pragma once

// Test-side oracles, deliberately independent of the library implementations
// they check.

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

namespace oracle {

// Standard normal CDF via the double-factorial series
// Phi(x) = 1/2 + phi(x) * sum_k x^(2k+1) / (1*3*...*(2k+1)).
inline double norm_cdf(double x) {
  double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  double term = x;
  double sum = x;
  double x2 = x * x;
  for (int k = 1; k < 600; ++k) {
    term *= x2 / (2.0 * k + 1.0);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return 0.5 + density * sum;
}

// Bisection inverse of the series CDF, accurate to ~1e-12.
inline double inv_norm_cdf_bisect(double p) {
  double lo = -12.0, hi = 12.0;
  for (int i = 0; i < 80; ++i) {
    double mid = 0.5 * (lo + hi);
    if (norm_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Number of k-bit outcomes with popcount <= n, by exhaustive enumeration.
// Usable for k <= ~20.
inline uint64_t binom_tail_count(int n, int k) {
  uint64_t count = 0;
  for (uint64_t mask = 0; mask < (1ULL << k); ++mask)
    if (__builtin_popcountll(mask) <= n) ++count;
  return count;
}

// Keyword-count classifier: add-one-smoothed token/class counts from the
// training split, argmax of log-likelihood sums at test time.
class BayesCounter {
 public:
  void fit(const std::vector<std::vector<int32_t>>& token_seqs,
           const std::vector<int>& labels, int n_classes, int32_t vocab_size) {
    n_classes_ = n_classes;
    vocab_size_ = vocab_size;
    counts_.assign(static_cast<size_t>(n_classes), std::map<int32_t, long>{});
    totals_.assign(static_cast<size_t>(n_classes), 0);
    for (size_t i = 0; i < token_seqs.size(); ++i) {
      for (int32_t tok : token_seqs[i]) {
        counts_[static_cast<size_t>(labels[i])][tok] += 1;
        totals_[static_cast<size_t>(labels[i])] += 1;
      }
    }
  }

  int predict(const std::vector<int32_t>& tokens) const {
    int best = 0;
    double best_score = -1e300;
    for (int c = 0; c < n_classes_; ++c) {
      double score = 0.0;
      for (int32_t tok : tokens) {
        auto it = counts_[static_cast<size_t>(c)].find(tok);
        long count = it == counts_[static_cast<size_t>(c)].end() ? 0 : it->second;
        score += std::log((count + 1.0) /
                          (totals_[static_cast<size_t>(c)] + static_cast<double>(vocab_size_)));
      }
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return best;
  }

 private:
  int n_classes_ = 0;
  int32_t vocab_size_ = 0;
  std::vector<std::map<int32_t, long>> counts_;
  std::vector<long> totals_;
};

}  // namespace oracle
