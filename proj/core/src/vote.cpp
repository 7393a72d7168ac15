#include "rsmi/vote.hpp"

#include <cmath>
#include <stdexcept>

namespace rsmi {

namespace {

using u128 = unsigned __int128;

void check_args(int agree_count, int votes) {
  if (votes < 1 || votes > 64)
    throw std::invalid_argument("binomial gate: votes must be in [1, 64]");
  if (agree_count < 0 || agree_count > votes)
    throw std::invalid_argument("binomial gate: agree_count out of [0, votes]");
}

// sum_{i=0..agree_count} C(votes, i), exact; fits 2^64 <= u128 for votes <= 64.
u128 lower_tail_numerator(int agree_count, int votes) {
  u128 sum = 0;
  u128 coeff = 1;  // C(votes, 0)
  for (int i = 0; i <= agree_count; ++i) {
    sum += coeff;
    coeff = coeff * static_cast<u128>(votes - i) / static_cast<u128>(i + 1);
  }
  return sum;
}

}  // namespace

double binom_lower_cdf(int agree_count, int votes) {
  check_args(agree_count, votes);
  long double num = static_cast<long double>(lower_tail_numerator(agree_count, votes));
  return static_cast<double>(std::ldexp(num, -votes));
}

VoteDecision binom_consensus(int agree_count, const VoteGate& gate) {
  check_args(agree_count, gate.votes);
  if (!(gate.alpha > 0.0 && gate.alpha < 1.0))
    throw std::invalid_argument("binomial gate: alpha must lie in (0, 1)");

  if (agree_count == gate.votes) return VoteDecision::kAccept;  // CDF = 1 > alpha

  // Exact comparison num / 2^votes > alpha with alpha decomposed into its
  // dyadic representation m * 2^(e-53), m integral.
  u128 num = lower_tail_numerator(agree_count, gate.votes);
  int e = 0;
  double f = std::frexp(gate.alpha, &e);  // alpha = f * 2^e, f in [0.5, 1)
  u128 m = static_cast<u128>(static_cast<uint64_t>(std::ldexp(f, 53)));
  // Condition num / 2^votes > m * 2^(e-53)  <=>  num > m * 2^(e - 53 + votes)
  int t = e - 53 + gate.votes;
  if (t >= 0) {
    // t <= votes - 53 <= 11, so m << t stays within u128.
    return num > (m << t) ? VoteDecision::kAccept : VoteDecision::kEscalate;
  }
  int shift = -t;
  if (shift > 64) return VoteDecision::kAccept;  // num >= 1, so num << shift > 2^53 >= m
  return (num << shift) > m ? VoteDecision::kAccept : VoteDecision::kEscalate;
}

}  // namespace rsmi
