#pragma once

namespace rsmi {

// Consensus gate for the first voting stage: `votes` stochastic predictions
// are taken and the top class's count is tested against a Binomial(votes, 1/2)
// null. The vote is accepted only when the exact lower-tail CDF exceeds
// alpha, i.e. a one-tailed test with strict-exceedance p-value P(X > n).
struct VoteGate {
  int votes = 5;
  double alpha = 0.98;
};

enum class VoteDecision { kAccept, kEscalate };

// Exact lower-tail CDF of Binomial(votes, 1/2) at agree_count, evaluated in
// integer arithmetic. Requires 1 <= votes <= 64 and 0 <= agree_count <= votes.
double binom_lower_cdf(int agree_count, int votes);

// Accept iff CDF(agree_count; gate.votes, 1/2) > gate.alpha. The comparison
// is carried out exactly (integer/dyadic arithmetic), so boundary cases where
// the CDF equals alpha never depend on rounding.
VoteDecision binom_consensus(int agree_count, const VoteGate& gate);

}  // namespace rsmi
