#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "oracles.hpp"
#include "rsmi/certify.hpp"
#include "rsmi/normal.hpp"
#include "rsmi/rng.hpp"
#include "rsmi/vote.hpp"

using namespace rsmi;

TEST_CASE("gaussian_vector: zero sigma yields exact zeros") {
  RngStream rng(3, 0);
  auto v = gaussian_vector(rng, 4, 0.0);
  REQUIRE(v.size() == 4);
  for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("gaussian_vector: identical stream replays identically") {
  RngStream a(7, 1);
  RngStream b(7, 1);
  auto va = gaussian_vector(a, 64, 1.3);
  auto vb = gaussian_vector(b, 64, 1.3);
  CHECK(va == vb);
}

TEST_CASE("gaussian_vector: distinct streams decorrelate") {
  RngStream a(7, 1);
  RngStream b(7, 2);
  auto va = gaussian_vector(a, 10000, 1.0);
  auto vb = gaussian_vector(b, 10000, 1.0);
  CHECK(va != vb);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  CHECK(std::abs(dot / std::sqrt(na * nb)) < 0.05);
}

TEST_CASE("gaussian_vector: sample moments match") {
  RngStream rng(7, 0);
  auto v = gaussian_vector(rng, 100000, 2.0);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  double stddev = std::sqrt(var / static_cast<double>(v.size() - 1));
  CHECK(std::abs(mean) <= 0.05 * 2.0);
  CHECK(stddev >= 1.98);
  CHECK(stddev <= 2.02);
}

TEST_CASE("inv_norm_cdf: anchor values and symmetry") {
  CHECK(inv_norm_cdf(0.5) == 0.0);
  CHECK(std::abs(inv_norm_cdf(0.9) - 1.2815516) <= 1e-7);
  CHECK(std::abs(inv_norm_cdf(0.1) + inv_norm_cdf(0.9)) <= 1e-12);
  CHECK_THROWS_AS(inv_norm_cdf(0.0), std::domain_error);
  CHECK_THROWS_AS(inv_norm_cdf(1.0), std::domain_error);
  CHECK_THROWS_AS(inv_norm_cdf(-0.25), std::domain_error);
  CHECK_THROWS_AS(inv_norm_cdf(1.25), std::domain_error);
}

TEST_CASE("inv_norm_cdf: strictly increasing and within 1e-7 of the bisection oracle") {
  double prev = -1e300;
  for (int i = 1; i <= 999; ++i) {
    double p = i / 1000.0;
    double x = inv_norm_cdf(p);
    CHECK(x > prev);
    prev = x;
    CHECK(std::abs(oracle::norm_cdf(x) - p) <= 1e-7);
    CHECK(std::abs(x - oracle::inv_norm_cdf_bisect(p)) <= 1e-7);
  }
}

TEST_CASE("binom_lower_cdf: exact small cases") {
  CHECK(binom_lower_cdf(5, 5) == 1.0);
  CHECK(binom_lower_cdf(4, 5) == 31.0 / 32.0);
  CHECK(binom_lower_cdf(3, 5) == 26.0 / 32.0);
  CHECK_THROWS_AS(binom_lower_cdf(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(binom_lower_cdf(0, 65), std::invalid_argument);
  CHECK_THROWS_AS(binom_lower_cdf(-1, 5), std::invalid_argument);
  CHECK_THROWS_AS(binom_lower_cdf(6, 5), std::invalid_argument);
}

TEST_CASE("binom_consensus: gate examples") {
  VoteGate gate{5, 0.98};
  CHECK(binom_consensus(5, gate) == VoteDecision::kAccept);
  CHECK(binom_consensus(4, gate) == VoteDecision::kEscalate);
  CHECK(binom_consensus(3, VoteGate{5, 0.5}) == VoteDecision::kAccept);
  CHECK_THROWS_AS(binom_consensus(3, VoteGate{5, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(binom_consensus(3, VoteGate{5, 1.0}), std::invalid_argument);
}

TEST_CASE("binom_consensus: agrees with exhaustive enumeration up to k0 = 16") {
  for (int k = 1; k <= 16; ++k) {
    for (int n = 0; n <= k; ++n) {
      uint64_t count = oracle::binom_tail_count(n, k);
      double cdf = static_cast<double>(count) / std::ldexp(1.0, k);  // exact
      CHECK(binom_lower_cdf(n, k) == cdf);
      for (double alpha :
           {0.25, 0.5, 0.9, 0.98, 0.9999, cdf - 1e-12, cdf, cdf + 1e-12}) {
        if (!(alpha > 0.0 && alpha < 1.0)) continue;
        bool oracle_accept = cdf > alpha;
        bool accept = binom_consensus(n, VoteGate{k, alpha}) == VoteDecision::kAccept;
        CHECK(accept == oracle_accept);
      }
    }
  }
}

TEST_CASE("certified_radius: anchors") {
  RadiusInput in;
  in.sigma_embed = 1.0;
  in.p_top = 0.4;
  in.p_runner = 0.4;
  CHECK(certified_radius(in) == 0.0);

  in.sigma_embed = 0.5;
  in.p_top = 0.9;
  in.p_runner = 0.1;
  CHECK(std::abs(certified_radius(in) - 2.5631032) <= 1e-6);

  in.sigma_layers = {1.0};
  CHECK(std::abs(certified_radius(in) - 5.1262064) <= 1e-6);
}

TEST_CASE("certified_radius: Theorem product structure") {
  RadiusInput in;
  in.sigma_embed = 0.5;
  in.p_top = 0.85;
  in.p_runner = 0.05;
  double base = certified_radius(in);
  for (double sigma : {0.25, 0.5, 1.0, 2.0}) {
    RadiusInput ext = in;
    ext.sigma_layers.push_back(sigma);
    double grown = certified_radius(ext);
    CHECK(std::abs(grown / base - (1.0 + sigma * sigma)) <= 1e-12 * (1.0 + sigma * sigma));
  }
}

TEST_CASE("certified_radius: monotone in the class probabilities") {
  double prev = -1.0;
  for (int i = 1; i <= 20; ++i) {
    RadiusInput in;
    in.sigma_embed = 0.5;
    in.p_top = 0.5 + 0.02 * i;
    in.p_runner = 0.05;
    double r = certified_radius(in);
    CHECK(r > prev);
    prev = r;
  }
  prev = 1e300;
  for (int i = 1; i <= 20; ++i) {
    RadiusInput in;
    in.sigma_embed = 0.5;
    in.p_top = 0.95;
    in.p_runner = 0.002 * i;
    double r = certified_radius(in);
    CHECK(r < prev);
    prev = r;
  }
}

TEST_CASE("certified_radius: clamping and rejection") {
  RadiusInput in;
  in.sigma_embed = 0.5;
  in.p_top = 1.0;
  in.p_runner = 0.0;
  RadiusBreakdown detail = certified_radius_detail(in);
  CHECK(detail.clamped);
  CHECK(std::isfinite(detail.radius));
  CHECK(detail.radius > 0.0);

  in.p_top = 1.5;
  CHECK_THROWS_AS(certified_radius(in), std::invalid_argument);
  in.p_top = 0.4;
  in.p_runner = 0.6;
  CHECK_THROWS_AS(certified_radius(in), std::invalid_argument);
  in.p_top = 0.7;
  in.p_runner = 0.6;
  CHECK_THROWS_AS(certified_radius(in), std::invalid_argument);
  in.p_top = 0.9;
  in.p_runner = 0.05;
  in.sigma_embed = 0.0;
  CHECK_THROWS_AS(certified_radius(in), std::invalid_argument);
}

TEST_CASE("lipschitz_scan: constants and argument checks") {
  CHECK(lipschitz_scan([](double) { return 3.5; }, -1.0, 1.0, 100) == 0.0);
  CHECK_THROWS_AS(lipschitz_scan([](double x) { return x; }, 1.0, 1.0, 10),
                  std::invalid_argument);
  CHECK_THROWS_AS(lipschitz_scan([](double x) { return x; }, 0.0, 1.0, 1),
                  std::invalid_argument);
}

TEST_CASE("lipschitz_scan: smoothed step stays under the Gaussian-convolution bound") {
  // The smoothed unit step is x -> Phi(x / sigma); its steepest slope is
  // 1 / (sigma sqrt(2 pi)) and the convolution lemma bounds it by
  // sqrt(2 / (pi sigma^2)).
  for (double sigma : {0.25, 0.5, 1.0, 2.0}) {
    double measured = lipschitz_scan([sigma](double x) { return norm_cdf(x / sigma); },
                                     -6.0, 6.0, 100000);
    double closed_form = 1.0 / (sigma * std::sqrt(2.0 * M_PI));
    double bound = std::sqrt(2.0 / (M_PI * sigma * sigma));
    CHECK(measured <= bound + 1e-3);
    CHECK(std::abs(measured - closed_form) <= 0.02 * closed_form);
  }
  double m1 = lipschitz_scan([](double x) { return norm_cdf(x / 1.0); }, -6.0, 6.0, 100000);
  CHECK(std::abs(m1 - 0.39894) <= 0.02 * 0.39894);
  double m05 = lipschitz_scan([](double x) { return norm_cdf(x / 0.5); }, -6.0, 6.0, 100000);
  CHECK(std::abs(m05 - 0.79788) <= 0.02 * 0.79788);
}

TEST_CASE("lipschitz_scan: composite of smoothed steps respects the product bound") {
  for (double s1 : {0.5, 1.0}) {
    for (double s2 : {0.5, 2.0}) {
      auto g1 = [s1](double y) { return norm_cdf(y / s1); };
      auto g2 = [s2](double x) { return norm_cdf(x / s2); };
      double l1 = lipschitz_scan(g1, -6.0, 6.0, 50000);
      double l2 = lipschitz_scan(g2, -6.0, 6.0, 50000);
      double composite =
          lipschitz_scan([&](double x) { return g1(g2(x)); }, -6.0, 6.0, 50000);
      CHECK(composite <= l1 * l2 + 1e-3);
    }
  }
}

TEST_CASE("lipschitz_scan: inverse-CDF of the smoothed step measures 1/sigma") {
  for (double sigma : {0.5, 1.0, 2.0}) {
    double measured = lipschitz_scan(
        [sigma](double x) { return inv_norm_cdf(norm_cdf(x / sigma)); }, -3.0 * sigma,
        3.0 * sigma, 20000);
    CHECK(measured <= 1.0 / sigma + 1e-3);
    CHECK(measured >= (1.0 / sigma) * (1.0 - 1e-3));
  }
}
