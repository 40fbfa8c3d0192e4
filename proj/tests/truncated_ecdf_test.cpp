#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "sbcp/feedback.hpp"
#include "sbcp/truncated_ecdf.hpp"

namespace sbcp {
namespace {

std::vector<double> v(std::span<const double> s) { return {s.begin(), s.end()}; }

TEST(TruncatedEcdf, InsertKeepsSortedOrder) {
  TruncatedEcdf e(100);
  e.insert(0.5);
  EXPECT_EQ(e.count(), 1u);
  EXPECT_EQ(v(e.samples()), std::vector<double>({0.5}));

  TruncatedEcdf f(100);
  f.insert(0.2);
  f.insert(0.7);
  f.insert(0.5);
  EXPECT_EQ(v(f.samples()), std::vector<double>({0.2, 0.5, 0.7}));
}

TEST(TruncatedEcdf, MissesAreRecordedAtTheThreshold) {
  // Raw scores {1, 2, 3}; the score 1 arrives while tau = 2 and is recorded as 2.
  TruncatedEcdf e(100);
  const Threshold tau = Threshold::finite(2.0);
  for (double s : {1.0, 2.0, 3.0}) e.insert(apply_feedback(tau, s).recorded.value());
  EXPECT_EQ(v(e.samples()), std::vector<double>({2.0, 2.0, 3.0}));

  EXPECT_DOUBLE_EQ(e.eval_g(1.9), 0.0);
  EXPECT_DOUBLE_EQ(e.eval_g(2.0), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(e.eval_g(3.5), 1.0);
  EXPECT_DOUBLE_EQ(e.eval_g(Threshold::neg_inf()), 0.0);
  EXPECT_DOUBLE_EQ(e.eval_g(Threshold::pos_inf()), 1.0);
}

TEST(TruncatedEcdf, RejectsNonFiniteValues) {
  TruncatedEcdf e(10);
  EXPECT_THROW(e.insert(std::numeric_limits<double>::infinity()), DomainError);
  EXPECT_THROW(e.insert(std::nan("")), DomainError);
  EXPECT_EQ(e.count(), 0u);
}

TEST(TruncatedEcdf, QueriesOnEmptyAreErrors) {
  TruncatedEcdf e(10);
  EXPECT_THROW(e.eval_g(0.0), QueryError);
  EXPECT_THROW(e.eval_upper(0.0), QueryError);
  EXPECT_THROW(e.conformal_cutoff(0.9), QueryError);
  EXPECT_THROW(e.epsilon(), QueryError);
}

TEST(TruncatedEcdf, HorizonIsRequired) {
  EXPECT_THROW(TruncatedEcdf(0), ConfigError);
  EXPECT_THROW(TruncatedEcdf(10, 0.0), DomainError);
  EXPECT_THROW(TruncatedEcdf(10, 1.0), DomainError);
}

// Reference values computed with 30-digit arithmetic.
TEST(BandParams, EpsilonMatchesDkwFormula) {
  const auto band = BandParams::for_horizon(10000);
  EXPECT_DOUBLE_EQ(band.delta(), 2e-8);
  EXPECT_NEAR(band.epsilon(1000), 0.0959705182437616, 1e-15);
  EXPECT_NEAR(band.epsilon(1), 3.03485425877029270, 1e-14);
  EXPECT_NEAR(band.epsilon(100), 0.303485425877029270, 1e-15);
  EXPECT_NEAR(dkw_epsilon(10, 0.05), 0.429469408346737562, 1e-15);
  for (std::size_t t = 1; t < 500; ++t) EXPECT_GT(band.epsilon(t), band.epsilon(t + 1));
  EXPECT_THROW(band.epsilon(0), QueryError);
}

TEST(TruncatedEcdf, UpperIsGPlusEpsilonEverywhere) {
  TruncatedEcdf e(10000);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) e.insert(u(rng));
  for (double tau = -0.1; tau < 1.1; tau += 0.013) {
    EXPECT_EQ(e.eval_upper(tau), e.eval_g(tau) + e.epsilon());
  }
  TruncatedEcdf one(10000);
  one.insert(0.3);
  EXPECT_GT(one.eval_upper(1.0), 1.0);  // band may exceed 1
}

TEST(ConformalCutoff, HundredSamplesInjectedEpsilon) {
  TruncatedEcdf e(10000);
  for (int j = 1; j <= 100; ++j) e.insert(j / 100.0);
  const auto cut = e.conformal_cutoff(0.9, 0.0833);
  ASSERT_TRUE(cut.is_finite());
  EXPECT_DOUBLE_EQ(cut.value(), 0.02);
  std::vector<double> s(e.samples().begin(), e.samples().end());
  EXPECT_EQ(cut, testing::brute_force_cutoff(s, 0.9, 0.0833));
}

TEST(ConformalCutoff, TenSamplesInjectedEpsilon) {
  TruncatedEcdf e(10000);
  for (int j = 1; j <= 10; ++j) e.insert(j / 10.0);
  const auto cut = e.conformal_cutoff(0.9, 0.05);
  ASSERT_TRUE(cut.is_finite());
  EXPECT_DOUBLE_EQ(cut.value(), 0.1);
  std::vector<double> s(e.samples().begin(), e.samples().end());
  EXPECT_EQ(cut, testing::brute_force_cutoff(s, 0.9, 0.05));
}

TEST(ConformalCutoff, SingleSampleHasNoFiniteCutoff) {
  TruncatedEcdf e(10000);
  e.insert(0.4);
  EXPECT_TRUE(e.conformal_cutoff(0.9).is_neg_inf());
}

TEST(ConformalCutoff, BudgetExactlyHitIsAdmitted) {
  // 1 - 0.9 is a few ulps below 0.1; one sample in ten still fits the budget.
  TruncatedEcdf e(100);
  for (int j = 1; j <= 10; ++j) e.insert(j / 10.0);
  EXPECT_DOUBLE_EQ(e.conformal_cutoff(0.9, 0.0).value(), 0.2);
}

TEST(ConformalCutoff, RejectsBadArguments) {
  TruncatedEcdf e(100);
  e.insert(1.0);
  EXPECT_THROW(e.conformal_cutoff(0.0, 0.0), DomainError);
  EXPECT_THROW(e.conformal_cutoff(1.0, 0.0), DomainError);
  EXPECT_THROW(e.conformal_cutoff(0.9, -0.1), DomainError);
  EXPECT_THROW(e.level_cutoff(1.5), DomainError);
}

TEST(ConformalCutoff, MatchesBruteForceOnRandomInstances) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> size(1, 50);
  std::uniform_int_distribution<int> grid(0, 20);  // coarse grid forces ties
  std::uniform_real_distribution<double> alpha(0.5, 0.99), eps(0.0, 0.4), u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    TruncatedEcdf e(1000);
    std::vector<double> s;
    const int t = size(rng);
    const bool ties = trial % 2 == 0;
    for (int i = 0; i < t; ++i) {
      const double x = ties ? grid(rng) / 20.0 : u(rng);
      e.insert(x);
      s.push_back(x);
    }
    const double a = alpha(rng), ep = eps(rng);
    ASSERT_EQ(e.conformal_cutoff(a, ep), testing::brute_force_cutoff(s, a, ep)) << "trial " << trial;
    const double level = u(rng);
    ASSERT_EQ(e.level_cutoff(level), testing::brute_force_level(s, level)) << "trial " << trial;
  }
}

TEST(ConformalCutoff, ZeroEpsilonIsTheEmpiricalQuantile) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    TruncatedEcdf e(1000);
    std::vector<double> s;
    for (int i = 0; i < 1 + trial % 40; ++i) {
      s.push_back(u(rng));
      e.insert(s.back());
    }
    std::sort(s.begin(), s.end());
    // Smallest sample whose count exceeds the budget.
    const double alpha = 0.8;
    Threshold expected = Threshold::pos_inf();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (testing::count_cdf(s, s[i]) > (1.0 - alpha) + kBudgetSlack) {
        expected = Threshold::finite(s[i]);
        break;
      }
    }
    EXPECT_EQ(e.conformal_cutoff(alpha, 0.0), expected);
  }
}

TEST(ConformalCutoff, MonotoneInEpsilonAndAlpha) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TruncatedEcdf e(1000);
  for (int i = 0; i < 300; ++i) e.insert(u(rng));
  for (double a = 0.55; a < 0.99; a += 0.01) {
    Threshold prev = Threshold::pos_inf();
    for (double ep = 0.0; ep < 0.5; ep += 0.005) {
      const auto c = e.conformal_cutoff(a, ep);
      EXPECT_LE(c, prev);
      prev = c;
    }
  }
  for (double ep = 0.0; ep < 0.3; ep += 0.01) {
    Threshold prev = Threshold::neg_inf();
    for (double a = 0.98; a > 0.5; a -= 0.01) {  // decreasing alpha
      const auto c = e.conformal_cutoff(a, ep);
      EXPECT_GE(c, prev);
      prev = c;
    }
  }
}

TEST(TruncatedEcdf, StepHeightsAreMultiplesOfOneOverT) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> grid(0, 9);
  TruncatedEcdf e(100);
  for (int i = 0; i < 37; ++i) e.insert(grid(rng));
  for (double tau = -1; tau < 11; tau += 0.25) {
    const double k = e.eval_g(tau) * 37.0;
    EXPECT_NEAR(k, std::round(k), 1e-9);
  }
}

// Recording-time truncation against the literal query-time max{tau_t, s_j}:
// along a nondecreasing threshold path the resulting next thresholds agree, and
// the raw cutoffs agree whenever they land at or above the current threshold.
TEST(TruncatedEcdf, RetruncationEquivalenceOnMonotoneTraces) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = 0.6 + 0.3 * u(rng);
    const double eps_scale = 0.3 * u(rng);
    TruncatedEcdf e(1000);
    std::vector<double> recorded;
    Threshold tau = Threshold::neg_inf();
    for (int t = 1; t <= 60; ++t) {
      const auto fb = apply_feedback(tau, u(rng));
      e.insert(fb.recorded.value());
      recorded.push_back(fb.recorded.value());
      const double eps = eps_scale / std::sqrt(static_cast<double>(t));
      const auto fast = e.conformal_cutoff(alpha, eps);
      const auto slow = testing::retruncated_cutoff(recorded, tau, alpha, eps);
      ASSERT_EQ(max(fast, tau), max(slow, tau)) << "trial " << trial << " t " << t;
      if (fast >= tau) {
        ASSERT_EQ(fast, slow);
      }
      tau = max(fast, tau);
    }
  }
}

TEST(TruncatedEcdf, DumpCsv) {
  TruncatedEcdf e(10000);
  e.insert(0.25);
  e.insert(-1.5);
  std::ostringstream os;
  e.dump_csv(os);
  EXPECT_EQ(os.str(), "# t=2,delta=2e-08,epsilon=2.14596602629\nvalue\n-1.5\n0.25\n");
}

}  // namespace
}  // namespace sbcp
