// Copyright 2026 The dpate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpate/accounting.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "dpate/rng.hpp"
#include "oracles.hpp"

namespace {

using dpate::Rng;
using dpate::calibration_error;
using dpate::config_error;
using namespace dpate::accounting;

double logsumexp_of(const LogPmf& pmf) {
  return detail::log_sum_exp(pmf.values());
}

TEST(LogPmfTest, BinomialExamples) {
  const LogPmf fair = LogPmf::binomial(1, 0.5);
  EXPECT_NEAR(fair[0], std::log(0.5), 1e-12);
  EXPECT_NEAR(fair[1], std::log(0.5), 1e-12);

  const LogPmf skewed = LogPmf::binomial(2, 0.25);
  EXPECT_NEAR(skewed[0], std::log(9.0 / 16.0), 1e-12);
  EXPECT_NEAR(skewed[1], std::log(6.0 / 16.0), 1e-12);
  EXPECT_NEAR(skewed[2], std::log(1.0 / 16.0), 1e-12);
}

TEST(LogPmfTest, LargeSupportStaysNormalized) {
  const LogPmf big = LogPmf::binomial(10000, 0.25);
  EXPECT_NEAR(logsumexp_of(big), 0.0, 1e-9);
}

TEST(LogPmfTest, RejectsDegenerateProbability) {
  EXPECT_THROW(LogPmf::binomial(4, 0.0), config_error);
  EXPECT_THROW(LogPmf::binomial(4, 1.0), config_error);
}

TEST(ConvolveTest, PointMassIsIdentity) {
  const LogPmf base = LogPmf::binomial(5, 0.3);
  const LogPmf out = log_convolve(base, LogPmf::point_mass_at_zero());
  ASSERT_EQ(out.size(), base.size());
  for (std::size_t k = 0; k < base.size(); ++k) {
    EXPECT_NEAR(out[k], base[k], 1e-12);
  }
}

TEST(ConvolveTest, BinomialAdditivity) {
  const LogPmf sum =
      log_convolve(LogPmf::binomial(1, 0.3), LogPmf::binomial(1, 0.3));
  const LogPmf direct = LogPmf::binomial(2, 0.3);
  ASSERT_EQ(sum.size(), direct.size());
  for (std::size_t k = 0; k < sum.size(); ++k) {
    EXPECT_NEAR(std::exp(sum[k]), std::exp(direct[k]), 1e-12);
  }
}

TEST(ConvolveTest, MatchesBruteForceGrid) {
  const LogPmf a = LogPmf::binomial(3, 0.3);
  const LogPmf b = LogPmf::binomial(5, 0.7);
  const LogPmf out = log_convolve(a, b);
  const std::vector<double> expected = oracle::convolve(
      oracle::binomial_pmf(3, 0.3), oracle::binomial_pmf(5, 0.7));
  ASSERT_EQ(out.size(), expected.size());
  for (std::size_t k = 0; k < expected.size(); ++k) {
    EXPECT_NEAR(std::exp(out[k]), expected[k], 1e-12 * expected[k] + 1e-300);
  }
  EXPECT_NEAR(logsumexp_of(out), 0.0, 1e-9);
}

TEST(RenyiTest, IdenticalDistributionsGiveZero) {
  const LogPmf p = LogPmf::binomial(6, 0.4);
  EXPECT_NEAR(renyi_divergence(p, p, 2.0), 0.0, 1e-12);
}

TEST(RenyiTest, TwoPointClosedForm) {
  const LogPmf p = LogPmf::binomial(1, 0.5);
  const LogPmf q = LogPmf::binomial(1, 0.6);
  // At alpha = 2: log(0.25/0.4 + 0.25/0.6).
  const double expected = std::log(0.25 / 0.4 + 0.25 / 0.6);
  EXPECT_NEAR(renyi_divergence(p, q, 2.0), expected, 1e-12);
  EXPECT_NEAR(expected, 0.040821994520255166, 1e-12);
}

TEST(RenyiTest, NondecreasingInAlpha) {
  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const int support = 2 + static_cast<int>(rng.below(6));
    std::vector<double> p(support), q(support);
    double sp = 0.0, sq = 0.0;
    for (int k = 0; k < support; ++k) {
      p[k] = 0.05 + rng.next_double();
      q[k] = 0.05 + rng.next_double();
      sp += p[k];
      sq += q[k];
    }
    for (int k = 0; k < support; ++k) {
      p[k] = std::log(p[k] / sp);
      q[k] = std::log(q[k] / sq);
    }
    const LogPmf pp(std::move(p));
    const LogPmf qq(std::move(q));
    double previous = 0.0;
    for (double alpha : {1.25, 1.5, 2.0, 4.0, 8.0, 32.0}) {
      const double value = renyi_divergence(pp, qq, alpha);
      EXPECT_GE(value, previous - 1e-12);
      previous = value;
    }
  }
}

TEST(RenyiTest, InfiniteWhenSupportEscapes) {
  const LogPmf p = LogPmf::binomial(2, 0.5);
  const LogPmf narrow(std::vector<double>{0.0});
  EXPECT_EQ(renyi_divergence(p, narrow, 2.0),
            std::numeric_limits<double>::infinity());
}

TEST(PbmRdpExactTest, MatchesBruteForceEnumeration) {
  const double value = pbm_rdp_exact(2, 1, 0.25, 2.0);
  const double expected = oracle::pbm_exact_renyi(2, 1, 0.25, 2.0);
  EXPECT_NEAR(value, expected, 1e-12 * std::abs(expected));
}

TEST(PbmRdpExactTest, VanishesAsThetaGoesToZero) {
  EXPECT_LT(pbm_rdp_exact(4, 2, 1e-6, 2.0), 1e-9);
}

TEST(PbmRdpExactTest, IncreasesWithTrials) {
  double previous = 0.0;
  for (int m : {1, 2, 4, 8}) {
    const double value = pbm_rdp_exact(3, m, 0.1, 2.0);
    EXPECT_GT(value, previous);
    previous = value;
  }
}

TEST(PbmRdpExactTest, RefusesOversizedSupport) {
  EXPECT_THROW(pbm_rdp_exact(1000000, 64, 0.1, 2.0), config_error);
}

TEST(PbmRdpApproxTest, EqualsExactAtSingleTrial) {
  for (const auto& [n, theta, alpha] :
       {std::tuple{5ULL, 0.25, 2.0}, std::tuple{10ULL, 0.1, 3.0}}) {
    const double approx = pbm_rdp_approx(n, 1, theta, alpha);
    const double exact = pbm_rdp_exact(n, 1, theta, alpha);
    EXPECT_NEAR(approx, exact, 1e-12 * std::max(1.0, exact));
  }
}

TEST(PbmRdpApproxTest, DominatesExactEverywhere) {
  for (std::uint64_t n : {2ULL, 3ULL, 5ULL, 10ULL}) {
    for (int m : {1, 2, 4}) {
      for (double theta : {0.05, 0.15, 0.25}) {
        for (double alpha : {1.5, 2.0, 4.0}) {
          const double approx = pbm_rdp_approx(n, m, theta, alpha);
          const double exact = pbm_rdp_exact(n, m, theta, alpha);
          EXPECT_GE(approx, exact - 1e-12)
              << "n=" << n << " m=" << m << " theta=" << theta
              << " alpha=" << alpha;
        }
      }
    }
  }
}

TEST(PbmRdpApproxTest, NonincreasingInGroupSize) {
  double previous = std::numeric_limits<double>::infinity();
  for (std::uint64_t n : {10ULL, 20ULL, 40ULL, 80ULL}) {
    const double value = pbm_rdp_approx(n, 16, 0.1, 2.0);
    EXPECT_LE(value, previous + 1e-12);
    previous = value;
  }
}

// The k-sweep of the replication-level bound stays within a few percent of
// the default (k = 0 analog) evaluation on these configurations.
TEST(PbmRdpApproxTest, SweepStaysNearDefault) {
  for (const auto& [n, m, theta, alpha] :
       {std::tuple{100ULL, 16, 0.25, 2.0}, std::tuple{50ULL, 8, 0.1, 2.0},
        std::tuple{20ULL, 4, 0.05, 1.5}}) {
    const double fallback = pbm_rdp_approx(n, m, theta, alpha);
    const double swept = pbm_rdp_approx_sweep(n, m, theta, alpha, 32);
    EXPECT_GT(swept, 0.0);
    EXPECT_LE(swept, fallback * 1.0 + 1e-12);
    EXPECT_GE(swept, fallback * 0.95);
  }
}

// The worst-case-pair objective is symmetric under reflecting both indices
// about m*n (flip every success probability).
TEST(PbmRdpTest, WorstCasePairReflectionSymmetry) {
  const std::uint64_t n = 3;
  const int m = 2;
  const double theta = 0.2;
  const double alpha = 2.0;
  const std::uint64_t total = n * m;
  auto mixture = [&](std::uint64_t t) {
    if (t == 0) return LogPmf::binomial(total, 0.5 + theta);
    if (t == total) return LogPmf::binomial(total, 0.5 - theta);
    return log_convolve(LogPmf::binomial(t, 0.5 - theta),
                        LogPmf::binomial(total - t, 0.5 + theta));
  };
  for (std::uint64_t t1 : {0ULL, 1ULL, 2ULL}) {
    const std::uint64_t t2 = t1 + m;
    const double direct = renyi_divergence(mixture(t1), mixture(t2), alpha);
    const double reflected =
        renyi_divergence(mixture(total - t1), mixture(total - t2), alpha);
    EXPECT_NEAR(direct, reflected, 1e-10 * std::max(1.0, direct));
  }
}

TEST(ComposeTest, Examples) {
  const std::vector<double> alphas = {2.0, 4.0, 8.0};
  RdpCurve c1{alphas, {0.1, 0.2, 0.4}};
  RdpCurve c2{alphas, {0.3, 0.5, 0.7}};

  const RdpCurve identity = compose(std::vector<RdpCurve>{c1});
  EXPECT_EQ(identity.epsilons, c1.epsilons);

  const RdpCurve doubled = compose(std::vector<RdpCurve>{c1, c1});
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    EXPECT_DOUBLE_EQ(doubled.epsilons[i], 2.0 * c1.epsilons[i]);
  }

  const RdpCurve ab = compose(std::vector<RdpCurve>{c1, c2});
  const RdpCurve ba = compose(std::vector<RdpCurve>{c2, c1});
  EXPECT_EQ(ab.epsilons, ba.epsilons);

  RdpCurve mismatched{{2.0, 4.0}, {0.1, 0.2}};
  EXPECT_THROW(compose(std::vector<RdpCurve>{c1, mismatched}), config_error);
}

// Conversion against a dense-grid minimization of the same objective for a
// Gaussian-shaped curve.
TEST(RdpToDpTest, GaussianCurveMatchesDenseOracle) {
  const double delta = 1e-5;
  const std::vector<double> alphas = default_alpha_grid();
  const RdpCurve curve = gaussian_rdp_curve(1.0, 1.0, alphas);
  const double converted = rdp_to_dp(curve, delta);

  double oracle_value = std::numeric_limits<double>::infinity();
  for (double a = 1.001; a < 256.0; a += 0.001) {
    const double value = 0.5 * a + std::log(1.0 / (a * delta)) / (a - 1.0) +
                         std::log1p(-1.0 / a);
    oracle_value = std::min(oracle_value, value);
  }
  EXPECT_GE(converted, oracle_value - 1e-12);
  EXPECT_LE(converted, oracle_value * 1.005);
}

TEST(RdpToDpTest, NonincreasingInDelta) {
  const std::vector<double> alphas = default_alpha_grid();
  const RdpCurve curve = gaussian_rdp_curve(1.0, 2.0, alphas);
  double previous = std::numeric_limits<double>::infinity();
  for (double delta : {1e-9, 1e-7, 1e-5, 1e-3, 1e-1}) {
    const double value = rdp_to_dp(curve, delta);
    EXPECT_LE(value, previous + 1e-12);
    previous = value;
  }
}

TEST(RdpToDpTest, NullCurveLeavesOnlyGridOverhead) {
  const std::vector<double> alphas = default_alpha_grid();
  RdpCurve null_curve{alphas, std::vector<double>(alphas.size(), 0.0)};
  const double floor = rdp_to_dp(null_curve, 1e-5);
  EXPECT_GT(floor, 0.0);
  EXPECT_LT(floor, 1e-3);  // the extended grid keeps the overhead small
}

TEST(CalibratePbmTest, UnconstrainedTargetPicksMaximumTheta) {
  const std::vector<double> alphas = default_alpha_grid();
  const auto params = calibrate_pbm(std::numeric_limits<double>::infinity(),
                                    1e-5, 100, 16, 1.0, alphas);
  EXPECT_DOUBLE_EQ(params.theta(), 0.25);
}

TEST(CalibratePbmTest, MonotoneInGroupSize) {
  const std::vector<double> alphas = default_alpha_grid();
  double previous = 0.0;
  for (std::uint64_t n : {100ULL, 200ULL, 400ULL}) {
    const auto params = calibrate_pbm(0.5, 1e-5, n, 64, 1.0, alphas);
    EXPECT_GE(params.theta(), previous - kThetaBisectionTolerance);
    previous = params.theta();
  }
}

TEST(CalibratePbmTest, PostHocConversionCheck) {
  const std::vector<double> alphas = default_alpha_grid();
  for (double target : {0.3, 1.0, 3.0}) {
    const auto params = calibrate_pbm(target, 1e-5, 500, 64, 1.0, alphas);
    const double achieved =
        rdp_to_dp(pbm_rdp_curve(500, 64, params.theta(), alphas), 1e-5);
    EXPECT_LE(achieved, target);
  }
}

TEST(CalibratePbmTest, InfeasibleTargetIsAnError) {
  const std::vector<double> alphas = default_alpha_grid();
  EXPECT_THROW(calibrate_pbm(1e-6, 1e-5, 100, 16, 1.0, alphas),
               calibration_error);
}

TEST(SplitBudgetTest, Examples) {
  const std::vector<double> alphas = {2.0, 4.0};
  const RdpCurve total{alphas, {1.0, 2.0}};

  const BudgetSplit even = split_budget(total, 0.5);
  EXPECT_EQ(even.first.epsilons, even.second.epsilons);

  const BudgetSplit skewed = split_budget(total, 0.99);
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    EXPECT_NEAR(skewed.first.epsilons[i] / skewed.second.epsilons[i], 99.0,
                1e-9);
  }
  const RdpCurve recomposed =
      compose(std::vector<RdpCurve>{skewed.first, skewed.second});
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    EXPECT_NEAR(recomposed.epsilons[i], total.epsilons[i],
                1e-15 * total.epsilons[i]);
  }
  EXPECT_THROW(split_budget(total, 0.0), config_error);
  EXPECT_THROW(split_budget(total, 1.0), config_error);
}

TEST(CalibrateGaussianTest, MonotoneAndScaleEquivariant) {
  const std::vector<double> alphas = default_alpha_grid();
  const auto tight = calibrate_gaussian(0.5, 1e-5, 1.0, alphas);
  const auto loose = calibrate_gaussian(1.0, 1e-5, 1.0, alphas);
  EXPECT_LT(loose.sigma, tight.sigma);

  const auto doubled = calibrate_gaussian(0.5, 1e-5, 2.0, alphas);
  EXPECT_NEAR(doubled.sigma / tight.sigma, 2.0, 1e-6);

  const double achieved =
      rdp_to_dp(gaussian_rdp_curve(1.0, tight.sigma, alphas), 1e-5);
  EXPECT_LE(achieved, 0.5 + 1e-9);
}

TEST(CalibrateSuiteTest, ComposedGuaranteeMeetsTarget) {
  const std::vector<double> alphas = default_alpha_grid();
  const auto suite = calibrate_suite(1.0, 1e-5, 1000, 256, 256, 1.0, 0.99,
                                     alphas);
  EXPECT_GT(suite.first_moment.theta(), suite.second_moment.theta());
  const RdpCurve composed = compose(std::vector<RdpCurve>{
      pbm_rdp_curve(1000, 256, suite.first_moment.theta(), alphas),
      pbm_rdp_curve(1000, 256, suite.second_moment.theta(), alphas)});
  EXPECT_LE(rdp_to_dp(composed, 1e-5), 1.0);
}

TEST(AlphaGridTest, DefaultGridIsValid) {
  const std::vector<double> grid = default_alpha_grid();
  EXPECT_NO_THROW(validate_alpha_grid(grid));
  EXPECT_GE(grid.back(), 4096.0);
}

}  // namespace
