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

#include "dpate/mechanisms.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace {

using dpate::Rng;
using dpate::config_error;
using dpate::input_error;
using namespace dpate::mechanisms;

TEST(PbmParamsTest, Validation) {
  EXPECT_NO_THROW(PbmParams(1, 0.25, 1.0));
  EXPECT_THROW(PbmParams(0, 0.1, 1.0), config_error);
  EXPECT_THROW(PbmParams(4, 0.0, 1.0), config_error);
  EXPECT_THROW(PbmParams(4, 0.26, 1.0), config_error);
  EXPECT_THROW(PbmParams(4, 0.1, 0.0), config_error);
  EXPECT_THROW(PbmParams(4, 0.1, -1.0), config_error);
}

TEST(EncoderTest, MeanSuccessProbabilityExamples) {
  EXPECT_DOUBLE_EQ(
      pbm_mean_success_probability(0.0, PbmParams(4, 0.17, 2.0)), 0.5);
  EXPECT_DOUBLE_EQ(
      pbm_mean_success_probability(1.0, PbmParams(4, 0.25, 1.0)), 0.75);
  EXPECT_DOUBLE_EQ(
      pbm_mean_success_probability(-1.0, PbmParams(4, 0.1, 1.0)), 0.4);
}

TEST(EncoderTest, SecondMomentSuccessProbabilityExamples) {
  const PbmParams params(4, 0.25, 1.0);
  EXPECT_NEAR(pbm_second_moment_success_probability(std::sqrt(0.5), params),
              0.5, 1e-15);
  EXPECT_DOUBLE_EQ(pbm_second_moment_success_probability(1.0, params), 0.75);
  EXPECT_DOUBLE_EQ(pbm_second_moment_success_probability(0.0, params), 0.25);
}

TEST(EncoderTest, ProbabilitiesStayInsideQuarterBand) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double theta = 0.01 + 0.24 * rng.next_double();
    const double range = 0.5 + 2.0 * rng.next_double();
    const PbmParams params(8, theta, range);
    const double x = range * (2.0 * rng.next_double() - 1.0);
    for (double p : {pbm_mean_success_probability(x, params),
                     pbm_second_moment_success_probability(x, params)}) {
      EXPECT_GE(p, 0.5 - theta - 1e-12);
      EXPECT_LE(p, 0.5 + theta + 1e-12);
      EXPECT_GE(p, 0.25 - 1e-12);
      EXPECT_LE(p, 0.75 + 1e-12);
    }
  }
}

TEST(EncoderTest, ClipsOutOfRangeInputsAndCounts) {
  const PbmParams params(16, 0.25, 1.0);
  ClipCounter clips;
  Rng rng_a(99);
  Rng rng_b(99);
  const int clipped_draw = pbm_encode_mean(2.5, params, rng_a, &clips);
  const int boundary_draw = pbm_encode_mean(1.0, params, rng_b, &clips);
  EXPECT_EQ(clipped_draw, boundary_draw);  // same stream, same p after clip
  EXPECT_EQ(clips.clipped, 1u);
}

TEST(EncoderTest, RejectsNonFiniteOutcome) {
  const PbmParams params(4, 0.2, 1.0);
  Rng rng(1);
  EXPECT_THROW(
      pbm_encode_mean(std::numeric_limits<double>::quiet_NaN(), params, rng),
      input_error);
  EXPECT_THROW(pbm_encode_second_moment(
                   std::numeric_limits<double>::infinity(), params, rng),
               input_error);
}

// The sampler must follow the binomial pmf exactly; chi-squared against the
// enumerated pmf.
TEST(EncoderTest, SamplerMatchesBinomialPmf) {
  const PbmParams params(8, 0.25, 1.0);
  const double x = 0.6;
  const double p = pbm_mean_success_probability(x, params);
  const std::vector<double> pmf = oracle::binomial_pmf(8, p);
  std::vector<int> counts(9, 0);
  const int reps = 40000;
  Rng rng(12345);
  for (int i = 0; i < reps; ++i) ++counts[pbm_encode_mean(x, params, rng)];
  double chi2 = 0.0;
  for (int k = 0; k <= 8; ++k) {
    const double expected = reps * pmf[k];
    const double d = counts[k] - expected;
    chi2 += d * d / expected;
  }
  EXPECT_LT(chi2, 26.12);  // 99.9% quantile of chi2(8)
}

TEST(DecoderTest, MeanExamples) {
  // A perfectly centered aggregate decodes to zero.
  EXPECT_DOUBLE_EQ(pbm_decode_mean(4, 2, PbmParams(4, 0.25, 1.0)), 0.0);
  // Single client, m=2, theta=1/4: mu_hat = (1/(2*0.25)) * (2 - 1) = 2,
  // outside [-R, R] by design.
  EXPECT_DOUBLE_EQ(pbm_decode_mean(2, 1, PbmParams(2, 0.25, 1.0)), 2.0);
  EXPECT_THROW(pbm_decode_mean(1, 0, PbmParams(2, 0.25, 1.0)), input_error);
  EXPECT_THROW(pbm_decode_mean(3, 1, PbmParams(2, 0.25, 1.0)), input_error);
}

TEST(DecoderTest, MeanUnbiasedSingleClientEnumeration) {
  const PbmParams params(4, 0.25, 1.0);
  const double x = 0.5;
  const auto pmf = oracle::poisson_binomial_sum_pmf(
      4, {pbm_mean_success_probability(x, params)});
  const double expectation = oracle::expectation_over_sum(
      pmf, [&](std::uint64_t s) { return pbm_decode_mean(s, 1, params); });
  EXPECT_NEAR(expectation, 0.5, 1e-12);
}

TEST(DecoderTest, ExactUnbiasednessSweep) {
  const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int m : {1, 2, 4, 8}) {
    const PbmParams params(m, 0.25, 1.0);
    for (double a : grid) {
      for (double b : grid) {
        const std::vector<double> xs = {a, b};
        std::vector<double> probs;
        double mean = 0.0;
        for (double x : xs) {
          probs.push_back(pbm_mean_success_probability(x, params));
          mean += x / xs.size();
        }
        const auto pmf = oracle::poisson_binomial_sum_pmf(m, probs);
        const double expectation = oracle::expectation_over_sum(
            pmf, [&](std::uint64_t s) { return pbm_decode_mean(s, 2, params); });
        EXPECT_NEAR(expectation, mean, 1e-12) << "m=" << m;
      }
    }
  }
}

TEST(DecoderTest, VarianceNeverExceedsBoundAndTightAtZero) {
  const double grid[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  const PbmParams params(4, 0.2, 1.0);
  for (double a : grid) {
    for (double b : grid) {
      const std::vector<double> probs = {
          pbm_mean_success_probability(a, params),
          pbm_mean_success_probability(b, params)};
      const auto pmf = oracle::poisson_binomial_sum_pmf(4, probs);
      const double mean = oracle::expectation_over_sum(
          pmf, [&](std::uint64_t s) { return pbm_decode_mean(s, 2, params); });
      const double second = oracle::expectation_over_sum(pmf, [&](std::uint64_t s) {
        const double v = pbm_decode_mean(s, 2, params);
        return v * v;
      });
      const double variance = second - mean * mean;
      const double bound = pbm_variance_bound(params, 2);
      EXPECT_LE(variance, bound + 1e-12);
      if (a == 0.0 && b == 0.0) {
        EXPECT_NEAR(variance, bound, 1e-12 * bound);
      }
    }
  }
}

TEST(DecoderTest, VarianceBoundExamples) {
  EXPECT_NEAR(pbm_variance_bound(PbmParams(256, 0.25, 1.0), 1000),
              1.0 / 64000.0, 1e-18);
  EXPECT_NEAR(pbm_variance_bound(PbmParams(256, 0.25, 1.0), 5000), 3.125e-6,
              1e-18);
  // Doubling theta quarters the bound.
  const double loose = pbm_variance_bound(PbmParams(64, 0.1, 1.0), 50);
  const double tight = pbm_variance_bound(PbmParams(64, 0.2, 1.0), 50);
  EXPECT_NEAR(loose / tight, 4.0, 1e-12);
}

TEST(DecoderTest, SecondMomentExamples) {
  // T = 2*1 - 2*1 + 1 = 1, s2 = 1/1 - 2*0 = 1.
  EXPECT_DOUBLE_EQ(
      pbm_decode_second_moment(1, 2, PbmParams(1, 0.25, 1.0), 0.0), 1.0);
  // agg = 0 gives T = -1, clamped to zero.
  EXPECT_DOUBLE_EQ(
      pbm_decode_second_moment(0, 2, PbmParams(1, 0.25, 1.0), 0.0), 0.0);
  EXPECT_LT(
      pbm_decode_second_moment_unclamped(0, 2, PbmParams(1, 0.25, 1.0), 0.0),
      0.0);
  EXPECT_THROW(pbm_decode_second_moment(0, 1, PbmParams(1, 0.25, 1.0), 0.0),
               input_error);
}

// Conditional unbiasedness of the pre-clamp estimator: expectation over the
// second-moment randomness, with mu_hat held at the exact sample mean.
TEST(DecoderTest, SecondMomentConditionallyUnbiasedBeforeClamp) {
  const PbmParams params(4, 0.25, 1.0);
  const std::vector<double> xs = {-0.5, 0.0, 0.5};
  const double sample_mean = 0.0;
  const double sample_variance = 0.25;  // (1/2) * (0.25 + 0 + 0.25)
  std::vector<double> probs;
  for (double x : xs) {
    probs.push_back(pbm_second_moment_success_probability(x, params));
  }
  const auto pmf = oracle::poisson_binomial_sum_pmf(4, probs);
  const double expectation =
      oracle::expectation_over_sum(pmf, [&](std::uint64_t s) {
        return pbm_decode_second_moment_unclamped(s, 3, params, sample_mean);
      });
  EXPECT_NEAR(expectation, sample_variance, 1e-10);
}

TEST(DecoderTest, ClampedSecondMomentNeverNegative) {
  const PbmParams params(8, 0.05, 1.0);
  for (std::uint64_t agg = 0; agg <= 16; ++agg) {
    EXPECT_GE(pbm_decode_second_moment(agg, 2, params, 0.7), 0.0);
  }
}

TEST(GaussianPerturbTest, DeterministicGivenSeed) {
  const GaussianParams params{1.0};
  Rng a(777);
  Rng b(777);
  EXPECT_DOUBLE_EQ(gaussian_perturb(0.0, params, a),
                   gaussian_perturb(0.0, params, b));
}

TEST(GaussianPerturbTest, VanishingSigmaIsIdentity) {
  Rng rng(5);
  EXPECT_DOUBLE_EQ(gaussian_perturb(0.3, GaussianParams{1e-300}, rng), 0.3);
  EXPECT_THROW(gaussian_perturb(0.3, GaussianParams{0.0}, rng), config_error);
}

TEST(GaussianPerturbTest, MonteCarloMean) {
  const GaussianParams params{1.0};
  Rng rng(31);
  const int reps = 100000;
  double sum = 0.0;
  for (int i = 0; i < reps; ++i) sum += gaussian_perturb(0.0, params, rng);
  EXPECT_NEAR(sum / reps, 0.0, 4.0 / std::sqrt(static_cast<double>(reps)));
}

}  // namespace
