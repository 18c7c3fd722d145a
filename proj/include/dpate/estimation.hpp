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

// Analyst-side estimation: difference in means, variance plug-ins, the
// DP-noise calibration term, and both asymptotic (CLT) and non-asymptotic
// (empirical-Bernstein) confidence intervals.

#ifndef DPATE_ESTIMATION_HPP_
#define DPATE_ESTIMATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "dpate/errors.hpp"
#include "dpate/mechanisms.hpp"

namespace dpate::estimation {

enum class Estimand { kSate, kPate };
enum class CiKind { kAsymptotic, kNonAsymptotic };

// How the sampling and DP-noise spreads combine into a half-width. The
// quadrature form z*sqrt(var_sampling + var_dp) is what the CLT argument
// licenses and is the default; adding standard deviations is strictly more
// conservative and is kept selectable.
enum class HalfWidthForm { kQuadrature, kAddStddev };

// Decoded group means and clamped sample variances, plus group sizes.
struct GroupEstimates {
  double mu_c;
  double mu_t;
  double s2_c;
  double s2_t;
  std::uint64_t n_c;
  std::uint64_t n_t;
};

struct ConfidenceInterval {
  double center;
  double half_width;
  double level;  // 1 - alpha_conf
  CiKind kind;
  Estimand estimand;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  double width() const { return 2.0 * half_width; }
  bool covers(double value) const {
    return std::abs(value - center) <= half_width;
  }
};

// Worst-case DP-noise variances of the decoded group means, and the same
// quantity on the sqrt(n)-normalized scale used by the CLT statement
// (sigma2_pr = n * (v_c + v_t)).
struct NoiseProfile {
  double v_c;
  double v_t;
  double sigma2_pr;

  double dp_variance_total() const { return v_c + v_t; }
};

inline double diff_in_means(const GroupEstimates& est) {
  return est.mu_t - est.mu_c;
}

// Conservative plug-in for Var(diff-in-means) under the randomization
// (SATE) design: (n_c n_t / n) * (sqrt(s2_t)/n_t + sqrt(s2_c)/n_c)^2.
// Upper-bounds the Neyman variance, whose covariance term is unidentifiable.
inline double sate_variance(const GroupEstimates& est) {
  if (est.n_c < 1 || est.n_t < 1) {
    throw input_error("sate_variance: both groups must be nonempty");
  }
  const double nc = static_cast<double>(est.n_c);
  const double nt = static_cast<double>(est.n_t);
  const double n = nc + nt;
  const double root_sum = std::sqrt(std::max(0.0, est.s2_t)) / nt +
                          std::sqrt(std::max(0.0, est.s2_c)) / nc;
  return nc * nt / n * root_sum * root_sum;
}

// Unbiased plug-in for Var(diff-in-means) under i.i.d. sampling (PATE):
// s2_t/n_t + s2_c/n_c.
inline double pate_variance(const GroupEstimates& est) {
  if (est.n_c < 1 || est.n_t < 1) {
    throw input_error("pate_variance: both groups must be nonempty");
  }
  return std::max(0.0, est.s2_t) / static_cast<double>(est.n_t) +
         std::max(0.0, est.s2_c) / static_cast<double>(est.n_c);
}

// DP-noise profile of the first-moment decoder: v_* = R^2/(4 n_* m theta^2)
// per group (the closed-form worst case), plus the n-scaled calibration term.
inline NoiseProfile dp_calibration(const mechanisms::PbmParams& first_moment,
                                   std::uint64_t n_c, std::uint64_t n_t) {
  const double v_c = mechanisms::pbm_variance_bound(first_moment, n_c);
  const double v_t = mechanisms::pbm_variance_bound(first_moment, n_t);
  const double n = static_cast<double>(n_c + n_t);
  return NoiseProfile{v_c, v_t, n * (v_c + v_t)};
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Standard normal inverse CDF. Newton iteration on the erfc-based CDF inside
// a maintained bracket; accurate to well below 1e-9 over (0, 1).
inline double z_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) {
    throw input_error("z_quantile: p must lie in (0, 1)");
  }
  if (p == 0.5) return 0.0;
  const double tail = std::min(p, 1.0 - p);
  double x = -std::sqrt(-2.0 * std::log(tail));  // tail-side starting point
  if (p > 0.5) x = -x;
  double lo = -40.0, hi = 40.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double err = normal_cdf(x) - p;
    if (err > 0.0) {
      hi = std::min(hi, x);
    } else {
      lo = std::max(lo, x);
    }
    const double step = err / std::max(normal_pdf(x),
                                       std::numeric_limits<double>::min());
    double next = x - step;
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-14 * (1.0 + std::abs(next))) return next;
    x = next;
  }
  return x;
}

// CLT interval: half-width z_{1-alpha/2} * sqrt(var_sampling + var_dp) in the
// default quadrature form, where var_sampling estimates Var(diff-in-means)
// itself (pate_variance or sate_variance) and var_dp is the exact worst-case
// DP-noise variance added to the statistic.
inline ConfidenceInterval asymptotic_ci(
    double delta_hat, double sampling_variance, double dp_variance,
    double confidence, Estimand estimand,
    HalfWidthForm form = HalfWidthForm::kQuadrature) {
  if (!(confidence > 0.0) || !(confidence < 1.0)) {
    throw input_error("asymptotic_ci: confidence must lie in (0, 1)");
  }
  if (sampling_variance < 0.0 || dp_variance < 0.0) {
    throw input_error("asymptotic_ci: variances must be nonnegative");
  }
  const double z = z_quantile(0.5 + confidence / 2.0);
  const double spread =
      form == HalfWidthForm::kQuadrature
          ? std::sqrt(sampling_variance + dp_variance)
          : std::sqrt(sampling_variance) + std::sqrt(dp_variance);
  return ConfidenceInterval{delta_hat, z * spread, confidence,
                            CiKind::kAsymptotic, estimand};
}

// Empirical-Bernstein half-width for the mean of n_pairs i.i.d. variables
// bounded by |W| <= value_bound, with failure probability delta1 + delta2:
//   sqrt(2 s^2 log(2/delta1) / n) + 14 * value_bound * log(2/delta2) / (3(n-1)).
inline double empirical_bernstein_halfwidth(double sample_variance,
                                            std::uint64_t n_pairs,
                                            double value_bound, double delta1,
                                            double delta2) {
  if (n_pairs <= 1) {
    throw input_error("empirical_bernstein_halfwidth: need n_pairs >= 2");
  }
  if (!(delta1 > 0.0) || !(delta1 < 1.0) || !(delta2 > 0.0) || !(delta2 < 1.0)) {
    throw input_error("empirical_bernstein_halfwidth: deltas must lie in (0, 1)");
  }
  const double n = static_cast<double>(n_pairs);
  return std::sqrt(2.0 * std::max(0.0, sample_variance) *
                   std::log(2.0 / delta1) / n) +
         14.0 * value_bound * std::log(2.0 / delta2) / (3.0 * (n - 1.0));
}

// The deterministic slack gamma of the non-asymptotic interval, with the
// failure-probability split baked in as (0.995, 1/600, 1/600, 1/600):
//
//   gamma = 56 R log(1200/delta) / (3(n-1))
//         + sqrt( R^2 log(1200/delta) / (2 m1 n theta1^2) )
//         + sqrt( 4 log(2.01/delta) / n ) * min(A, B)
//
// with A the fourth-root branch and B the branch normalized by the observed
// sqrt(s2_t + s2_c) (taken as +inf when that is zero, so A is used).
inline double nonasymptotic_gamma(std::uint64_t n, double range,
                                  const mechanisms::MechanismSuite& suite,
                                  double delta, double s2_sum) {
  const double nd = static_cast<double>(n);
  const double log_split = std::log(1200.0 / delta);
  const double log_main = std::log(2.01 / delta);
  const double r2 = range * range;
  const double m1 = suite.first_moment.trials();
  const double t1 = suite.first_moment.theta();
  const double m2 = suite.second_moment.trials();
  const double t2 = suite.second_moment.theta();

  const double mean_noise = log_split * r2 / (2.0 * m1 * nd * t1 * t1);
  const double var_noise = log_split * r2 * r2 / (4.0 * m2 * nd * t2 * t2);

  const double branch_a =
      std::pow(var_noise, 0.25) + std::pow(mean_noise, 0.25);
  const double branch_b =
      s2_sum > 0.0
          ? (std::sqrt(var_noise) + std::sqrt(mean_noise)) / std::sqrt(s2_sum)
          : std::numeric_limits<double>::infinity();

  return 56.0 * range * log_split / (3.0 * (nd - 1.0)) +
         std::sqrt(mean_noise) +
         std::sqrt(4.0 * log_main / nd) * std::min(branch_a, branch_b);
}

// Non-asymptotic (1-delta) interval for the equal-split design n_c = n_t =
// n/2: half-width sqrt(2 * plug_in * log(2.01/delta)) + gamma, with the PATE
// plug-in (s2_t + s2_c) * 2/n or the conservative SATE plug-in.
inline ConfidenceInterval nonasymptotic_ci(
    double delta_hat, double s2_t, double s2_c, std::uint64_t n, double range,
    const mechanisms::MechanismSuite& suite, double delta, Estimand estimand) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw input_error("nonasymptotic_ci: delta must lie in (0, 1)");
  }
  if (n < 4 || n % 2 != 0) {
    throw input_error(
        "nonasymptotic_ci: stated for equal groups, n even and >= 4");
  }
  const std::uint64_t half = n / 2;
  GroupEstimates est{0.0, 0.0, std::max(0.0, s2_c), std::max(0.0, s2_t), half,
                     half};
  const double plug_in =
      estimand == Estimand::kPate ? pate_variance(est) : sate_variance(est);
  const double gamma =
      nonasymptotic_gamma(n, range, suite, delta, est.s2_t + est.s2_c);
  const double half_width =
      std::sqrt(2.0 * plug_in * std::log(2.01 / delta)) + gamma;
  return ConfidenceInterval{delta_hat, half_width, 1.0 - delta,
                            CiKind::kNonAsymptotic, estimand};
}

}  // namespace dpate::estimation

#endif  // DPATE_ESTIMATION_HPP_
