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

// Client-side randomizers and the matching server-side unbiased decoders.
//
// The binomial randomizer maps an outcome x in [-R, R] to a Binomial(m, p)
// draw with p = theta*x/R + 1/2, so the revealed group sum is
// Poisson-binomial with finite support [0, n*m] and the decoded group mean is
// exactly unbiased. A second instance with p = 2*theta*(x^2/R^2 - 1/2) + 1/2
// carries the second moment for variance estimation. The additive-Gaussian
// perturbation of the difference-in-means statistic serves as the central
// baseline.

#ifndef DPATE_MECHANISMS_HPP_
#define DPATE_MECHANISMS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "dpate/errors.hpp"
#include "dpate/rng.hpp"

namespace dpate::mechanisms {

// Configuration of one binomial randomizer: trial count m, scale theta in
// (0, 1/4], and outcome half-range R. theta <= 1/4 keeps every success
// probability inside [1/4, 3/4]; theta = 0 is rejected because the decoder
// divides by it.
class PbmParams {
 public:
  PbmParams(int trials, double theta, double range)
      : trials_(trials), theta_(theta), range_(range) {
    if (trials < 1) throw config_error("PbmParams: trials must be >= 1");
    if (!(theta > 0.0) || theta > 0.25) {
      throw config_error("PbmParams: theta must lie in (0, 1/4]");
    }
    if (!(range > 0.0) || !std::isfinite(range)) {
      throw config_error("PbmParams: range must be positive and finite");
    }
  }

  int trials() const { return trials_; }
  double theta() const { return theta_; }
  double range() const { return range_; }

 private:
  int trials_;
  double theta_;
  double range_;
};

// One randomizer per moment. The second-moment parameters act on values in
// [0, R^2]; both share the outcome half-range R.
struct MechanismSuite {
  PbmParams first_moment;
  PbmParams second_moment;
};

// Central baseline: additive N(0, sigma^2) noise on the difference-in-means.
struct GaussianParams {
  double sigma;
};

// Count of inputs clipped to [-R, R] before encoding.
struct ClipCounter {
  std::uint64_t clipped = 0;
};

inline double clip_to_range(double x, double range, ClipCounter* clips) {
  if (!std::isfinite(x)) {
    throw input_error("pbm_encode: outcome must be finite");
  }
  if (x < -range || x > range) {
    if (clips != nullptr) ++clips->clipped;
    return std::clamp(x, -range, range);
  }
  return x;
}

// Success probability of the first-moment encoder; lies in
// [1/2 - theta, 1/2 + theta].
inline double pbm_mean_success_probability(double x, const PbmParams& params) {
  return params.theta() * x / params.range() + 0.5;
}

// Success probability of the second-moment encoder; lies in
// [1/2 - theta, 1/2 + theta].
inline double pbm_second_moment_success_probability(double x,
                                                    const PbmParams& params) {
  const double ratio = (x * x) / (params.range() * params.range());
  return 2.0 * params.theta() * (ratio - 0.5) + 0.5;
}

inline int pbm_encode_mean(double x, const PbmParams& params, Rng& rng,
                           ClipCounter* clips = nullptr) {
  const double clipped = clip_to_range(x, params.range(), clips);
  return rng.binomial(params.trials(),
                      pbm_mean_success_probability(clipped, params));
}

inline int pbm_encode_second_moment(double x, const PbmParams& params,
                                    Rng& rng, ClipCounter* clips = nullptr) {
  const double clipped = clip_to_range(x, params.range(), clips);
  return rng.binomial(params.trials(),
                      pbm_second_moment_success_probability(clipped, params));
}

// Unbiased decoder for the group mean (1/n*) * sum_i x_i from the aggregated
// first-moment sum. Centering subtracts n*m/2 so that unbiasedness follows
// from E[Z_i] = m * p_i; estimates may fall outside [-R, R].
inline double pbm_decode_mean(std::uint64_t agg_sum, std::uint64_t group_size,
                              const PbmParams& params) {
  if (group_size == 0) throw input_error("pbm_decode_mean: empty group");
  const double n = static_cast<double>(group_size);
  const double m = static_cast<double>(params.trials());
  if (static_cast<double>(agg_sum) > n * m) {
    throw input_error("pbm_decode_mean: aggregate exceeds n*m");
  }
  return params.range() / (n * m * params.theta()) *
         (static_cast<double>(agg_sum) - n * m / 2.0);
}

// Sample-variance plug-in before the positive-part clamp. With T =
// (R^2/(2*m*theta)) * agg_sum2 - n*R^2/(4*theta) + n*R^2/2 (conditionally
// unbiased for sum_i x_i^2), returns T/(n-1) - (n/(n-1)) * mu_hat^2.
inline double pbm_decode_second_moment_unclamped(std::uint64_t agg_sum2,
                                                 std::uint64_t group_size,
                                                 const PbmParams& params,
                                                 double mu_hat) {
  if (group_size <= 1) {
    throw input_error("pbm_decode_second_moment: variance needs group size >= 2");
  }
  const double n = static_cast<double>(group_size);
  const double m = static_cast<double>(params.trials());
  if (static_cast<double>(agg_sum2) > n * m) {
    throw input_error("pbm_decode_second_moment: aggregate exceeds n*m");
  }
  const double r2 = params.range() * params.range();
  const double theta = params.theta();
  const double second_moment_sum = r2 / (2.0 * m * theta) *
                                       static_cast<double>(agg_sum2) -
                                   n * r2 / (4.0 * theta) + n * r2 / 2.0;
  return second_moment_sum / (n - 1.0) - n / (n - 1.0) * mu_hat * mu_hat;
}

inline double pbm_decode_second_moment(std::uint64_t agg_sum2,
                                       std::uint64_t group_size,
                                       const PbmParams& params,
                                       double mu_hat) {
  return std::max(
      0.0, pbm_decode_second_moment_unclamped(agg_sum2, group_size, params,
                                              mu_hat));
}

// Worst-case variance of the decoded group mean, R^2 / (4 n m theta^2).
// Attained when every success probability equals 1/2 (all outcomes zero).
inline double pbm_variance_bound(const PbmParams& params,
                                 std::uint64_t group_size) {
  if (group_size == 0) throw input_error("pbm_variance_bound: empty group");
  const double n = static_cast<double>(group_size);
  const double m = static_cast<double>(params.trials());
  return params.range() * params.range() /
         (4.0 * n * m * params.theta() * params.theta());
}

inline double gaussian_perturb(double delta_hat, const GaussianParams& params,
                               Rng& rng) {
  if (!(params.sigma > 0.0)) {
    throw config_error("gaussian_perturb: sigma must be positive");
  }
  return delta_hat + params.sigma * rng.normal();
}

}  // namespace dpate::mechanisms

#endif  // DPATE_MECHANISMS_HPP_
