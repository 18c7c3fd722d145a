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

// Renyi-DP accounting for the binomial randomizer.
//
// The guarantee of a group of n clients is the order-alpha Renyi divergence
// between the aggregate distributions on neighboring inputs, maximized over
// the worst-case pair:
//
//   exact:   D_alpha( Binom(mn, 1/2-theta) ||
//                     Binom(m(n-1), 1/2-theta) * Binom(m, 1/2+theta) )
//   approx:  m * D_alpha( Binom(n, 1/2-theta) ||
//                         Binom(n-1, 1/2-theta) * Bernoulli(1/2+theta) )
//
// where * is convolution. The approximation follows from tensorization plus
// the data-processing inequality, so it always dominates the exact value and
// runs in O(n) independent of m. All pmf arithmetic stays in log space.
// Curves convert to (epsilon, delta)-DP through the standard three-term
// minimization over a fixed alpha grid, and calibration searches the largest
// feasible theta by bisection.

#ifndef DPATE_ACCOUNTING_HPP_
#define DPATE_ACCOUNTING_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpate/errors.hpp"
#include "dpate/mechanisms.hpp"

namespace dpate::accounting {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Largest exactly-accounted problem size; beyond it the O(m^2 n) convolution
// is refused and callers are pointed at the approximation.
inline constexpr std::uint64_t kMaxExactSupport = 10'000'000;

namespace detail {

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum_exp(std::span<const double> values) {
  double max_value = kNegInf;
  for (double v : values) max_value = std::max(max_value, v);
  if (max_value == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

}  // namespace detail

// A normalized log-space pmf over the support {0, ..., K}. Entries may be
// -inf. Normalization (logsumexp == 0) is enforced at construction to within
// 1e-9 and then pinned exactly, so repeated convolutions cannot drift.
class LogPmf {
 public:
  explicit LogPmf(std::vector<double> log_probs)
      : log_probs_(std::move(log_probs)) {
    if (log_probs_.empty()) throw config_error("LogPmf: empty support");
    const double total = detail::log_sum_exp(log_probs_);
    // Log-gamma rounding accumulates roughly linearly in the support size;
    // anything beyond that indicates a real bug, not drift.
    const double tolerance =
        std::max(1e-9, 5e-15 * static_cast<double>(log_probs_.size()));
    if (!(std::abs(total) <= tolerance)) {
      char message[96];
      std::snprintf(message, sizeof(message),
                    "LogPmf: not normalized, logsumexp = %.3e over %zu points",
                    total, log_probs_.size());
      throw config_error(message);
    }
    for (double& v : log_probs_) v -= total;
  }

  // log Binom(K, p) pmf via log-gamma; p in (0, 1) strictly.
  static LogPmf binomial(std::uint64_t trials, double p) {
    if (!(p > 0.0) || !(p < 1.0)) {
      throw config_error("LogPmf::binomial: degenerate distribution, p = " +
                         std::to_string(p));
    }
    const double log_p = std::log(p);
    const double log_q = std::log1p(-p);
    const double n = static_cast<double>(trials);
    const double lg_n1 = std::lgamma(n + 1.0);
    std::vector<double> values(trials + 1);
    for (std::uint64_t k = 0; k <= trials; ++k) {
      const double kd = static_cast<double>(k);
      values[k] = lg_n1 - std::lgamma(kd + 1.0) - std::lgamma(n - kd + 1.0) +
                  kd * log_p + (n - kd) * log_q;
    }
    return LogPmf(std::move(values));
  }

  static LogPmf point_mass_at_zero() { return LogPmf({0.0}); }

  std::size_t size() const { return log_probs_.size(); }
  double operator[](std::size_t k) const { return log_probs_[k]; }
  std::span<const double> values() const { return log_probs_; }

 private:
  std::vector<double> log_probs_;
};

// Direct O(|a|*|b|) convolution in log space. Direct rather than FFT: the
// supports this library convolves are O(n) or capped, and staying in log
// space is the whole point of the exact accountant.
inline LogPmf log_convolve(const LogPmf& a, const LogPmf& b) {
  const std::size_t out_size = a.size() + b.size() - 1;
  std::vector<double> out(out_size, kNegInf);
  std::vector<double> terms;
  terms.reserve(std::min(a.size(), b.size()));
  for (std::size_t k = 0; k < out_size; ++k) {
    const std::size_t j_lo = k >= a.size() ? k - a.size() + 1 : 0;
    const std::size_t j_hi = std::min(k, b.size() - 1);
    terms.clear();
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      const double t = a[k - j] + b[j];
      if (t != kNegInf) terms.push_back(t);
    }
    out[k] = detail::log_sum_exp(terms);
  }
  return LogPmf(std::move(out));
}

// D_alpha(p || q) = 1/(alpha-1) * log sum_k p_k^alpha q_k^(1-alpha),
// evaluated in log space. +inf when p puts mass outside q's support.
inline double renyi_divergence(const LogPmf& p, const LogPmf& q, double alpha) {
  if (!(alpha > 1.0)) {
    throw config_error("renyi_divergence: alpha must exceed 1");
  }
  std::vector<double> terms;
  terms.reserve(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] == kNegInf) continue;
    if (k >= q.size() || q[k] == kNegInf) return kInf;
    terms.push_back(alpha * p[k] + (1.0 - alpha) * q[k]);
  }
  const double value = detail::log_sum_exp(terms) / (alpha - 1.0);
  return std::max(0.0, value);
}

namespace detail {

inline void check_pbm_accounting_args(std::uint64_t n, int m, double theta,
                                      double alpha) {
  if (n < 2) throw config_error("pbm accounting: need at least two clients");
  if (m < 1) throw config_error("pbm accounting: trials must be >= 1");
  if (!(theta > 0.0) || theta > 0.25) {
    throw config_error("pbm accounting: theta must lie in (0, 1/4]");
  }
  if (!(alpha > 1.0)) throw config_error("pbm accounting: alpha must exceed 1");
}

}  // namespace detail

// Exact group-level guarantee at the worst-case neighbor pair. Cost is
// dominated by one O(m^2 n) log-space convolution; refuses m*n beyond
// kMaxExactSupport (use pbm_rdp_approx there).
inline double pbm_rdp_exact(std::uint64_t n, int m, double theta,
                            double alpha) {
  detail::check_pbm_accounting_args(n, m, theta, alpha);
  const std::uint64_t support = n * static_cast<std::uint64_t>(m);
  if (support > kMaxExactSupport) {
    throw config_error(
        "pbm_rdp_exact: m*n exceeds " + std::to_string(kMaxExactSupport) +
        "; use pbm_rdp_approx for large sessions");
  }
  const LogPmf p = LogPmf::binomial(support, 0.5 - theta);
  const LogPmf q = log_convolve(
      LogPmf::binomial(static_cast<std::uint64_t>(m) * (n - 1), 0.5 - theta),
      LogPmf::binomial(static_cast<std::uint64_t>(m), 0.5 + theta));
  return renyi_divergence(p, q, alpha);
}

// O(n) upper bound: m times the single-replication divergence. Dominates
// pbm_rdp_exact on every input.
inline double pbm_rdp_approx(std::uint64_t n, int m, double theta,
                             double alpha) {
  detail::check_pbm_accounting_args(n, m, theta, alpha);
  const LogPmf p = LogPmf::binomial(n, 0.5 - theta);
  const LogPmf q = log_convolve(LogPmf::binomial(n - 1, 0.5 - theta),
                                LogPmf::binomial(1, 0.5 + theta));
  return m * renyi_divergence(p, q, alpha);
}

// Diagnostic sweep over the family of single-replication neighbor pairs
// indexed by k (how many of the other clients sit at the opposite extreme):
//
//   m * D_alpha( Binom(1+k, 1/2-theta) * Binom(n-k-1, 1/2+theta) ||
//                Binom(k, 1/2-theta)   * Binom(n-k,   1/2+theta) )
//
// Returns the maximum over k in {0, ..., min(k_max, n-1)}. Exposed to verify
// empirically where the maximum sits; pbm_rdp_approx remains the default.
inline double pbm_rdp_approx_sweep(std::uint64_t n, int m, double theta,
                                   double alpha, std::uint64_t k_max = 32) {
  detail::check_pbm_accounting_args(n, m, theta, alpha);
  const std::uint64_t k_hi = std::min<std::uint64_t>(k_max, n - 1);
  double best = kNegInf;
  for (std::uint64_t k = 0; k <= k_hi; ++k) {
    const LogPmf numer =
        k + 1 == n ? LogPmf::binomial(n, 0.5 - theta)
                   : log_convolve(LogPmf::binomial(1 + k, 0.5 - theta),
                                  LogPmf::binomial(n - k - 1, 0.5 + theta));
    const LogPmf denom =
        k == 0 ? LogPmf::binomial(n, 0.5 + theta)
               : log_convolve(LogPmf::binomial(k, 0.5 - theta),
                              LogPmf::binomial(n - k, 0.5 + theta));
    best = std::max(best, m * renyi_divergence(numer, denom, alpha));
  }
  return best;
}

// A Renyi-DP guarantee sampled on a fixed grid of orders.
struct RdpCurve {
  std::vector<double> alphas;    // strictly increasing, all > 1
  std::vector<double> epsilons;  // epsilon(alpha), nonnegative
};

// Default order grid. Half steps through the small orders where large
// targets land, dense integers to 64, then a geometric tail so that
// conversion targets down to about 1e-3 stay reachable at delta = 1e-5; the
// conversion overhead alone is ~0.1 when the grid stops at 64.
inline std::vector<double> default_alpha_grid() {
  std::vector<double> grid = {1.25, 1.5, 1.75};
  for (int twice = 4; twice <= 32; ++twice) grid.push_back(twice / 2.0);
  for (int a = 17; a <= 64; ++a) grid.push_back(a);
  for (double a : {72.0,   80.0,   96.0,   112.0,  128.0,  160.0, 192.0,
                   224.0,  256.0,  320.0,  384.0,  448.0,  512.0, 640.0,
                   768.0,  1024.0, 1536.0, 2048.0, 3072.0, 4096.0}) {
    grid.push_back(a);
  }
  return grid;
}

inline void validate_alpha_grid(std::span<const double> alphas) {
  if (alphas.empty()) throw config_error("alpha grid: empty");
  double prev = 1.0;
  for (double a : alphas) {
    if (!(a > prev)) {
      throw config_error("alpha grid: orders must be > 1 and strictly increasing");
    }
    prev = a;
  }
}

inline RdpCurve pbm_rdp_curve(std::uint64_t n, int m, double theta,
                              std::span<const double> alphas) {
  validate_alpha_grid(alphas);
  detail::check_pbm_accounting_args(n, m, theta, alphas.front());
  // The pmf pair does not depend on alpha; build once, evaluate per order.
  const LogPmf p = LogPmf::binomial(n, 0.5 - theta);
  const LogPmf q = log_convolve(LogPmf::binomial(n - 1, 0.5 - theta),
                                LogPmf::binomial(1, 0.5 + theta));
  RdpCurve curve;
  curve.alphas.assign(alphas.begin(), alphas.end());
  curve.epsilons.reserve(alphas.size());
  for (double a : alphas) {
    curve.epsilons.push_back(m * renyi_divergence(p, q, a));
  }
  return curve;
}

// Gaussian mechanism with l2 sensitivity `sensitivity` and noise scale
// `sigma`: epsilon(alpha) = alpha * sensitivity^2 / (2 sigma^2).
inline RdpCurve gaussian_rdp_curve(double sensitivity, double sigma,
                                   std::span<const double> alphas) {
  validate_alpha_grid(alphas);
  if (!(sensitivity > 0.0) || !(sigma > 0.0)) {
    throw config_error("gaussian_rdp_curve: sensitivity and sigma must be positive");
  }
  RdpCurve curve;
  curve.alphas.assign(alphas.begin(), alphas.end());
  const double rho = sensitivity * sensitivity / (2.0 * sigma * sigma);
  curve.epsilons.reserve(alphas.size());
  for (double a : alphas) curve.epsilons.push_back(rho * a);
  return curve;
}

// Pointwise additive composition. Grids must match exactly; interpolating
// between orders is not a valid privacy argument.
inline RdpCurve compose(std::span<const RdpCurve> curves) {
  if (curves.empty()) throw config_error("compose: no curves");
  RdpCurve out = curves.front();
  for (std::size_t i = 1; i < curves.size(); ++i) {
    if (curves[i].alphas != out.alphas) {
      throw config_error("compose: alpha grids do not match");
    }
    for (std::size_t k = 0; k < out.epsilons.size(); ++k) {
      out.epsilons[k] += curves[i].epsilons[k];
    }
  }
  return out;
}

// Renyi-DP to (epsilon, delta)-DP:
//   epsilon = min_alpha [ eps(alpha) + log(1/(alpha*delta))/(alpha-1)
//                         + log(1 - 1/alpha) ],
// clamped below at zero.
inline double rdp_to_dp(const RdpCurve& curve, double delta) {
  if (curve.alphas.empty() || curve.alphas.size() != curve.epsilons.size()) {
    throw config_error("rdp_to_dp: malformed curve");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw config_error("rdp_to_dp: delta must lie in (0, 1)");
  }
  double best = kInf;
  for (std::size_t i = 0; i < curve.alphas.size(); ++i) {
    const double a = curve.alphas[i];
    const double candidate = curve.epsilons[i] +
                             std::log(1.0 / (a * delta)) / (a - 1.0) +
                             std::log1p(-1.0 / a);
    best = std::min(best, candidate);
  }
  return std::max(0.0, best);
}

// The 99/1 (by default) split of a total allocation between the first- and
// second-moment randomizers, taken pointwise on the curve so that composing
// the parts reproduces the total exactly.
struct BudgetSplit {
  RdpCurve total;
  double fraction_first;
  RdpCurve first;
  RdpCurve second;
};

inline BudgetSplit split_budget(const RdpCurve& total,
                                double fraction_first = 0.99) {
  if (!(fraction_first > 0.0) || !(fraction_first < 1.0)) {
    throw config_error("split_budget: fraction must lie in (0, 1)");
  }
  BudgetSplit split{total, fraction_first, total, total};
  for (std::size_t i = 0; i < total.epsilons.size(); ++i) {
    split.first.epsilons[i] = fraction_first * total.epsilons[i];
    split.second.epsilons[i] = (1.0 - fraction_first) * total.epsilons[i];
  }
  return split;
}

inline constexpr double kThetaBisectionTolerance = 1e-4;

// Largest theta in (0, 1/4] whose converted guarantee meets target_epsilon at
// the given delta. Maximizing theta minimizes decoder variance. Bisection to
// kThetaBisectionTolerance, returning the feasible endpoint.
inline mechanisms::PbmParams calibrate_pbm(double target_epsilon, double delta,
                                           std::uint64_t group_size, int m,
                                           double range,
                                           std::span<const double> alphas) {
  validate_alpha_grid(alphas);
  if (!(target_epsilon > 0.0)) {
    throw calibration_error("calibrate_pbm: target epsilon must be positive");
  }
  auto converted = [&](double theta) {
    return rdp_to_dp(pbm_rdp_curve(group_size, m, theta, alphas), delta);
  };
  if (std::isinf(target_epsilon) || converted(0.25) <= target_epsilon) {
    return mechanisms::PbmParams(m, 0.25, range);
  }
  // The theta -> 0 limit leaves only the conversion overhead; if even that
  // exceeds the target, no theta works on this grid.
  RdpCurve null_curve;
  null_curve.alphas.assign(alphas.begin(), alphas.end());
  null_curve.epsilons.assign(alphas.size(), 0.0);
  if (rdp_to_dp(null_curve, delta) > target_epsilon) {
    throw calibration_error(
        "calibrate_pbm: target (" + std::to_string(target_epsilon) + ", " +
        std::to_string(delta) +
        ") is below the conversion overhead of the alpha grid");
  }
  double lo = 0.0;  // feasible
  double hi = 0.25; // infeasible
  while (hi - lo > kThetaBisectionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (converted(mid) <= target_epsilon) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!(lo > 0.0)) {
    throw calibration_error("calibrate_pbm: no positive theta within tolerance");
  }
  return mechanisms::PbmParams(m, lo, range);
}

// Largest theta whose curve lies under `target` pointwise. Used to realize a
// curve-level budget share.
inline double calibrate_pbm_to_curve(const RdpCurve& target,
                                     std::uint64_t group_size, int m) {
  auto fits = [&](double theta) {
    const RdpCurve curve =
        pbm_rdp_curve(group_size, m, theta, target.alphas);
    for (std::size_t i = 0; i < curve.epsilons.size(); ++i) {
      if (curve.epsilons[i] > target.epsilons[i]) return false;
    }
    return true;
  };
  if (fits(0.25)) return 0.25;
  double lo = 0.0;
  double hi = 0.25;
  while (hi - lo > kThetaBisectionTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (fits(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!(lo > 0.0)) {
    throw calibration_error(
        "calibrate_pbm_to_curve: no positive theta fits under the target curve");
  }
  return lo;
}

// Smallest sigma whose Gaussian curve converts below target_epsilon. For the
// difference-in-means statistic with groups (n_c, n_t) and outcomes in
// [-R, R], use sensitivity = 2R * sqrt(1/n_c^2 + 1/n_t^2).
inline mechanisms::GaussianParams calibrate_gaussian(
    double target_epsilon, double delta, double l2_sensitivity,
    std::span<const double> alphas) {
  validate_alpha_grid(alphas);
  if (!(l2_sensitivity > 0.0)) {
    throw calibration_error("calibrate_gaussian: sensitivity must be positive");
  }
  if (!(target_epsilon > 0.0)) {
    throw calibration_error("calibrate_gaussian: target epsilon must be positive");
  }
  RdpCurve null_curve;
  null_curve.alphas.assign(alphas.begin(), alphas.end());
  null_curve.epsilons.assign(alphas.size(), 0.0);
  if (rdp_to_dp(null_curve, delta) > target_epsilon) {
    throw calibration_error(
        "calibrate_gaussian: target is below the conversion overhead of the grid");
  }
  auto converted = [&](double sigma) {
    return rdp_to_dp(gaussian_rdp_curve(l2_sensitivity, sigma, alphas), delta);
  };
  double hi = l2_sensitivity;  // grow until feasible
  while (converted(hi) > target_epsilon) hi *= 2.0;
  double lo = hi;  // shrink until infeasible to bracket the boundary
  while (converted(lo) <= target_epsilon && lo > 1e-300) lo *= 0.5;
  for (int iter = 0; iter < 200 && hi - lo > 1e-12 * hi; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (converted(mid) <= target_epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return mechanisms::GaussianParams{hi};
}

// Calibrates a full two-moment suite against an (epsilon, delta) target:
// finds the largest achievable total curve, splits it fraction/(1-fraction)
// pointwise, and fits one theta per moment under its share. The composed
// curve is bounded by the total pointwise, so the pair meets the target by
// construction (paying the RDP->DP conversion only once).
inline mechanisms::MechanismSuite calibrate_suite(
    double target_epsilon, double delta, std::uint64_t group_size, int m1,
    int m2, double range, double fraction_first,
    std::span<const double> alphas) {
  if (!(fraction_first > 0.0) || !(fraction_first < 1.0)) {
    throw config_error("calibrate_suite: fraction must lie in (0, 1)");
  }
  const mechanisms::PbmParams total =
      calibrate_pbm(target_epsilon, delta, group_size, m1, range, alphas);
  const RdpCurve total_curve =
      pbm_rdp_curve(group_size, m1, total.theta(), alphas);
  const BudgetSplit split = split_budget(total_curve, fraction_first);
  const double theta1 = calibrate_pbm_to_curve(split.first, group_size, m1);
  const double theta2 = calibrate_pbm_to_curve(split.second, group_size, m2);
  return mechanisms::MechanismSuite{
      mechanisms::PbmParams(m1, theta1, range),
      mechanisms::PbmParams(m2, theta2, range)};
}

}  // namespace dpate::accounting

#endif  // DPATE_ACCOUNTING_HPP_
