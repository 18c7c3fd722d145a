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

// Potential-outcome generation, treatment assignment, the end-to-end
// encode -> mask -> aggregate -> decode -> CI pipeline for one trial, and the
// Monte Carlo driver that measures empirical coverage and width.
//
// Reproducibility contract: every stream is seeded as
//   trial_seed  = derive_seed(base_seed, trial_index)
//   stream_seed = derive_seed(trial_seed, 0, purpose, extra)
// and clients are always consumed in ascending index order, so a report is a
// pure function of (config, base_seed) at any thread count.

#ifndef DPATE_SIMULATION_HPP_
#define DPATE_SIMULATION_HPP_

#include <cmath>
#include <cstdint>
#include <mutex>
#include <thread>
#include <variant>
#include <vector>

#include "dpate/errors.hpp"
#include "dpate/estimation.hpp"
#include "dpate/field_secagg.hpp"
#include "dpate/mechanisms.hpp"
#include "dpate/rng.hpp"

namespace dpate::simulation {

struct TruncatedGaussianModel {
  double mu_c;
  double mu_t;
  double sigma;
  double range;  // outcomes truncated to [-range, range]
};

// y(c) ~ Uniform(lo, hi), y(t) = y(c) + effect.
struct ConstantEffectModel {
  double lo;
  double hi;
  double effect;
  double range;
};

using OutcomeModel = std::variant<TruncatedGaussianModel, ConstantEffectModel>;

namespace detail {

inline double truncated_gaussian_mean(double mu, double sigma, double range) {
  const double a = (-range - mu) / sigma;
  const double b = (range - mu) / sigma;
  const double mass = estimation::normal_cdf(b) - estimation::normal_cdf(a);
  return mu + sigma * (estimation::normal_pdf(a) - estimation::normal_pdf(b)) /
                  mass;
}

inline void validate_model(const TruncatedGaussianModel& m) {
  if (!(m.sigma > 0.0) || !(m.range > 0.0)) {
    throw config_error("outcome model: sigma and range must be positive");
  }
  for (double mu : {m.mu_c, m.mu_t}) {
    const double acceptance =
        estimation::normal_cdf((m.range - mu) / m.sigma) -
        estimation::normal_cdf((-m.range - mu) / m.sigma);
    if (!(acceptance >= 1e-6)) {
      throw config_error(
          "outcome model: truncation acceptance below 1e-6; the rejection "
          "sampler would not terminate in reasonable time");
    }
  }
}

inline void validate_model(const ConstantEffectModel& m) {
  if (!(m.range > 0.0)) throw config_error("outcome model: range must be positive");
  if (!(m.lo < m.hi)) throw config_error("outcome model: need lo < hi");
  if (m.lo < -m.range || m.hi > m.range || m.lo + m.effect < -m.range ||
      m.hi + m.effect > m.range) {
    throw config_error(
        "outcome model: both [lo, hi] and [lo+effect, hi+effect] must sit "
        "inside [-range, range]");
  }
}

}  // namespace detail

inline double outcome_range(const OutcomeModel& model) {
  return std::visit([](const auto& m) { return m.range; }, model);
}

// Population-level treatment effect implied by the model.
inline double population_effect(const OutcomeModel& model) {
  if (const auto* g = std::get_if<TruncatedGaussianModel>(&model)) {
    return detail::truncated_gaussian_mean(g->mu_t, g->sigma, g->range) -
           detail::truncated_gaussian_mean(g->mu_c, g->sigma, g->range);
  }
  return std::get<ConstantEffectModel>(model).effect;
}

inline void validate_model(const OutcomeModel& model) {
  std::visit([](const auto& m) { detail::validate_model(m); }, model);
}

// Both potential outcomes per unit; only one is ever observed downstream.
struct PotentialOutcomes {
  std::vector<double> control;
  std::vector<double> treated;
};

inline PotentialOutcomes sample_outcomes(const OutcomeModel& model,
                                         std::uint64_t n, std::uint64_t seed) {
  validate_model(model);
  PotentialOutcomes out;
  out.control.resize(n);
  out.treated.resize(n);
  Rng rng(seed);
  if (const auto* g = std::get_if<TruncatedGaussianModel>(&model)) {
    auto draw = [&](double mu) {
      for (;;) {
        const double y = mu + g->sigma * rng.normal();
        if (y >= -g->range && y <= g->range) return y;
      }
    };
    for (std::uint64_t i = 0; i < n; ++i) {
      out.control[i] = draw(g->mu_c);
      out.treated[i] = draw(g->mu_t);
    }
  } else {
    const auto& c = std::get<ConstantEffectModel>(model);
    for (std::uint64_t i = 0; i < n; ++i) {
      out.control[i] = c.lo + (c.hi - c.lo) * rng.next_double();
      out.treated[i] = out.control[i] + c.effect;
    }
  }
  return out;
}

// Uniformly random assignment with exactly n_c controls, via a seeded
// partial Fisher-Yates selection.
inline std::vector<secagg::Group> assign_treatment(std::uint64_t n,
                                                   std::uint64_t n_c,
                                                   std::uint64_t seed) {
  if (n_c == 0 || n_c >= n) {
    throw config_error("assign_treatment: need 0 < n_c < n");
  }
  std::vector<std::uint64_t> index(n);
  for (std::uint64_t i = 0; i < n; ++i) index[i] = i;
  Rng rng(seed);
  std::vector<secagg::Group> assignment(n, secagg::Group::kTest);
  for (std::uint64_t i = 0; i < n_c; ++i) {
    const std::uint64_t j = i + rng.below(n - i);
    std::swap(index[i], index[j]);
    assignment[index[i]] = secagg::Group::kControl;
  }
  return assignment;
}

struct NonPrivate {};

using MechanismChoice =
    std::variant<mechanisms::MechanismSuite, mechanisms::GaussianParams,
                 NonPrivate>;

struct TrialConfig {
  OutcomeModel model;
  std::uint64_t n;
  std::uint64_t n_c;
  MechanismChoice mechanism;
  estimation::Estimand estimand;
  estimation::CiKind ci_kind;
  double confidence;  // 1 - alpha_conf; the non-asymptotic delta is 1 - this
  estimation::HalfWidthForm half_width_form =
      estimation::HalfWidthForm::kQuadrature;
};

struct TrialResult {
  estimation::ConfidenceInterval ci;
  double truth;
  bool covered;
  double width;
};

// The only data the estimation stage may see: the four revealed sums.
struct AggregateBundle {
  secagg::AggregateState control_first;
  secagg::AggregateState control_second;
  secagg::AggregateState test_first;
  secagg::AggregateState test_second;
};

// Decodes group means and clamped variances from the aggregate sums alone.
// This signature is the module boundary that keeps per-client data out of the
// estimation path.
inline estimation::GroupEstimates estimate_from_aggregates(
    const AggregateBundle& bundle, const mechanisms::MechanismSuite& suite) {
  auto expect = [](const secagg::AggregateState& s, secagg::Group g,
                   secagg::Moment m) {
    if (s.group != g || s.moment != m) {
      throw protocol_error("estimate_from_aggregates: mislabeled aggregate");
    }
  };
  expect(bundle.control_first, secagg::Group::kControl, secagg::Moment::kFirst);
  expect(bundle.control_second, secagg::Group::kControl, secagg::Moment::kSecond);
  expect(bundle.test_first, secagg::Group::kTest, secagg::Moment::kFirst);
  expect(bundle.test_second, secagg::Group::kTest, secagg::Moment::kSecond);
  if (bundle.control_first.count != bundle.control_second.count ||
      bundle.test_first.count != bundle.test_second.count) {
    throw protocol_error("estimate_from_aggregates: inconsistent group counts");
  }
  const double mu_c = mechanisms::pbm_decode_mean(
      bundle.control_first.sum, bundle.control_first.count,
      suite.first_moment);
  const double mu_t = mechanisms::pbm_decode_mean(
      bundle.test_first.sum, bundle.test_first.count, suite.first_moment);
  const double s2_c = mechanisms::pbm_decode_second_moment(
      bundle.control_second.sum, bundle.control_second.count,
      suite.second_moment, mu_c);
  const double s2_t = mechanisms::pbm_decode_second_moment(
      bundle.test_second.sum, bundle.test_second.count, suite.second_moment,
      mu_t);
  return estimation::GroupEstimates{mu_c, mu_t, s2_c,
                                    s2_t, bundle.control_first.count,
                                    bundle.test_first.count};
}

namespace detail {

struct GroupView {
  std::vector<std::uint64_t> members;  // client indices, ascending
};

struct RawGroupStats {
  double mean;
  double sample_variance;
};

inline RawGroupStats raw_stats(const std::vector<double>& observed,
                               const GroupView& group) {
  const double n = static_cast<double>(group.members.size());
  if (group.members.size() < 2) {
    throw config_error("run_trial: each group needs at least two clients");
  }
  double sum = 0.0;
  for (std::uint64_t i : group.members) sum += observed[i];
  const double mean = sum / n;
  double ss = 0.0;
  for (std::uint64_t i : group.members) {
    const double d = observed[i] - mean;
    ss += d * d;
  }
  return RawGroupStats{mean, ss / (n - 1.0)};
}

// Encode one moment for one group, mask, and aggregate. The per-client
// encodings never leave this function.
inline secagg::AggregateState encode_mask_aggregate(
    const std::vector<double>& observed, const GroupView& group,
    const mechanisms::PbmParams& params, secagg::Group label,
    secagg::Moment moment, Rng& encode_rng, std::uint64_t mask_seed,
    mechanisms::ClipCounter* clips) {
  const std::uint64_t n_g = group.members.size();
  const secagg::FieldSpec field = secagg::field_size_for(
      n_g, static_cast<std::uint64_t>(params.trials()));
  const std::vector<std::uint64_t> masks =
      secagg::generate_masks(n_g, field, mask_seed);
  std::vector<secagg::MaskedContribution> contributions;
  contributions.reserve(n_g);
  for (std::uint64_t slot = 0; slot < n_g; ++slot) {
    const double x = observed[group.members[slot]];
    const int z = moment == secagg::Moment::kFirst
                      ? mechanisms::pbm_encode_mean(x, params, encode_rng, clips)
                      : mechanisms::pbm_encode_second_moment(x, params,
                                                             encode_rng, clips);
    const std::uint64_t masked =
        (static_cast<std::uint64_t>(z) + masks[slot]) % field.modulus;
    contributions.push_back(secagg::MaskedContribution{slot, masked});
  }
  return secagg::aggregate(contributions, field, label, moment);
}

}  // namespace detail

inline TrialResult run_trial(const TrialConfig& config, std::uint64_t seed,
                             mechanisms::ClipCounter* clips = nullptr) {
  if (config.n < 4) throw config_error("run_trial: need n >= 4");
  const double range = outcome_range(config.model);

  const PotentialOutcomes outcomes = sample_outcomes(
      config.model, config.n,
      derive_seed(seed, 0, StreamPurpose::kOutcomes));
  const std::vector<secagg::Group> assignment = assign_treatment(
      config.n, config.n_c, derive_seed(seed, 0, StreamPurpose::kAssignment));

  std::vector<double> observed(config.n);
  detail::GroupView control;
  detail::GroupView test;
  for (std::uint64_t i = 0; i < config.n; ++i) {
    if (assignment[i] == secagg::Group::kControl) {
      observed[i] = outcomes.control[i];
      control.members.push_back(i);
    } else {
      observed[i] = outcomes.treated[i];
      test.members.push_back(i);
    }
  }

  estimation::GroupEstimates est{};
  double delta_hat = 0.0;
  double dp_variance = 0.0;
  const mechanisms::MechanismSuite* suite = nullptr;

  if (const auto* pbm =
          std::get_if<mechanisms::MechanismSuite>(&config.mechanism)) {
    if (pbm->first_moment.range() != range ||
        pbm->second_moment.range() != range) {
      throw config_error("run_trial: mechanism range does not match the model");
    }
    suite = pbm;
    Rng encode_mean_rng(derive_seed(seed, 0, StreamPurpose::kEncodeMean));
    Rng encode_second_rng(derive_seed(seed, 0, StreamPurpose::kEncodeSecond));
    const std::uint64_t mask_base = derive_seed(seed, 0, StreamPurpose::kMasks);
    const AggregateBundle bundle{
        detail::encode_mask_aggregate(observed, control, pbm->first_moment,
                                      secagg::Group::kControl,
                                      secagg::Moment::kFirst, encode_mean_rng,
                                      derive_seed(mask_base, 0), clips),
        detail::encode_mask_aggregate(observed, control, pbm->second_moment,
                                      secagg::Group::kControl,
                                      secagg::Moment::kSecond,
                                      encode_second_rng,
                                      derive_seed(mask_base, 1), clips),
        detail::encode_mask_aggregate(observed, test, pbm->first_moment,
                                      secagg::Group::kTest,
                                      secagg::Moment::kFirst, encode_mean_rng,
                                      derive_seed(mask_base, 2), clips),
        detail::encode_mask_aggregate(observed, test, pbm->second_moment,
                                      secagg::Group::kTest,
                                      secagg::Moment::kSecond,
                                      encode_second_rng,
                                      derive_seed(mask_base, 3), clips)};
    est = estimate_from_aggregates(bundle, *pbm);
    delta_hat = estimation::diff_in_means(est);
    dp_variance =
        estimation::dp_calibration(pbm->first_moment, est.n_c, est.n_t)
            .dp_variance_total();
  } else {
    const detail::RawGroupStats c = detail::raw_stats(observed, control);
    const detail::RawGroupStats t = detail::raw_stats(observed, test);
    est = estimation::GroupEstimates{c.mean,
                                     t.mean,
                                     c.sample_variance,
                                     t.sample_variance,
                                     control.members.size(),
                                     test.members.size()};
    delta_hat = estimation::diff_in_means(est);
    if (const auto* gauss =
            std::get_if<mechanisms::GaussianParams>(&config.mechanism)) {
      Rng noise_rng(derive_seed(seed, 0, StreamPurpose::kNoise));
      delta_hat = mechanisms::gaussian_perturb(delta_hat, *gauss, noise_rng);
      dp_variance = gauss->sigma * gauss->sigma;
    }
  }

  estimation::ConfidenceInterval ci{};
  if (config.ci_kind == estimation::CiKind::kAsymptotic) {
    const double sampling_variance = config.estimand == estimation::Estimand::kPate
                                         ? estimation::pate_variance(est)
                                         : estimation::sate_variance(est);
    ci = estimation::asymptotic_ci(delta_hat, sampling_variance, dp_variance,
                                   config.confidence, config.estimand,
                                   config.half_width_form);
  } else {
    if (suite == nullptr) {
      throw config_error(
          "run_trial: the non-asymptotic interval is defined for the binomial "
          "randomizer suite only");
    }
    if (config.n_c * 2 != config.n) {
      throw config_error("run_trial: non-asymptotic CI requires n_c = n_t");
    }
    ci = estimation::nonasymptotic_ci(delta_hat, est.s2_t, est.s2_c, config.n,
                                      range, *suite, 1.0 - config.confidence,
                                      config.estimand);
  }

  double truth = 0.0;
  if (config.estimand == estimation::Estimand::kPate) {
    truth = population_effect(config.model);
  } else {
    double sum = 0.0;
    for (std::uint64_t i = 0; i < config.n; ++i) {
      sum += outcomes.treated[i] - outcomes.control[i];
    }
    truth = sum / static_cast<double>(config.n);
  }

  return TrialResult{ci, truth, ci.covers(truth), ci.width()};
}

struct ExperimentReport {
  double coverage;
  double mean_width;
  double width_std_err;
  std::uint64_t replications;
  std::uint64_t clipped_values;
};

// Runs N independent trials, data-parallel over a fixed per-trial seed
// schedule. Results are reduced in trial order, so the report is identical at
// every thread count.
inline ExperimentReport run_monte_carlo(const TrialConfig& config,
                                        std::uint64_t replications,
                                        std::uint64_t base_seed,
                                        unsigned threads = 0) {
  if (replications < 1) throw config_error("run_monte_carlo: need N >= 1");
  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  threads = static_cast<unsigned>(
      std::min<std::uint64_t>(threads, replications));

  std::vector<TrialResult> results(replications,
                                   TrialResult{{}, 0.0, false, 0.0});
  std::vector<std::uint64_t> clip_counts(threads, 0);
  std::vector<std::thread> workers;
  workers.reserve(threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const std::uint64_t chunk = (replications + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::uint64_t begin = t * chunk;
    const std::uint64_t end = std::min<std::uint64_t>(begin + chunk, replications);
    workers.emplace_back([&, t, begin, end] {
      try {
        mechanisms::ClipCounter clips;
        for (std::uint64_t i = begin; i < end; ++i) {
          results[i] = run_trial(config, derive_seed(base_seed, i), &clips);
        }
        clip_counts[t] = clips.clipped;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (std::thread& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);

  std::uint64_t covered = 0;
  double width_sum = 0.0;
  for (const TrialResult& r : results) {
    covered += r.covered ? 1 : 0;
    width_sum += r.width;
  }
  const double n = static_cast<double>(replications);
  const double mean_width = width_sum / n;
  double ss = 0.0;
  for (const TrialResult& r : results) {
    const double d = r.width - mean_width;
    ss += d * d;
  }
  const double std_err =
      replications > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  std::uint64_t clipped = 0;
  for (std::uint64_t c : clip_counts) clipped += c;
  return ExperimentReport{static_cast<double>(covered) / n, mean_width,
                          std_err, replications, clipped};
}

}  // namespace dpate::simulation

#endif  // DPATE_SIMULATION_HPP_
