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

// Turns a RunConfig into one simulation cell per (mechanism, epsilon),
// calibrating mechanism parameters first, and renders the report CSV plus a
// sidecar with every resolved parameter. Shared by the CLI and the test
// suites so determinism checks exercise the same path operators use.

#ifndef DPATE_RUNNER_HPP_
#define DPATE_RUNNER_HPP_

#include <chrono>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpate/accounting.hpp"
#include "dpate/config.hpp"
#include "dpate/report.hpp"
#include "dpate/simulation.hpp"

namespace dpate::runner {

struct CellResult {
  report::ReportRow row;
  double theta1 = std::numeric_limits<double>::quiet_NaN();
  double theta2 = std::numeric_limits<double>::quiet_NaN();
  double sigma_noise = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t clipped = 0;
  double measured_wall_time_s = 0.0;
};

struct SimulationOutput {
  std::string csv;
  std::string sidecar_json;
  std::vector<CellResult> cells;
};

inline double gaussian_l2_sensitivity(double range, std::uint64_t n_c,
                                      std::uint64_t n_t) {
  const double inv_c = 1.0 / static_cast<double>(n_c);
  const double inv_t = 1.0 / static_cast<double>(n_t);
  return 2.0 * range * std::sqrt(inv_c * inv_c + inv_t * inv_t);
}

// When timing is off (the default) the CSV wall-time column is written as
// zero so that repeated runs are byte-identical; measured times always land
// in the sidecar.
inline SimulationOutput run_simulation(const config::RunConfig& cfg,
                                       unsigned threads = 0,
                                       bool timing_in_csv = false) {
  const double range = simulation::outcome_range(cfg.model);
  const std::uint64_t n_t = cfg.n - cfg.n_c;
  const std::uint64_t calibration_group = std::min(cfg.n_c, n_t);
  const std::vector<double> alphas = accounting::default_alpha_grid();

  struct Cell {
    simulation::MechanismChoice mechanism;
    double epsilon;
    CellResult result;
  };
  std::vector<Cell> cells;

  switch (cfg.mechanism) {
    case config::MechanismKind::kPbm: {
      if (cfg.privacy.theta1.has_value()) {
        mechanisms::MechanismSuite suite{
            mechanisms::PbmParams(cfg.m1, *cfg.privacy.theta1, range),
            mechanisms::PbmParams(cfg.m2, *cfg.privacy.theta2, range)};
        Cell cell{suite, std::numeric_limits<double>::quiet_NaN(), {}};
        cell.result.theta1 = *cfg.privacy.theta1;
        cell.result.theta2 = *cfg.privacy.theta2;
        cells.push_back(std::move(cell));
        break;
      }
      if (cfg.privacy.epsilons.empty()) {
        throw config_error("run_simulation: pbm needs epsilons or thetas");
      }
      for (double eps : cfg.privacy.epsilons) {
        const mechanisms::MechanismSuite suite = accounting::calibrate_suite(
            eps, cfg.privacy.delta, calibration_group, cfg.m1, cfg.m2, range,
            cfg.privacy.fraction_first, alphas);
        Cell cell{suite, eps, {}};
        cell.result.theta1 = suite.first_moment.theta();
        cell.result.theta2 = suite.second_moment.theta();
        cells.push_back(std::move(cell));
      }
      break;
    }
    case config::MechanismKind::kCentralGaussian: {
      if (cfg.privacy.epsilons.empty()) {
        throw config_error("run_simulation: central_gaussian needs epsilons");
      }
      const double sensitivity = gaussian_l2_sensitivity(range, cfg.n_c, n_t);
      for (double eps : cfg.privacy.epsilons) {
        const mechanisms::GaussianParams params = accounting::calibrate_gaussian(
            eps, cfg.privacy.delta, sensitivity, alphas);
        Cell cell{params, eps, {}};
        cell.result.sigma_noise = params.sigma;
        cells.push_back(std::move(cell));
      }
      break;
    }
    case config::MechanismKind::kNone: {
      cells.push_back(
          Cell{simulation::NonPrivate{},
               std::numeric_limits<double>::infinity(), {}});
      break;
    }
  }

  std::vector<report::ReportRow> rows;
  for (Cell& cell : cells) {
    simulation::TrialConfig trial_config{
        cfg.model,       cfg.n,         cfg.n_c,
        cell.mechanism,  cfg.estimand,  cfg.ci.kind,
        cfg.ci.confidence, cfg.ci.half_width_form};
    const auto start = std::chrono::steady_clock::now();
    const simulation::ExperimentReport rep = simulation::run_monte_carlo(
        trial_config, cfg.replications, cfg.base_seed, threads);
    const auto stop = std::chrono::steady_clock::now();
    cell.result.measured_wall_time_s =
        std::chrono::duration<double>(stop - start).count();

    report::ReportRow row;
    switch (cfg.mechanism) {
      case config::MechanismKind::kPbm:
        row.mechanism = "pbm";
        row.m = cfg.m1;
        row.delta = cfg.privacy.delta;
        break;
      case config::MechanismKind::kCentralGaussian:
        row.mechanism = "central_gaussian";
        row.delta = cfg.privacy.delta;
        break;
      case config::MechanismKind::kNone:
        row.mechanism = "none";
        break;
    }
    row.epsilon = cell.epsilon;
    row.estimand =
        cfg.estimand == estimation::Estimand::kSate ? "SATE" : "PATE";
    row.ci_kind = cfg.ci.kind == estimation::CiKind::kAsymptotic
                      ? "asymptotic"
                      : "nonasymptotic";
    row.coverage = rep.coverage;
    row.mean_width = rep.mean_width;
    row.width_std_err = rep.width_std_err;
    row.replications = rep.replications;
    row.wall_time_s = timing_in_csv ? cell.result.measured_wall_time_s : 0.0;
    cell.result.clipped = rep.clipped_values;
    cell.result.row = row;
    rows.push_back(row);
  }

  SimulationOutput out;
  out.csv = report::to_csv(rows);
  nlohmann::json sidecar;
  sidecar["resolved_config"] =
      nlohmann::json::parse(config::serialize_run_config(cfg));
  sidecar["cells"] = nlohmann::json::array();
  for (const Cell& cell : cells) {
    nlohmann::json c;
    c["mechanism"] = cell.result.row.mechanism;
    if (!std::isnan(cell.epsilon)) {
      if (std::isinf(cell.epsilon)) {
        c["epsilon"] = "inf";
      } else {
        c["epsilon"] = cell.epsilon;
      }
    }
    if (!std::isnan(cell.result.theta1)) {
      c["theta1"] = cell.result.theta1;
      c["theta2"] = cell.result.theta2;
    }
    if (!std::isnan(cell.result.sigma_noise)) {
      c["sigma_noise"] = cell.result.sigma_noise;
    }
    c["clipped_values"] = cell.result.clipped;
    c["wall_time_s"] = cell.result.measured_wall_time_s;
    c["coverage"] = cell.result.row.coverage;
    c["mean_width"] = cell.result.row.mean_width;
    sidecar["cells"].push_back(c);
  }
  out.sidecar_json = sidecar.dump(2) + "\n";
  for (Cell& cell : cells) out.cells.push_back(std::move(cell.result));
  return out;
}

}  // namespace dpate::runner

#endif  // DPATE_RUNNER_HPP_
