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

// Command-line front end: account | calibrate | simulate | report.
// Exit codes: 0 success, 2 configuration error, 3 calibration error,
// 4 runtime error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpate/accounting.hpp"
#include "dpate/config.hpp"
#include "dpate/report.hpp"
#include "dpate/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCalibration = 3;
constexpr int kExitRuntime = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dpate::config_error("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dpate::config_error("cannot write '" + path + "'");
  out << content;
}

std::string format_eps(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", value);
  return buffer;
}

// account: RDP table for one (n, m, theta), exact column only when the
// support is small enough, plus converted (epsilon, delta) summary rows when
// --delta is given. Header: alpha,eps_exact,eps_approx.
int cmd_account(std::uint64_t n, int m, double theta,
                const std::vector<double>& alphas_flag,
                std::optional<double> delta, const std::string& out_path) {
  std::vector<double> alphas = alphas_flag.empty()
                                   ? dpate::accounting::default_alpha_grid()
                                   : alphas_flag;
  dpate::accounting::validate_alpha_grid(alphas);
  const bool exact_feasible =
      n * static_cast<std::uint64_t>(m) <= dpate::accounting::kMaxExactSupport;

  std::string csv = "alpha,eps_exact,eps_approx\n";
  dpate::accounting::RdpCurve exact_curve;
  const dpate::accounting::RdpCurve approx_curve =
      dpate::accounting::pbm_rdp_curve(n, m, theta, alphas);
  if (exact_feasible) {
    exact_curve.alphas = approx_curve.alphas;
    for (double a : alphas) {
      exact_curve.epsilons.push_back(
          dpate::accounting::pbm_rdp_exact(n, m, theta, a));
    }
  }
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    csv += format_eps(alphas[i]);
    csv += ',';
    if (exact_feasible) csv += format_eps(exact_curve.epsilons[i]);
    csv += ',';
    csv += format_eps(approx_curve.epsilons[i]);
    csv += '\n';
  }
  if (delta.has_value()) {
    csv += "converted(delta=" + format_eps(*delta) + "),";
    if (exact_feasible) {
      csv += format_eps(dpate::accounting::rdp_to_dp(exact_curve, *delta));
    }
    csv += ',';
    csv += format_eps(dpate::accounting::rdp_to_dp(approx_curve, *delta));
    csv += '\n';
  }
  write_output(out_path, csv);
  return kExitOk;
}

int cmd_calibrate(double epsilon, double delta, std::uint64_t n_c,
                  std::uint64_t n_t, int m1, int m2, double fraction,
                  double range, const std::string& out_path) {
  const std::uint64_t group = std::min(n_c, n_t);
  const std::vector<double> alphas = dpate::accounting::default_alpha_grid();
  const dpate::mechanisms::MechanismSuite suite =
      dpate::accounting::calibrate_suite(epsilon, delta, group, m1, m2, range,
                                         fraction, alphas);
  // Post-hoc self-check: the composed curve must convert below the target.
  const dpate::accounting::RdpCurve composed = dpate::accounting::compose(
      std::vector<dpate::accounting::RdpCurve>{
          dpate::accounting::pbm_rdp_curve(group, m1,
                                           suite.first_moment.theta(), alphas),
          dpate::accounting::pbm_rdp_curve(
              group, m2, suite.second_moment.theta(), alphas)});
  const double achieved = dpate::accounting::rdp_to_dp(composed, delta);
  if (achieved > epsilon) {
    throw dpate::calibration_error("calibrate: self-check failed, achieved " +
                                   std::to_string(achieved));
  }

  nlohmann::json fragment;
  fragment["mechanism"] = {{"kind", "pbm"}, {"m1", m1}, {"m2", m2}};
  fragment["privacy"] = {{"theta1", suite.first_moment.theta()},
                         {"theta2", suite.second_moment.theta()},
                         {"delta", delta},
                         {"fraction_first", fraction}};
  fragment["achieved_epsilon"] = achieved;
  write_output(out_path, fragment.dump(2) + "\n");
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& out_flag,
                 unsigned threads, std::optional<std::uint64_t> seed,
                 bool timing) {
  dpate::config::RunConfig cfg =
      dpate::config::parse_run_config(read_file(config_path));
  if (seed.has_value()) cfg.base_seed = *seed;
  const std::string out_path = !out_flag.empty() ? out_flag : cfg.out;
  const dpate::runner::SimulationOutput output =
      dpate::runner::run_simulation(cfg, threads, timing);
  write_output(out_path, output.csv);
  if (!out_path.empty() && out_path != "-") {
    write_output(out_path + ".meta.json", output.sidecar_json);
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs,
               const std::string& out_path) {
  std::vector<dpate::report::ReportRow> rows;
  for (const std::string& path : inputs) {
    const std::vector<dpate::report::ReportRow> parsed =
        dpate::report::parse_csv(read_file(path));
    rows.insert(rows.end(), parsed.begin(), parsed.end());
  }
  write_output(out_path, dpate::report::merge_to_grid(rows));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed differentially private ATE estimation"};
  app.require_subcommand(1);

  // account
  auto* account = app.add_subcommand(
      "account", "Print the RDP table of the binomial randomizer");
  std::uint64_t acc_n = 0;
  int acc_m = 0;
  double acc_theta = 0.0;
  std::vector<double> acc_alphas;
  double acc_delta = -1.0;
  std::string acc_out;
  account->add_option("--n", acc_n, "Group size")->required();
  account->add_option("--m", acc_m, "Trials per client")->required();
  account->add_option("--theta", acc_theta, "Scale in (0, 1/4]")->required();
  account->add_option("--alphas", acc_alphas,
                      "Renyi orders (default: built-in grid)");
  account->add_option("--delta", acc_delta,
                      "Also print converted epsilon at this delta");
  account->add_option("--out", acc_out, "Output path (default: stdout)");

  // calibrate
  auto* calibrate = app.add_subcommand(
      "calibrate", "Choose mechanism scales for an (epsilon, delta) target");
  double cal_eps = 0.0, cal_delta = 1e-5, cal_fraction = 0.99, cal_range = 1.0;
  std::uint64_t cal_nc = 0, cal_nt = 0;
  int cal_m1 = 0, cal_m2 = 0;
  std::string cal_out;
  calibrate->add_option("--epsilon", cal_eps, "Total epsilon")->required();
  calibrate->add_option("--delta", cal_delta, "Total delta");
  calibrate->add_option("--n-c", cal_nc, "Control group size")->required();
  calibrate->add_option("--n-t", cal_nt, "Test group size")->required();
  calibrate->add_option("--m1", cal_m1, "First-moment trials")->required();
  calibrate->add_option("--m2", cal_m2, "Second-moment trials")->required();
  calibrate->add_option("--fraction", cal_fraction,
                        "First-moment share of the budget");
  calibrate->add_option("--range", cal_range, "Outcome half-range R");
  calibrate->add_option("--out", cal_out, "Output path (default: stdout)");

  // simulate
  auto* simulate =
      app.add_subcommand("simulate", "Run a Monte Carlo coverage experiment");
  std::string sim_config, sim_out;
  unsigned sim_threads = 0;
  std::uint64_t sim_seed = 0;
  bool sim_timing = false;
  bool sim_seed_given = false;
  simulate->add_option("--config", sim_config, "RunConfig JSON path")
      ->required();
  simulate->add_option("--out", sim_out, "Report CSV path");
  simulate->add_option("--threads", sim_threads,
                       "Worker threads (default: hardware)");
  simulate
      ->add_option("--seed", sim_seed, "Override the config base seed")
      ->each([&](const std::string&) { sim_seed_given = true; });
  simulate->add_flag("--timing", sim_timing,
                     "Write measured wall time into the CSV (breaks "
                     "byte-for-byte reproducibility)");

  // report
  auto* report_cmd = app.add_subcommand(
      "report", "Merge report CSVs into a mechanism-by-epsilon grid");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  report_cmd->add_option("inputs", rep_inputs, "Report CSV files")
      ->required()
      ->expected(-1);
  report_cmd->add_option("--out", rep_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*account) {
      return cmd_account(acc_n, acc_m, acc_theta, acc_alphas,
                         acc_delta > 0 ? std::optional<double>(acc_delta)
                                       : std::nullopt,
                         acc_out);
    }
    if (*calibrate) {
      return cmd_calibrate(cal_eps, cal_delta, cal_nc, cal_nt, cal_m1, cal_m2,
                           cal_fraction, cal_range, cal_out);
    }
    if (*simulate) {
      return cmd_simulate(sim_config, sim_out, sim_threads,
                          sim_seed_given ? std::optional<std::uint64_t>(sim_seed)
                                         : std::nullopt,
                          sim_timing);
    }
    if (*report_cmd) {
      return cmd_report(rep_inputs, rep_out);
    }
  } catch (const dpate::calibration_error& e) {
    std::cerr << "calibration error: " << e.what() << "\n";
    return kExitCalibration;
  } catch (const dpate::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
