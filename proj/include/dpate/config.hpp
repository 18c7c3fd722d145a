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

// Versioned run configuration: JSON with a strict schema. Unknown keys are
// rejected with their path, so a typo in "theta1" cannot silently run with
// defaults.

#ifndef DPATE_CONFIG_HPP_
#define DPATE_CONFIG_HPP_

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpate/errors.hpp"
#include "dpate/estimation.hpp"
#include "dpate/simulation.hpp"

namespace dpate::config {

inline constexpr int kSchemaVersion = 1;

enum class MechanismKind { kPbm, kCentralGaussian, kNone };

struct PrivacyTarget {
  std::vector<double> epsilons;  // empty when thetas are given explicitly
  double delta = 1e-5;
  double fraction_first = 0.99;
  std::optional<double> theta1;  // explicit mechanism scales bypass calibration
  std::optional<double> theta2;
};

struct CiSpec {
  estimation::CiKind kind = estimation::CiKind::kAsymptotic;
  double confidence = 0.90;
  estimation::HalfWidthForm half_width_form =
      estimation::HalfWidthForm::kQuadrature;
};

struct RunConfig {
  simulation::OutcomeModel model;
  std::uint64_t n = 0;
  std::uint64_t n_c = 0;
  MechanismKind mechanism = MechanismKind::kNone;
  int m1 = 0;
  int m2 = 0;
  PrivacyTarget privacy;
  estimation::Estimand estimand = estimation::Estimand::kPate;
  CiSpec ci;
  std::uint64_t replications = 0;
  std::uint64_t base_seed = 0;
  std::string out;  // optional; the CLI flag overrides
};

namespace detail {

using nlohmann::json;

inline void require_keys(const json& object, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : object.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (key == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw config_error("config: unknown key '" + path + key + "'");
    }
  }
}

template <typename T>
T get_required(const json& object, const std::string& path, const char* key) {
  if (!object.contains(key)) {
    throw config_error("config: missing key '" + path + key + "'");
  }
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config: wrong type for '" + path + key + "'");
  }
}

template <typename T>
std::optional<T> get_optional(const json& object, const std::string& path,
                              const char* key) {
  if (!object.contains(key)) return std::nullopt;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception&) {
    throw config_error("config: wrong type for '" + path + key + "'");
  }
}

inline simulation::OutcomeModel parse_model(const json& node) {
  const std::string kind = get_required<std::string>(node, "model.", "kind");
  if (kind == "truncated_gaussian") {
    require_keys(node, "model.", {"kind", "mu_c", "mu_t", "sigma", "range"});
    return simulation::TruncatedGaussianModel{
        get_required<double>(node, "model.", "mu_c"),
        get_required<double>(node, "model.", "mu_t"),
        get_required<double>(node, "model.", "sigma"),
        get_required<double>(node, "model.", "range")};
  }
  if (kind == "constant_effect") {
    require_keys(node, "model.", {"kind", "lo", "hi", "effect", "range"});
    return simulation::ConstantEffectModel{
        get_required<double>(node, "model.", "lo"),
        get_required<double>(node, "model.", "hi"),
        get_required<double>(node, "model.", "effect"),
        get_required<double>(node, "model.", "range")};
  }
  throw config_error("config: model.kind must be 'truncated_gaussian' or "
                     "'constant_effect'");
}

inline json model_to_json(const simulation::OutcomeModel& model) {
  json node;
  if (const auto* g = std::get_if<simulation::TruncatedGaussianModel>(&model)) {
    node["kind"] = "truncated_gaussian";
    node["mu_c"] = g->mu_c;
    node["mu_t"] = g->mu_t;
    node["sigma"] = g->sigma;
    node["range"] = g->range;
  } else {
    const auto& c = std::get<simulation::ConstantEffectModel>(model);
    node["kind"] = "constant_effect";
    node["lo"] = c.lo;
    node["hi"] = c.hi;
    node["effect"] = c.effect;
    node["range"] = c.range;
  }
  return node;
}

}  // namespace detail

inline RunConfig parse_run_config(const std::string& text) {
  using detail::get_optional;
  using detail::get_required;
  using nlohmann::json;

  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw config_error(std::string("config: not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw config_error("config: top level must be an object");
  detail::require_keys(root, "",
                       {"version", "model", "n", "n_c", "mechanism", "privacy",
                        "estimand", "ci", "replications", "base_seed", "out"});
  const int version = get_required<int>(root, "", "version");
  if (version != kSchemaVersion) {
    throw config_error("config: unsupported schema version " +
                       std::to_string(version));
  }

  RunConfig cfg;
  cfg.model = detail::parse_model(get_required<json>(root, "", "model"));
  cfg.n = get_required<std::uint64_t>(root, "", "n");
  cfg.n_c = get_required<std::uint64_t>(root, "", "n_c");

  const json mech = get_required<json>(root, "", "mechanism");
  const std::string mech_kind =
      get_required<std::string>(mech, "mechanism.", "kind");
  if (mech_kind == "pbm") {
    detail::require_keys(mech, "mechanism.", {"kind", "m1", "m2"});
    cfg.mechanism = MechanismKind::kPbm;
    cfg.m1 = get_required<int>(mech, "mechanism.", "m1");
    cfg.m2 = get_required<int>(mech, "mechanism.", "m2");
  } else if (mech_kind == "central_gaussian") {
    detail::require_keys(mech, "mechanism.", {"kind"});
    cfg.mechanism = MechanismKind::kCentralGaussian;
  } else if (mech_kind == "none") {
    detail::require_keys(mech, "mechanism.", {"kind"});
    cfg.mechanism = MechanismKind::kNone;
  } else {
    throw config_error(
        "config: mechanism.kind must be 'pbm', 'central_gaussian', or 'none'");
  }

  if (root.contains("privacy")) {
    const json priv = root.at("privacy");
    detail::require_keys(priv, "privacy.",
                         {"epsilons", "delta", "fraction_first", "theta1",
                          "theta2"});
    cfg.privacy.epsilons =
        get_optional<std::vector<double>>(priv, "privacy.", "epsilons")
            .value_or(std::vector<double>{});
    cfg.privacy.delta =
        get_optional<double>(priv, "privacy.", "delta").value_or(1e-5);
    cfg.privacy.fraction_first =
        get_optional<double>(priv, "privacy.", "fraction_first").value_or(0.99);
    cfg.privacy.theta1 = get_optional<double>(priv, "privacy.", "theta1");
    cfg.privacy.theta2 = get_optional<double>(priv, "privacy.", "theta2");
    if (cfg.privacy.theta1.has_value() != cfg.privacy.theta2.has_value()) {
      throw config_error(
          "config: privacy.theta1 and privacy.theta2 must be given together");
    }
    if (cfg.privacy.theta1.has_value() && !cfg.privacy.epsilons.empty()) {
      throw config_error(
          "config: give either privacy.epsilons or explicit thetas, not both");
    }
  } else if (cfg.mechanism != MechanismKind::kNone) {
    throw config_error("config: 'privacy' is required for private mechanisms");
  }

  const std::string estimand = get_required<std::string>(root, "", "estimand");
  if (estimand == "SATE") {
    cfg.estimand = estimation::Estimand::kSate;
  } else if (estimand == "PATE") {
    cfg.estimand = estimation::Estimand::kPate;
  } else {
    throw config_error("config: estimand must be 'SATE' or 'PATE'");
  }

  const json ci = get_required<json>(root, "", "ci");
  detail::require_keys(ci, "ci.", {"kind", "confidence", "half_width_form"});
  const std::string ci_kind = get_required<std::string>(ci, "ci.", "kind");
  if (ci_kind == "asymptotic") {
    cfg.ci.kind = estimation::CiKind::kAsymptotic;
  } else if (ci_kind == "nonasymptotic") {
    cfg.ci.kind = estimation::CiKind::kNonAsymptotic;
  } else {
    throw config_error("config: ci.kind must be 'asymptotic' or 'nonasymptotic'");
  }
  cfg.ci.confidence = get_required<double>(ci, "ci.", "confidence");
  const std::string form =
      get_optional<std::string>(ci, "ci.", "half_width_form")
          .value_or("quadrature");
  if (form == "quadrature") {
    cfg.ci.half_width_form = estimation::HalfWidthForm::kQuadrature;
  } else if (form == "add_stddev") {
    cfg.ci.half_width_form = estimation::HalfWidthForm::kAddStddev;
  } else {
    throw config_error(
        "config: ci.half_width_form must be 'quadrature' or 'add_stddev'");
  }

  cfg.replications = get_required<std::uint64_t>(root, "", "replications");
  cfg.base_seed = get_required<std::uint64_t>(root, "", "base_seed");
  cfg.out = get_optional<std::string>(root, "", "out").value_or("");

  if (cfg.n < 4 || cfg.n_c == 0 || cfg.n_c >= cfg.n) {
    throw config_error("config: need n >= 4 and 0 < n_c < n");
  }
  if (cfg.replications < 1) throw config_error("config: replications must be >= 1");
  return cfg;
}

inline std::string serialize_run_config(const RunConfig& cfg) {
  using nlohmann::json;
  json root;
  root["version"] = kSchemaVersion;
  root["model"] = detail::model_to_json(cfg.model);
  root["n"] = cfg.n;
  root["n_c"] = cfg.n_c;
  json mech;
  switch (cfg.mechanism) {
    case MechanismKind::kPbm:
      mech["kind"] = "pbm";
      mech["m1"] = cfg.m1;
      mech["m2"] = cfg.m2;
      break;
    case MechanismKind::kCentralGaussian:
      mech["kind"] = "central_gaussian";
      break;
    case MechanismKind::kNone:
      mech["kind"] = "none";
      break;
  }
  root["mechanism"] = mech;
  if (cfg.mechanism != MechanismKind::kNone || !cfg.privacy.epsilons.empty()) {
    json priv;
    if (!cfg.privacy.epsilons.empty()) priv["epsilons"] = cfg.privacy.epsilons;
    priv["delta"] = cfg.privacy.delta;
    priv["fraction_first"] = cfg.privacy.fraction_first;
    if (cfg.privacy.theta1) priv["theta1"] = *cfg.privacy.theta1;
    if (cfg.privacy.theta2) priv["theta2"] = *cfg.privacy.theta2;
    root["privacy"] = priv;
  }
  root["estimand"] =
      cfg.estimand == estimation::Estimand::kSate ? "SATE" : "PATE";
  json ci;
  ci["kind"] = cfg.ci.kind == estimation::CiKind::kAsymptotic
                   ? "asymptotic"
                   : "nonasymptotic";
  ci["confidence"] = cfg.ci.confidence;
  ci["half_width_form"] =
      cfg.ci.half_width_form == estimation::HalfWidthForm::kQuadrature
          ? "quadrature"
          : "add_stddev";
  root["ci"] = ci;
  root["replications"] = cfg.replications;
  root["base_seed"] = cfg.base_seed;
  if (!cfg.out.empty()) root["out"] = cfg.out;
  return root.dump(2) + "\n";
}

}  // namespace dpate::config

#endif  // DPATE_CONFIG_HPP_
