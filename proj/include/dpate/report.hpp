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

// CSV report rows and the mechanism-by-epsilon comparison reshape. All value
// formatting is fixed-format so identical runs produce identical bytes.

#ifndef DPATE_REPORT_HPP_
#define DPATE_REPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dpate/errors.hpp"

namespace dpate::report {

inline constexpr const char* kReportHeader =
    "mechanism,epsilon,delta,m,estimand,ci_kind,coverage,mean_width,"
    "width_std_err,N,wall_time_s";

struct ReportRow {
  std::string mechanism;
  double epsilon = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  int m = 0;  // 0 renders empty
  std::string estimand;
  std::string ci_kind;
  double coverage = 0.0;
  double mean_width = 0.0;
  double width_std_err = 0.0;
  std::uint64_t replications = 0;
  double wall_time_s = 0.0;
};

namespace detail {

inline std::string format_general(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.12g", x);
  return buffer;
}

inline std::string format_fixed(double x, const char* spec) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), spec, x);
  return buffer;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline double parse_double_field(const std::string& field) {
  if (field.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  return std::stod(field);
}

}  // namespace detail

inline std::string format_row(const ReportRow& row) {
  std::string out = row.mechanism;
  out += ',';
  out += detail::format_general(row.epsilon);
  out += ',';
  out += detail::format_general(row.delta);
  out += ',';
  out += row.m > 0 ? std::to_string(row.m) : "";
  out += ',';
  out += row.estimand;
  out += ',';
  out += row.ci_kind;
  out += ',';
  out += detail::format_fixed(row.coverage, "%.6f");
  out += ',';
  out += detail::format_fixed(row.mean_width, "%.9e");
  out += ',';
  out += detail::format_fixed(row.width_std_err, "%.9e");
  out += ',';
  out += std::to_string(row.replications);
  out += ',';
  out += detail::format_fixed(row.wall_time_s, "%.3f");
  return out;
}

inline std::string to_csv(const std::vector<ReportRow>& rows) {
  std::string out = kReportHeader;
  out += '\n';
  for (const ReportRow& row : rows) {
    out += format_row(row);
    out += '\n';
  }
  return out;
}

inline std::vector<ReportRow> parse_csv(const std::string& text) {
  std::stringstream stream(text);
  std::string line;
  if (!std::getline(stream, line)) throw config_error("report: empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kReportHeader) {
    throw config_error("report: header mismatch, expected '" +
                       std::string(kReportHeader) + "'");
  }
  std::vector<ReportRow> rows;
  while (std::getline(stream, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::split_csv_line(line);
    if (f.size() != 11) {
      throw config_error("report: malformed row '" + line + "'");
    }
    ReportRow row;
    row.mechanism = f[0];
    row.epsilon = detail::parse_double_field(f[1]);
    row.delta = detail::parse_double_field(f[2]);
    row.m = f[3].empty() ? 0 : std::stoi(f[3]);
    row.estimand = f[4];
    row.ci_kind = f[5];
    row.coverage = detail::parse_double_field(f[6]);
    row.mean_width = detail::parse_double_field(f[7]);
    row.width_std_err = detail::parse_double_field(f[8]);
    row.replications = std::stoull(f[9]);
    row.wall_time_s = detail::parse_double_field(f[10]);
    rows.push_back(row);
  }
  return rows;
}

// Reshape rows into the mechanism-by-epsilon comparison grid: one coverage
// row and one mean-width row per mechanism, one column per epsilon. Cells
// with no data stay empty.
inline std::string merge_to_grid(const std::vector<ReportRow>& rows) {
  std::vector<double> epsilons;
  std::vector<std::string> mechanisms;  // first-appearance order
  for (const ReportRow& row : rows) {
    const bool known_eps =
        std::any_of(epsilons.begin(), epsilons.end(), [&](double e) {
          return e == row.epsilon || (std::isnan(e) && std::isnan(row.epsilon));
        });
    if (!known_eps) epsilons.push_back(row.epsilon);
    if (std::find(mechanisms.begin(), mechanisms.end(), row.mechanism) ==
        mechanisms.end()) {
      mechanisms.push_back(row.mechanism);
    }
  }
  std::sort(epsilons.begin(), epsilons.end(), [](double a, double b) {
    // NaN (explicit-theta runs) sorts last to keep the ordering strict-weak.
    if (std::isnan(a)) return false;
    if (std::isnan(b)) return true;
    return a < b;
  });

  auto find_cell = [&](const std::string& mech, double eps) -> const ReportRow* {
    for (const ReportRow& row : rows) {
      if (row.mechanism != mech) continue;
      if (row.epsilon == eps || (std::isnan(row.epsilon) && std::isnan(eps))) {
        return &row;
      }
    }
    return nullptr;
  };

  std::string out = "mechanism,metric";
  for (double e : epsilons) {
    out += ",eps=";
    out += detail::format_general(e);
  }
  out += '\n';
  for (const std::string& mech : mechanisms) {
    out += mech;
    out += ",coverage";
    for (double e : epsilons) {
      out += ',';
      if (const ReportRow* cell = find_cell(mech, e)) {
        out += detail::format_fixed(cell->coverage, "%.6f");
      }
    }
    out += '\n';
    out += mech;
    out += ",mean_width";
    for (double e : epsilons) {
      out += ',';
      if (const ReportRow* cell = find_cell(mech, e)) {
        out += detail::format_fixed(cell->mean_width, "%.9e");
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace dpate::report

#endif  // DPATE_REPORT_HPP_
