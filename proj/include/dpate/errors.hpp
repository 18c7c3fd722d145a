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

#ifndef DPATE_ERRORS_HPP_
#define DPATE_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dpate {

// Invalid or inconsistent configuration (parameters, field sizes, grids).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Violation of the aggregation protocol (duplicate client, out-of-field value).
class protocol_error : public std::runtime_error {
 public:
  explicit protocol_error(const std::string& what) : std::runtime_error(what) {}
};

// A privacy target that no parameter setting can meet.
class calibration_error : public std::runtime_error {
 public:
  explicit calibration_error(const std::string& what)
      : std::runtime_error(what) {}
};

// Malformed data handed to an encoder or estimator.
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dpate

#endif  // DPATE_ERRORS_HPP_
