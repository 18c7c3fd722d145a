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

// Single-server secure aggregation, simulated by zero-sum additive masking
// over the integers modulo M. The simulation holds every mask in one process;
// there is no key agreement and no dropout recovery. Its purpose is to force
// downstream code to consume only per-group modular sums.

#ifndef DPATE_FIELD_SECAGG_HPP_
#define DPATE_FIELD_SECAGG_HPP_

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dpate/errors.hpp"
#include "dpate/rng.hpp"

namespace dpate::secagg {

enum class Group { kControl, kTest };
enum class Moment { kFirst, kSecond };

// The aggregation field Z_M. Sized as M = n*m + 1 so that a sum of n
// contributions, each at most m, can never wrap.
struct FieldSpec {
  std::uint64_t modulus;
};

inline FieldSpec field_size_for(std::uint64_t clients,
                                std::uint64_t trials_per_client) {
  if (clients < 1 || trials_per_client < 1) {
    throw config_error("field_size_for: need clients >= 1 and trials >= 1");
  }
  std::uint64_t product = 0;
  if (__builtin_mul_overflow(clients, trials_per_client, &product) ||
      product == std::numeric_limits<std::uint64_t>::max()) {
    throw config_error("field_size_for: n*m + 1 overflows 64-bit arithmetic");
  }
  return FieldSpec{product + 1};
}

struct MaskedContribution {
  std::uint64_t client_id;  // index in [0, n)
  std::uint64_t value;      // reduced modulo M
};

// One revealed group sum. `sum` equals the plaintext sum of the unmasked
// contributions modulo M once all masks cancel.
struct AggregateState {
  Group group;
  Moment moment;
  std::uint64_t sum;
  std::uint64_t count;
};

// n additive masks that sum to 0 mod M; each mask is marginally uniform on
// [0, M). A single client (n = 1) gets the zero mask.
inline std::vector<std::uint64_t> generate_masks(std::uint64_t n,
                                                 const FieldSpec& spec,
                                                 std::uint64_t seed) {
  if (spec.modulus < 2) throw config_error("generate_masks: modulus must be >= 2");
  if (n == 0) throw config_error("generate_masks: need at least one client");
  std::vector<std::uint64_t> masks(n, 0);
  if (n == 1) return masks;
  Rng rng(seed);
  std::uint64_t running = 0;
  for (std::uint64_t i = 0; i + 1 < n; ++i) {
    masks[i] = rng.below(spec.modulus);
    running = (running + masks[i]) % spec.modulus;
  }
  masks[n - 1] = (spec.modulus - running) % spec.modulus;
  return masks;
}

// Modular sum of exactly one contribution per client. Client ids must form a
// permutation of [0, contributions.size()).
inline AggregateState aggregate(std::span<const MaskedContribution> contributions,
                                const FieldSpec& spec, Group group,
                                Moment moment) {
  const std::uint64_t n = contributions.size();
  if (n == 0) throw protocol_error("aggregate: empty session");
  std::vector<bool> seen(n, false);
  std::uint64_t sum = 0;
  for (const MaskedContribution& c : contributions) {
    if (c.client_id >= n) {
      throw protocol_error("aggregate: client id " +
                           std::to_string(c.client_id) +
                           " outside session of size " + std::to_string(n));
    }
    if (seen[c.client_id]) {
      throw protocol_error("aggregate: duplicate contribution from client " +
                           std::to_string(c.client_id));
    }
    seen[c.client_id] = true;
    if (c.value >= spec.modulus) {
      throw protocol_error("aggregate: value not reduced modulo M");
    }
    sum = (sum + c.value) % spec.modulus;
  }
  return AggregateState{group, moment, sum, n};
}

}  // namespace dpate::secagg

#endif  // DPATE_FIELD_SECAGG_HPP_
