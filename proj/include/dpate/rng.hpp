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

#ifndef DPATE_RNG_HPP_
#define DPATE_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

#include "dpate/errors.hpp"

namespace dpate {

// SplitMix64 step (Vigna). Used both as a stream-splitting hash and to
// expand seeds into generator state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic stream derivation: the seed for a sub-stream is obtained by
// folding each label into a SplitMix64 chain. All randomness in the library
// flows through this function, so a (base_seed, labels...) tuple fully
// determines a stream on every platform.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  std::uint64_t out = splitmix64(s);
  s = out ^ a;
  out = splitmix64(s);
  s = out ^ b;
  out = splitmix64(s);
  s = out ^ c;
  return splitmix64(s);
}

// Labels for per-trial sub-streams; values are part of the reproducibility
// contract and must not be reordered.
enum class StreamPurpose : std::uint64_t {
  kOutcomes = 1,
  kAssignment = 2,
  kEncodeMean = 3,
  kEncodeSecond = 4,
  kMasks = 5,
  kNoise = 6,
};

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial,
                                 StreamPurpose purpose,
                                 std::uint64_t extra = 0) {
  return derive_seed(base, trial, static_cast<std::uint64_t>(purpose), extra);
}

// xoshiro256++ (Blackman & Vigna), seeded via SplitMix64. Chosen over the
// standard-library engines so that every draw is bit-reproducible across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    for (auto& word : state_) word = splitmix64(seed);
    spare_valid_ = false;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0, 1); never returns an endpoint.
  double next_double() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform on [0, bound) by rejection; exact for any bound >= 1.
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw input_error("Rng::below: bound must be positive");
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; the second draw of each pair is cached.
  double normal() {
    if (spare_valid_) {
      spare_valid_ = false;
      return spare_;
    }
    const double u1 = next_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    spare_valid_ = true;
    return radius * std::cos(angle);
  }

  // Exact Binomial(trials, p) sample by inversion. Outcomes are enumerated
  // from the mode outward (mode, mode-1, mode+1, ...), which keeps the
  // expected number of pmf evaluations O(sqrt(trials * p * (1-p))) while
  // remaining an exact inversion of a fixed ordering of the pmf.
  int binomial(int trials, double p) {
    if (trials < 0 || !(p > 0.0) || !(p < 1.0)) {
      if (trials >= 0 && p == 0.0) return 0;
      if (trials >= 0 && p == 1.0) return trials;
      throw input_error("Rng::binomial: invalid trials or p");
    }
    if (trials == 0) return 0;

    const double u = next_double();
    const int mode = mode_of(trials, p);
    double pmf_mode = std::exp(log_binomial_pmf(trials, p, mode));

    double cum = pmf_mode;
    if (u <= cum) return mode;

    int lo = mode;
    int hi = mode;
    double pmf_lo = pmf_mode;
    double pmf_hi = pmf_mode;
    const double odds = p / (1.0 - p);
    int last = mode;
    while (lo > 0 || hi < trials) {
      if (lo > 0) {
        // pmf(k-1) = pmf(k) * k * (1-p) / ((trials-k+1) * p)
        pmf_lo *= static_cast<double>(lo) /
                  (static_cast<double>(trials - lo + 1) * odds);
        --lo;
        cum += pmf_lo;
        last = lo;
        if (u <= cum) return lo;
      }
      if (hi < trials) {
        // pmf(k+1) = pmf(k) * (trials-k) * p / ((k+1) * (1-p))
        pmf_hi *= static_cast<double>(trials - hi) * odds /
                  static_cast<double>(hi + 1);
        ++hi;
        cum += pmf_hi;
        last = hi;
        if (u <= cum) return hi;
      }
    }
    // u fell into the O(1e-16) rounding residue of the total mass.
    return last;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static int mode_of(int trials, double p) {
    int mode = static_cast<int>(std::floor((trials + 1) * p));
    if (mode > trials) mode = trials;
    if (mode < 0) mode = 0;
    return mode;
  }

  static double log_binomial_pmf(int trials, double p, int k) {
    return std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) -
           std::lgamma(trials - k + 1.0) + k * std::log(p) +
           (trials - k) * std::log1p(-p);
  }

  std::uint64_t state_[4];
  double spare_ = 0.0;
  bool spare_valid_ = false;
};

}  // namespace dpate

#endif  // DPATE_RNG_HPP_
