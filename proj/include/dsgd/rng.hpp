// Copyright 2026 The dsgd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DSGD_RNG_HPP_
#define DSGD_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace dsgd {

// Purpose labels for named substreams. Every random draw in the engine comes
// from a stream addressed by (root seed, run id, node id, purpose), so two
// protocols run under the same seed consume identical gradient-noise and
// sample sequences regardless of how many partner/clock draws they make.
enum class StreamPurpose : std::uint8_t {
  kGradientNoise,
  kSample,
  kPartnerChoice,
  kClock,
  kStraggler,
  kInit,
};

std::string_view to_string(StreamPurpose purpose);

// Node id used for run-level streams (the master Poisson clock) that do not
// belong to any node.
inline constexpr std::uint32_t kRunLevelNode = 0xffffffffu;

// Deterministic random stream. The engine is std::mt19937_64 (its output
// sequence is pinned by the standard), and all samplers are explicit
// formulas on raw 64-bit draws so the produced doubles are identical on any
// conforming platform. Stream identity is the (seed, run_id, node, purpose)
// tuple; see derive_stream_seed.
class RngStream {
 public:
  RngStream() : engine_(0) {}
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on the open interval (0, 1); never returns an endpoint, so
  // log(u) and log1p(-u) are always finite.
  double uniform01() {
    const std::uint64_t bits = next_u64() >> 11;  // top 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. Consumes exactly two raw draws.
  double normal() {
    const double u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with the given rate; strictly positive.
  double exponential(double rate);

  // Uniform integer in [0, n). n == 1 short-circuits without consuming a
  // draw (uniform choice over one element is not random); this is part of
  // the determinism contract for p = 1 degeneration runs.
  std::uint32_t uniform_index(std::uint32_t n);

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;
  std::mt19937_64 engine_;
};

// Collapses (root seed, run id, node, purpose) into a single engine seed by
// hashing the structural byte string root || run_id || 0 || purpose || 0 ||
// node. Stable across platforms and releases: traces freeze it.
std::uint64_t derive_stream_seed(std::uint64_t root_seed, std::string_view run_id,
                                 std::uint32_t node_id, StreamPurpose purpose);

RngStream make_stream(std::uint64_t root_seed, std::string_view run_id,
                      std::uint32_t node_id, StreamPurpose purpose);

}  // namespace dsgd

#endif  // DSGD_RNG_HPP_
