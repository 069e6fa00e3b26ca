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

#include "dsgd/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace dsgd {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv1a_byte(std::uint64_t h, std::uint8_t b) {
  h ^= b;
  h *= kFnvPrime;
  return h;
}

std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h = fnv1a_byte(h, static_cast<std::uint8_t>(v >> (8 * i)));
  }
  return h;
}

// splitmix64 finalizer; spreads the FNV state over all 64 bits.
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

std::string_view to_string(StreamPurpose purpose) {
  switch (purpose) {
    case StreamPurpose::kGradientNoise:
      return "gradient-noise";
    case StreamPurpose::kSample:
      return "sample";
    case StreamPurpose::kPartnerChoice:
      return "partner-choice";
    case StreamPurpose::kClock:
      return "clock";
    case StreamPurpose::kStraggler:
      return "straggler";
    case StreamPurpose::kInit:
      return "init";
  }
  return "unknown";
}

double RngStream::exponential(double rate) {
  if (!(rate > 0.0)) {
    throw std::invalid_argument("exponential rate must be positive");
  }
  // uniform01 is strictly inside (0,1), so the gap is strictly positive.
  return -std::log(uniform01()) / rate;
}

std::uint32_t RngStream::uniform_index(std::uint32_t n) {
  if (n == 0) {
    throw std::invalid_argument("uniform_index over empty range");
  }
  if (n == 1) {
    return 0;
  }
  // Rejection on the top of the 64-bit range keeps the draw unbiased.
  const std::uint64_t span = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % span);
  std::uint64_t x = next_u64();
  while (x >= limit) {
    x = next_u64();
  }
  return static_cast<std::uint32_t>(x % span);
}

std::uint64_t derive_stream_seed(std::uint64_t root_seed, std::string_view run_id,
                                 std::uint32_t node_id, StreamPurpose purpose) {
  std::uint64_t h = kFnvOffset;
  h = fnv1a_u64(h, root_seed);
  for (char c : run_id) {
    h = fnv1a_byte(h, static_cast<std::uint8_t>(c));
  }
  h = fnv1a_byte(h, 0);
  for (char c : to_string(purpose)) {
    h = fnv1a_byte(h, static_cast<std::uint8_t>(c));
  }
  h = fnv1a_byte(h, 0);
  h = fnv1a_u64(h, node_id);
  return mix(h);
}

RngStream make_stream(std::uint64_t root_seed, std::string_view run_id,
                      std::uint32_t node_id, StreamPurpose purpose) {
  return RngStream(derive_stream_seed(root_seed, run_id, node_id, purpose));
}

}  // namespace dsgd
