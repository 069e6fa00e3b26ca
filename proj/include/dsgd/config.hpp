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

#ifndef DSGD_CONFIG_HPP_
#define DSGD_CONFIG_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dsgd/bounds.hpp"
#include "dsgd/simulator.hpp"

namespace dsgd {

// A config problem: unknown key, bad value, missing requirement. The CLI
// maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Backend { kSim, kTransport };

std::string_view to_string(Backend backend);

enum class ObjectiveKind { kQuadratic, kLogistic };

std::string_view to_string(ObjectiveKind kind);

// Full experiment description: the simulation config plus objective choice,
// backend, ensemble size, output selection and bound validation knobs.
struct RunConfig {
  SimConfig sim;
  Backend backend = Backend::kSim;
  std::uint32_t trials = 1;
  std::string output_dir = "out";
  bool emit_trace = true;
  bool emit_summary = true;
  bool emit_bound_report = false;

  ObjectiveKind objective = ObjectiveKind::kQuadratic;
  std::vector<double> spectrum = {1.0, 2.0, 5.0, 10.0};
  std::vector<double> optimum;  // empty means the origin
  std::string dataset;          // logistic: CSV path
  bool dataset_header = false;
  double dataset_l2 = 1e-4;
  bool shard = false;

  double sigma_sq = 0.0;  // total injected gradient-noise variance E||xi||^2

  std::vector<BoundKind> bounds;  // empty means infer from protocol
  LambdaVariant lambda_variant = LambdaVariant::kTheorem;
  double grad_bound_c = 0.0;  // 0 means estimate from observed gradients

  std::uint64_t timeout_ms = 30000;  // transport receive timeout
  std::uint64_t chaos_seed = 0;      // nonzero adds scheduling jitter

  bool operator==(const RunConfig&) const = default;
};

// Parses the flat key = value grammar (one pair per line, '#' comments,
// unknown keys are errors) and validates the result. Defaults follow the
// reference regime; beta_ea defaults to 0.8/p when not given explicitly.
RunConfig parse_config(const std::string& text);

// Canonical echo: every retained key, fixed order, shortest round-trip
// number form. parse_config(canonical_config_text(cfg)) == cfg.
std::string canonical_config_text(const RunConfig& cfg);

}  // namespace dsgd

#endif  // DSGD_CONFIG_HPP_
