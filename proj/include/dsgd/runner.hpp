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

#ifndef DSGD_RUNNER_HPP_
#define DSGD_RUNNER_HPP_

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "dsgd/bounds.hpp"
#include "dsgd/config.hpp"
#include "dsgd/objectives.hpp"

namespace dsgd {

// Objective instances for one experiment: the evaluation objective (full
// data) plus per-node shards when cfg.shard is set.
struct BuiltObjective {
  std::unique_ptr<Objective> eval;
  std::vector<std::unique_ptr<Objective>> shards;  // size p when sharded, else empty
};

BuiltObjective build_objective(const RunConfig& cfg);

struct ExperimentOutcome {
  int exit_code = 0;  // 0 ok, 1 a requested bound validation failed
  std::vector<ValidationReport> reports;
  std::string output_dir;          // resolved directory (env override applied)
  std::vector<std::string> files;  // files written, in emission order
  double wall_seconds = 0.0;
};

// Runs the configured ensemble, writes the selected outputs into the output
// directory (DSGD_OUTPUT_DIR overrides cfg.output_dir), and validates the
// requested bounds. Trial k runs under run_id "<run_id>/trial<k>", so trials
// are independent deterministic instances reproducible in isolation.
ExperimentOutcome run_experiment(const RunConfig& cfg, std::ostream& log);

// Closed-form vs enumerated mixing moments plus both contraction factors,
// as printable text. Pull enumeration appears for p <= 5 only; p <= 8.
std::string mixing_diagnostics_text(std::uint32_t p, double beta);

}  // namespace dsgd

#endif  // DSGD_RUNNER_HPP_
