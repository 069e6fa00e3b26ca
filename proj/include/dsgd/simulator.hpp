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

#ifndef DSGD_SIMULATOR_HPP_
#define DSGD_SIMULATOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsgd/core.hpp"
#include "dsgd/objectives.hpp"
#include "dsgd/protocols.hpp"

namespace dsgd {

// Virtual-time model. Lockstep drives synchronous rounds; poisson gives each
// node an independent rate-`rate_per_node` exponential clock, equivalently a
// master clock of rate p whose ticks pick a uniform node.
struct ClockModel {
  enum class Kind { kLockstep, kPoisson };
  Kind kind = Kind::kLockstep;
  double rate_per_node = 1.0;

  bool operator==(const ClockModel&) const = default;
};

// Per-round compute-time model.
struct StragglerModel {
  enum class Kind { kConstant, kLogNormal, kConstantWithOutlier };
  Kind kind = Kind::kConstant;
  double constant = 1.0;     // kConstant / kConstantWithOutlier base duration
  double log_mean = 0.0;     // kLogNormal: mean of log duration
  double log_sigma = 0.25;   // kLogNormal: stddev of log duration
  double slow_factor = 1.0;  // kConstantWithOutlier: multiplier for slow node
  std::uint32_t slow_node = 0;

  bool operator==(const StragglerModel&) const = default;
};

// Initial parameter placement.
struct InitSpec {
  enum class Kind {
    kZeros,           // every node at the origin
    kOffsetOnes,      // every node at optimum + c*1 with p*dim*c^2 = target_sq_err
    kGaussianSpread,  // node-specific N(center, scale^2 I) draws from the init stream
    kExplicit,        // every node at the given vector
  };
  Kind kind = Kind::kOffsetOnes;
  double target_sq_err = 8.0;  // kOffsetOnes: exact initial sum ||theta_i - theta*||^2
  double scale = 1.0;          // kGaussianSpread
  std::vector<double> values;  // kExplicit

  bool operator==(const InitSpec&) const = default;
};

struct SimConfig {
  ProtocolKind protocol = ProtocolKind::kAllReduce;
  std::uint32_t p = 8;
  Hyperparams hyper;
  NoiseModel noise;
  ClockModel clock;
  StragglerModel straggler;
  InitSpec init;
  MomentumScope momentum_scope = MomentumScope::kPerNode;
  std::uint64_t rounds = 1000;        // sync horizon
  std::uint64_t events = 10000;       // async horizon
  std::optional<double> max_sim_time; // optional early stop on virtual time
  std::uint64_t trace_every = 10;
  double exchange_latency = 0.0;      // added to gated gossip rounds
  std::uint64_t seed = 1;
  std::string run_id = "run";

  bool operator==(const SimConfig&) const = default;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  std::vector<NodeState> final_nodes;
  std::optional<ServerState> final_server;  // elastic-avg only
  std::vector<double> node_time;            // per-node virtual clock at finish
  double sim_time = 0.0;                    // system virtual time (max node clock)
  double max_grad_norm = 0.0;               // max model-gradient norm observed
};

// Next master-clock event under the poisson model: gap ~ Exp(p * rate) and a
// uniformly chosen ticking node. Throws for lockstep clocks.
std::pair<double, std::uint32_t> sample_next_event(const ClockModel& clock,
                                                   std::uint32_t p, RngStream& rng);

// Draws one round's compute duration for a node. Always positive.
double apply_straggler(const StragglerModel& model, std::uint32_t node_id,
                       RngStream& rng);

std::vector<NodeState> make_initial_nodes(const SimConfig& cfg, const Objective& obj);

// Cross-node aggregate record at iteration t, shared by both backends.
// Throws if any parameter is non-finite (divergence fails fast).
TraceRecord make_trace_record(const SimConfig& cfg, const Objective& obj,
                              std::span<const ParamVec> thetas, std::uint64_t t,
                              std::optional<double> sim_time, double alpha);

// Synchronous driver: all-reduce, elastic-avg (serial client sweeps),
// pull/push gossip, gossip-stale, gossip-fresh. Gossip exchanges are gated on
// t > 0 and t % tau == 0. Single-threaded and deterministic: identical
// configs produce identical traces, byte for byte.
RunResult run_sync(const SimConfig& cfg, const Objective& obj);

// Asynchronous driver under the poisson clock: async-pull events or
// elastic-avg client ticks (the server applies updates instantly, serially).
RunResult run_async(const SimConfig& cfg, const Objective& obj);

// Dispatches on protocol/clock: poisson async-pull and poisson elastic-avg
// run async; everything else runs sync.
RunResult run_simulation(const SimConfig& cfg, const Objective& obj);

// Sharded variants: node i trains on *node_objs[i] while eval_obj (usually
// the full dataset) drives initialization and trace evaluation. All
// objectives must share eval_obj's dimension; node_objs.size() must equal
// cfg.p. No convergence claim is attached to sharded runs.
RunResult run_sync(const SimConfig& cfg, const Objective& eval_obj,
                   std::span<const Objective* const> node_objs);
RunResult run_async(const SimConfig& cfg, const Objective& eval_obj,
                    std::span<const Objective* const> node_objs);
RunResult run_simulation(const SimConfig& cfg, const Objective& eval_obj,
                         std::span<const Objective* const> node_objs);

}  // namespace dsgd

#endif  // DSGD_SIMULATOR_HPP_
