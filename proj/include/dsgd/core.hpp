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

#ifndef DSGD_CORE_HPP_
#define DSGD_CORE_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dsgd/param_vec.hpp"
#include "dsgd/rng.hpp"

namespace dsgd {

// The seven protocol variants the engine implements. Serialized names are
// lower-kebab-case (see to_string / protocol_from_string).
enum class ProtocolKind {
  kAllReduce,
  kElasticAvg,
  kPullGossip,
  kPushGossip,
  kGossipStale,
  kGossipFresh,
  kAsyncPull,
};

std::string_view to_string(ProtocolKind kind);
std::optional<ProtocolKind> protocol_from_string(std::string_view name);

// Whose momentum memory an all-reduce round writes back: the aggregate
// (averaged) delta or each node's own local delta.
enum class MomentumScope { kAggregate, kPerNode };

std::string_view to_string(MomentumScope scope);
std::optional<MomentumScope> momentum_scope_from_string(std::string_view name);

// Optimization hyperparameters. Defaults reproduce the reference training
// regime: step 0.1 annealed by 10x at 150k and 300k iterations, Nesterov
// momentum 0.9, weight decay 1e-4, exchange period tau = 1.
struct Hyperparams {
  double alpha0 = 0.1;
  double anneal_factor = 0.1;
  std::vector<std::uint64_t> anneal_at = {150000, 300000};
  double mu = 0.9;
  double weight_decay = 1e-4;
  double beta_gossip = 0.5;  // mixing weight for gossip-stale / gossip-fresh / async-pull
  double beta_ea = 0.1;      // elastic coupling; 0.8 / p in the reference regime
  std::uint32_t tau = 1;     // communication period, in local iterations
  std::uint32_t batch = 1;   // minibatch size b

  // Throws std::invalid_argument when a field is outside its domain.
  void validate() const;

  bool operator==(const Hyperparams&) const = default;
};

// Step size at iteration t: alpha0 * anneal_factor^k where k counts anneal
// milestones with milestone <= t. anneal_at must be sorted ascending.
double step_size_at(const Hyperparams& h, std::uint64_t t);

// Heavy-ball recursion: delta = -alpha * grad + mu * delta_prev.
ParamVec momentum_delta(const ParamVec& grad, const ParamVec& delta_prev,
                        double alpha, double mu);

// Per-node RNG bundle. Streams are derived, not stored state, so a test
// oracle can rebuild the identical streams from (seed, run_id, node).
struct NodeRng {
  RngStream noise;
  RngStream sample;
  RngStream partner;
  RngStream straggler;
};

NodeRng make_node_rng(std::uint64_t root_seed, std::string_view run_id,
                      std::uint32_t node_id);

// Full per-node optimizer state.
struct NodeState {
  std::uint32_t id = 0;
  ParamVec theta;
  ParamVec delta_prev;
  std::uint64_t t = 0;  // local iteration count
  NodeRng rng;
};

NodeState make_node(std::uint32_t id, ParamVec theta0, std::uint64_t root_seed,
                    std::string_view run_id);

// One logged point of a run. sq_err_opt is absent when the objective's
// optimum is unknown; sim_time is absent outside simulated-clock runs.
struct TraceRecord {
  std::string run_id;
  ProtocolKind protocol = ProtocolKind::kAllReduce;
  std::uint64_t t = 0;
  std::optional<double> sim_time;
  std::optional<double> sq_err_opt;   // sum_i ||theta_i - theta*||^2
  double sq_err_consensus = 0.0;      // sum_i ||theta_i - mean_j theta_j||^2
  double loss_mean = 0.0;             // (1/p) sum_i f(theta_i)
  double alpha = 0.0;

  bool operator==(const TraceRecord&) const = default;
};

}  // namespace dsgd

#endif  // DSGD_CORE_HPP_
