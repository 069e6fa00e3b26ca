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

#ifndef DSGD_PROTOCOLS_HPP_
#define DSGD_PROTOCOLS_HPP_

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dsgd/core.hpp"
#include "dsgd/objectives.hpp"

namespace dsgd {

// Center parameter held by the elastic-averaging server. Updates are applied
// serially in arrival order; applied_updates counts them.
struct ServerState {
  ParamVec theta_center;
  std::uint64_t applied_updates = 0;
};

// One local SGD iteration:
//   alpha  = step_size_at(h, t)
//   g      = minibatch gradient at the lookahead point theta + mu*delta_prev
//            (+ weight_decay * lookahead, + additive noise draw)
//   delta  = mu*delta_prev - alpha*g
//   theta += delta, t += 1
// Gradient noise comes from node.rng.noise, minibatch rows from
// node.rng.sample. With mu = 0 the lookahead collapses to theta and the step
// is plain SGD. If grad_norm_out is non-null it is raised to the norm of the
// pre-noise model gradient (used for the constant-C estimate in bounds).
NodeState local_sgd_step(NodeState node, const Objective& obj, const NoiseModel& noise,
                         const Hyperparams& h, double* grad_norm_out = nullptr);

// The delta of one local SGD iteration, without applying it: consumes the
// node's sample and noise streams and reads delta_prev, but leaves theta and
// t untouched. local_sgd_step and the all-reduce paths (simulated and
// threaded) are all built on this, so their per-node arithmetic is identical.
ParamVec compute_local_delta(NodeState& node, const Objective& obj,
                             const NoiseModel& noise, const Hyperparams& h,
                             double* grad_norm_out = nullptr);

// Synchronous all-reduce round. All nodes must share the same t. Each node
// forms its momentum delta; the deltas are averaged across nodes; every node
// applies the averaged delta. With scope = kAggregate the averaged delta also
// becomes every node's delta_prev (single shared momentum recursion); with
// kPerNode each node keeps its own delta.
std::vector<NodeState> allreduce_round(std::vector<NodeState> nodes, const Objective& obj,
                                       const NoiseModel& noise, const Hyperparams& h,
                                       MomentumScope scope = MomentumScope::kAggregate,
                                       double* grad_norm_out = nullptr);

// Variant with one objective per node (sharded data). objs.size() must equal
// the node count.
std::vector<NodeState> allreduce_round(std::vector<NodeState> nodes,
                                       std::span<const Objective* const> objs,
                                       const NoiseModel& noise, const Hyperparams& h,
                                       MomentumScope scope = MomentumScope::kAggregate,
                                       double* grad_norm_out = nullptr);

// Elastic-averaging client step against a snapshot of the server center:
//   update = beta_ea * (theta - center); theta -= update; then local SGD.
// Returns the new node state and the update to send to the server.
std::pair<NodeState, ParamVec> ea_client_step(NodeState node, const ParamVec& center,
                                              const Objective& obj, const NoiseModel& noise,
                                              const Hyperparams& h,
                                              double* grad_norm_out = nullptr);

// Applies one client update to the server center.
ServerState ea_server_apply(ServerState server, const ParamVec& update);

// Simultaneous pull mixing: theta_i <- (x_i + x_{partner_of[i]}) / 2 against
// a common snapshot x of the inputs. partner_of[i] == i is allowed and leaves
// node i exactly unchanged.
std::vector<NodeState> pull_mix(std::vector<NodeState> nodes,
                                std::span<const std::uint32_t> partner_of);

// Pull-gossip round: pull_mix, then a local SGD step on every node (the
// gradient is evaluated at the mixed parameter).
std::vector<NodeState> pull_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> partner_of,
                                         const Objective& obj, const NoiseModel& noise,
                                         const Hyperparams& h,
                                         double* grad_norm_out = nullptr);

std::vector<NodeState> pull_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> partner_of,
                                         std::span<const Objective* const> objs,
                                         const NoiseModel& noise, const Hyperparams& h,
                                         double* grad_norm_out = nullptr);

// Simultaneous push mixing: node i receives its own x_i plus x_k from every
// k with target_of[k] == i and replaces theta_i by the average of the
// received set. target_of[k] == k is rejected (push targets exclude self).
std::vector<NodeState> push_mix(std::vector<NodeState> nodes,
                                std::span<const std::uint32_t> target_of);

// Push-gossip round: push_mix, then a local SGD step on every node.
std::vector<NodeState> push_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> target_of,
                                         const Objective& obj, const NoiseModel& noise,
                                         const Hyperparams& h,
                                         double* grad_norm_out = nullptr);

std::vector<NodeState> push_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> target_of,
                                         std::span<const Objective* const> objs,
                                         const NoiseModel& noise, const Hyperparams& h,
                                         double* grad_norm_out = nullptr);

// Stale-gradient gossip: the gradient is evaluated at the pre-mix theta,
//   theta <- [theta_i + beta*(theta_j - theta_i)] + (mu*delta_prev - alpha*g(theta_i)).
NodeState gossip_stale_step(NodeState node, const ParamVec& partner_theta,
                            const Objective& obj, const NoiseModel& noise,
                            const Hyperparams& h, double* grad_norm_out = nullptr);

// Fresh-gradient gossip: the node first takes its own SGD step producing
// theta', then mixes with the partner's post-step theta':
//   theta <- theta'_i + beta*(theta'_j - theta'_i).
// partner_theta_fresh must already be the partner's post-step value.
NodeState gossip_fresh_step(NodeState node, const ParamVec& partner_theta_fresh,
                            const Objective& obj, const NoiseModel& noise,
                            const Hyperparams& h, double* grad_norm_out = nullptr);

// Mixes an already-stepped state with the partner's already-stepped theta.
// gossip_fresh_step == gossip_fresh_mix(local_sgd_step(node), partner').
NodeState gossip_fresh_mix(NodeState stepped, const ParamVec& partner_theta_fresh,
                           double beta);

// Asynchronous pull event: node i ticks, takes a plain (momentum-free) SGD
// step, and averages with node j's current parameter:
//   y       = theta_i - alpha * g(theta_i)
//   theta_i = y + beta * (theta_j - y)     [= (1-beta)*y + beta*theta_j]
// Only node i changes; j == i degenerates to a (1-beta)-scaled gradient step.
// alpha uses node i's local t.
std::vector<NodeState> async_pull_event(std::vector<NodeState> nodes, std::uint32_t i,
                                        std::uint32_t j, const Objective& obj,
                                        const NoiseModel& noise, const Hyperparams& h,
                                        double* grad_norm_out = nullptr);

}  // namespace dsgd

#endif  // DSGD_PROTOCOLS_HPP_
