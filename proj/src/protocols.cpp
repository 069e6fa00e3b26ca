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

#include "dsgd/protocols.hpp"

#include <algorithm>
#include <stdexcept>

namespace dsgd {

namespace {

// Model gradient at the evaluation point: minibatch gradient plus weight
// decay, before additive noise. Reports its norm for the bound-side C
// estimate.
ParamVec model_gradient(const ParamVec& eval_point, const Objective& obj,
                        const Hyperparams& h, RngStream& sample_rng,
                        double* grad_norm_out) {
  ParamVec g = obj.stochastic_gradient(eval_point, h.batch, sample_rng);
  if (h.weight_decay > 0.0) {
    g.axpy(h.weight_decay, eval_point);
  }
  if (grad_norm_out != nullptr) {
    *grad_norm_out = std::max(*grad_norm_out, g.norm());
  }
  return g;
}

// theta_i + beta * (theta_j - theta_i), computed in centered form so that
// theta_j == theta_i (and beta == 0) leave theta_i bit-exactly unchanged.
ParamVec mix_toward(const ParamVec& own, const ParamVec& other, double beta) {
  if (own.dim() != other.dim()) {
    throw std::invalid_argument("mixing dimension mismatch");
  }
  ParamVec out = own;
  for (std::size_t k = 0; k < out.dim(); ++k) {
    out[k] += beta * (other[k] - own[k]);
  }
  return out;
}

void check_common_round(const std::vector<NodeState>& nodes) {
  for (const NodeState& n : nodes) {
    if (n.t != nodes[0].t) {
      throw std::invalid_argument("synchronous round requires equal node clocks");
    }
  }
}

void check_partners(std::size_t p, std::span<const std::uint32_t> partner_of) {
  if (partner_of.size() != p) {
    throw std::invalid_argument("partner map size must equal node count");
  }
  for (std::uint32_t j : partner_of) {
    if (j >= p) throw std::invalid_argument("partner index out of range");
  }
}

void check_objectives(std::size_t p, std::span<const Objective* const> objs) {
  if (objs.size() != p) {
    throw std::invalid_argument("objective list size must equal node count");
  }
  for (const Objective* obj : objs) {
    if (obj == nullptr) throw std::invalid_argument("null objective");
  }
}

std::vector<const Objective*> replicate(const Objective& obj, std::size_t p) {
  return std::vector<const Objective*>(p, &obj);
}

}  // namespace

ParamVec compute_local_delta(NodeState& node, const Objective& obj,
                             const NoiseModel& noise, const Hyperparams& h,
                             double* grad_norm_out) {
  const double alpha = step_size_at(h, node.t);
  ParamVec g;
  if (h.mu != 0.0) {
    // Nesterov lookahead: the gradient is taken at theta + mu*delta_prev.
    ParamVec lookahead = node.theta;
    lookahead.axpy(h.mu, node.delta_prev);
    g = model_gradient(lookahead, obj, h, node.rng.sample, grad_norm_out);
  } else {
    g = model_gradient(node.theta, obj, h, node.rng.sample, grad_norm_out);
  }
  g += noise.sample(node.rng.noise);
  return momentum_delta(g, node.delta_prev, alpha, h.mu);
}

NodeState local_sgd_step(NodeState node, const Objective& obj, const NoiseModel& noise,
                         const Hyperparams& h, double* grad_norm_out) {
  node.delta_prev = compute_local_delta(node, obj, noise, h, grad_norm_out);
  node.theta += node.delta_prev;
  node.t += 1;
  return node;
}

std::vector<NodeState> allreduce_round(std::vector<NodeState> nodes,
                                       std::span<const Objective* const> objs,
                                       const NoiseModel& noise, const Hyperparams& h,
                                       MomentumScope scope, double* grad_norm_out) {
  if (nodes.empty()) throw std::invalid_argument("allreduce_round on empty node set");
  check_common_round(nodes);
  check_objectives(nodes.size(), objs);

  std::vector<ParamVec> deltas;
  deltas.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deltas.push_back(compute_local_delta(nodes[i], *objs[i], noise, h, grad_norm_out));
  }

  const ParamVec avg = spatial_mean(deltas);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].theta += avg;
    nodes[i].delta_prev = scope == MomentumScope::kAggregate ? avg : deltas[i];
    nodes[i].t += 1;
  }
  return nodes;
}

std::vector<NodeState> allreduce_round(std::vector<NodeState> nodes, const Objective& obj,
                                       const NoiseModel& noise, const Hyperparams& h,
                                       MomentumScope scope, double* grad_norm_out) {
  const auto objs = replicate(obj, nodes.size());
  return allreduce_round(std::move(nodes), objs, noise, h, scope, grad_norm_out);
}

std::pair<NodeState, ParamVec> ea_client_step(NodeState node, const ParamVec& center,
                                              const Objective& obj, const NoiseModel& noise,
                                              const Hyperparams& h, double* grad_norm_out) {
  if (center.dim() != node.theta.dim()) {
    throw std::invalid_argument("ea_client_step center dimension mismatch");
  }
  ParamVec update = ParamVec::zeros(node.theta.dim());
  for (std::size_t k = 0; k < update.dim(); ++k) {
    update[k] = h.beta_ea * (node.theta[k] - center[k]);
  }
  node.theta -= update;
  node = local_sgd_step(std::move(node), obj, noise, h, grad_norm_out);
  return {std::move(node), std::move(update)};
}

ServerState ea_server_apply(ServerState server, const ParamVec& update) {
  server.theta_center += update;
  server.applied_updates += 1;
  return server;
}

std::vector<NodeState> pull_mix(std::vector<NodeState> nodes,
                                std::span<const std::uint32_t> partner_of) {
  check_partners(nodes.size(), partner_of);
  std::vector<ParamVec> snapshot;
  snapshot.reserve(nodes.size());
  for (const NodeState& n : nodes) snapshot.push_back(n.theta);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].theta = mix_toward(snapshot[i], snapshot[partner_of[i]], 0.5);
  }
  return nodes;
}

std::vector<NodeState> pull_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> partner_of,
                                         std::span<const Objective* const> objs,
                                         const NoiseModel& noise, const Hyperparams& h,
                                         double* grad_norm_out) {
  check_common_round(nodes);
  check_objectives(nodes.size(), objs);
  nodes = pull_mix(std::move(nodes), partner_of);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i] = local_sgd_step(std::move(nodes[i]), *objs[i], noise, h, grad_norm_out);
  }
  return nodes;
}

std::vector<NodeState> pull_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> partner_of,
                                         const Objective& obj, const NoiseModel& noise,
                                         const Hyperparams& h, double* grad_norm_out) {
  const auto objs = replicate(obj, nodes.size());
  return pull_gossip_round(std::move(nodes), partner_of, objs, noise, h, grad_norm_out);
}

std::vector<NodeState> push_mix(std::vector<NodeState> nodes,
                                std::span<const std::uint32_t> target_of) {
  check_partners(nodes.size(), target_of);
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    if (target_of[k] == k) {
      throw std::invalid_argument("push target must differ from sender");
    }
  }
  std::vector<ParamVec> snapshot;
  snapshot.reserve(nodes.size());
  for (const NodeState& n : nodes) snapshot.push_back(n.theta);

  for (std::size_t i = 0; i < nodes.size(); ++i) {
    // Received set: own snapshot plus every snapshot pushed at i, averaged in
    // centered form around the own value so a singleton set is an identity.
    ParamVec acc = ParamVec::zeros(snapshot[i].dim());
    std::size_t count = 1;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      if (target_of[k] == i) {
        for (std::size_t c = 0; c < acc.dim(); ++c) {
          acc[c] += snapshot[k][c] - snapshot[i][c];
        }
        ++count;
      }
    }
    ParamVec mixed = snapshot[i];
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t c = 0; c < mixed.dim(); ++c) {
      mixed[c] += acc[c] * inv;
    }
    nodes[i].theta = std::move(mixed);
  }
  return nodes;
}

std::vector<NodeState> push_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> target_of,
                                         std::span<const Objective* const> objs,
                                         const NoiseModel& noise, const Hyperparams& h,
                                         double* grad_norm_out) {
  check_common_round(nodes);
  check_objectives(nodes.size(), objs);
  nodes = push_mix(std::move(nodes), target_of);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i] = local_sgd_step(std::move(nodes[i]), *objs[i], noise, h, grad_norm_out);
  }
  return nodes;
}

std::vector<NodeState> push_gossip_round(std::vector<NodeState> nodes,
                                         std::span<const std::uint32_t> target_of,
                                         const Objective& obj, const NoiseModel& noise,
                                         const Hyperparams& h, double* grad_norm_out) {
  const auto objs = replicate(obj, nodes.size());
  return push_gossip_round(std::move(nodes), target_of, objs, noise, h, grad_norm_out);
}

NodeState gossip_stale_step(NodeState node, const ParamVec& partner_theta,
                            const Objective& obj, const NoiseModel& noise,
                            const Hyperparams& h, double* grad_norm_out) {
  // The delta uses the pre-mix theta (stale gradient); the mix uses the
  // pre-step thetas. Both then combine.
  const ParamVec delta = compute_local_delta(node, obj, noise, h, grad_norm_out);
  node.delta_prev = delta;
  node.theta = mix_toward(node.theta, partner_theta, h.beta_gossip);
  node.theta += delta;
  node.t += 1;
  return node;
}

NodeState gossip_fresh_mix(NodeState stepped, const ParamVec& partner_theta_fresh,
                           double beta) {
  stepped.theta = mix_toward(stepped.theta, partner_theta_fresh, beta);
  return stepped;
}

NodeState gossip_fresh_step(NodeState node, const ParamVec& partner_theta_fresh,
                            const Objective& obj, const NoiseModel& noise,
                            const Hyperparams& h, double* grad_norm_out) {
  node = local_sgd_step(std::move(node), obj, noise, h, grad_norm_out);
  return gossip_fresh_mix(std::move(node), partner_theta_fresh, h.beta_gossip);
}

std::vector<NodeState> async_pull_event(std::vector<NodeState> nodes, std::uint32_t i,
                                        std::uint32_t j, const Objective& obj,
                                        const NoiseModel& noise, const Hyperparams& h,
                                        double* grad_norm_out) {
  if (i >= nodes.size() || j >= nodes.size()) {
    throw std::invalid_argument("async_pull_event node index out of range");
  }
  NodeState& node = nodes[i];
  const double alpha = step_size_at(h, node.t);
  ParamVec g = model_gradient(node.theta, obj, h, node.rng.sample, grad_norm_out);
  g += noise.sample(node.rng.noise);

  // Pulled value: node j's current theta (the own pre-step theta when j == i).
  const ParamVec pulled = nodes[j].theta;
  ParamVec y = node.theta;
  y.axpy(-alpha, g);
  node.theta = mix_toward(y, pulled, h.beta_gossip);
  node.t += 1;
  return nodes;
}

}  // namespace dsgd
