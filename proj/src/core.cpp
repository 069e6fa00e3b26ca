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

#include "dsgd/core.hpp"

#include <algorithm>
#include <stdexcept>

namespace dsgd {

std::string_view to_string(ProtocolKind kind) {
  switch (kind) {
    case ProtocolKind::kAllReduce:
      return "all-reduce";
    case ProtocolKind::kElasticAvg:
      return "elastic-avg";
    case ProtocolKind::kPullGossip:
      return "pull-gossip";
    case ProtocolKind::kPushGossip:
      return "push-gossip";
    case ProtocolKind::kGossipStale:
      return "gossip-stale";
    case ProtocolKind::kGossipFresh:
      return "gossip-fresh";
    case ProtocolKind::kAsyncPull:
      return "async-pull";
  }
  return "unknown";
}

std::optional<ProtocolKind> protocol_from_string(std::string_view name) {
  for (ProtocolKind k :
       {ProtocolKind::kAllReduce, ProtocolKind::kElasticAvg, ProtocolKind::kPullGossip,
        ProtocolKind::kPushGossip, ProtocolKind::kGossipStale, ProtocolKind::kGossipFresh,
        ProtocolKind::kAsyncPull}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::string_view to_string(MomentumScope scope) {
  return scope == MomentumScope::kAggregate ? "aggregate" : "per-node";
}

std::optional<MomentumScope> momentum_scope_from_string(std::string_view name) {
  if (name == "aggregate") return MomentumScope::kAggregate;
  if (name == "per-node") return MomentumScope::kPerNode;
  return std::nullopt;
}

void Hyperparams::validate() const {
  if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  if (!(anneal_factor > 0.0 && anneal_factor <= 1.0)) {
    throw std::invalid_argument("anneal_factor must be in (0, 1]");
  }
  if (!std::is_sorted(anneal_at.begin(), anneal_at.end())) {
    throw std::invalid_argument("anneal_at must be sorted ascending");
  }
  if (!(mu >= 0.0 && mu < 1.0)) throw std::invalid_argument("mu must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(beta_gossip > 0.0 && beta_gossip < 1.0)) {
    throw std::invalid_argument("beta_gossip must be in (0, 1)");
  }
  if (!(beta_ea > 0.0 && beta_ea < 1.0)) {
    throw std::invalid_argument("beta_ea must be in (0, 1)");
  }
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
}

double step_size_at(const Hyperparams& h, std::uint64_t t) {
  double alpha = h.alpha0;
  for (std::uint64_t milestone : h.anneal_at) {
    if (milestone <= t) {
      alpha *= h.anneal_factor;
    } else {
      break;
    }
  }
  return alpha;
}

ParamVec momentum_delta(const ParamVec& grad, const ParamVec& delta_prev,
                        double alpha, double mu) {
  if (grad.dim() != delta_prev.dim()) {
    throw std::invalid_argument("momentum_delta dimension mismatch");
  }
  ParamVec delta = ParamVec::zeros(grad.dim());
  for (std::size_t k = 0; k < grad.dim(); ++k) {
    delta[k] = mu * delta_prev[k] - alpha * grad[k];
  }
  return delta;
}

NodeRng make_node_rng(std::uint64_t root_seed, std::string_view run_id,
                      std::uint32_t node_id) {
  return NodeRng{
      make_stream(root_seed, run_id, node_id, StreamPurpose::kGradientNoise),
      make_stream(root_seed, run_id, node_id, StreamPurpose::kSample),
      make_stream(root_seed, run_id, node_id, StreamPurpose::kPartnerChoice),
      make_stream(root_seed, run_id, node_id, StreamPurpose::kStraggler),
  };
}

NodeState make_node(std::uint32_t id, ParamVec theta0, std::uint64_t root_seed,
                    std::string_view run_id) {
  NodeState node;
  node.id = id;
  node.delta_prev = ParamVec::zeros(theta0.dim());
  node.theta = std::move(theta0);
  node.t = 0;
  node.rng = make_node_rng(root_seed, run_id, id);
  return node;
}

}  // namespace dsgd
