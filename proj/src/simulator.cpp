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

#include "dsgd/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dsgd {

namespace {

bool is_gated(std::uint64_t t, std::uint32_t tau) { return t > 0 && t % tau == 0; }

TraceRecord make_record(const SimConfig& cfg, const Objective& obj,
                        const std::vector<NodeState>& nodes, std::uint64_t t,
                        std::optional<double> sim_time, double alpha) {
  std::vector<ParamVec> thetas;
  thetas.reserve(nodes.size());
  for (const NodeState& n : nodes) thetas.push_back(n.theta);
  return make_trace_record(cfg, obj, thetas, t, sim_time, alpha);
}

void check_noise_dim(const SimConfig& cfg, const Objective& obj) {
  if (cfg.noise.dim != obj.dim()) {
    throw std::invalid_argument("noise dimension must match objective dimension");
  }
  if (cfg.p == 0) throw std::invalid_argument("p must be >= 1");
}

void check_node_objs(const SimConfig& cfg, const Objective& eval_obj,
                     std::span<const Objective* const> node_objs) {
  if (node_objs.size() != cfg.p) {
    throw std::invalid_argument("node objective list size must equal p");
  }
  for (const Objective* o : node_objs) {
    if (o == nullptr) throw std::invalid_argument("null node objective");
    if (o->dim() != eval_obj.dim()) {
      throw std::invalid_argument("node objective dimension mismatch");
    }
  }
}

std::vector<const Objective*> replicate(const Objective& obj, std::size_t p) {
  return std::vector<const Objective*>(p, &obj);
}

// Server center starts at the spatial mean of the initial parameters, which
// is the common starting point when all nodes share one.
ServerState make_server(const std::vector<NodeState>& nodes) {
  std::vector<ParamVec> thetas;
  thetas.reserve(nodes.size());
  for (const NodeState& n : nodes) thetas.push_back(n.theta);
  return ServerState{spatial_mean(thetas), 0};
}

std::vector<std::uint32_t> draw_pull_partners(std::vector<NodeState>& nodes) {
  std::vector<std::uint32_t> partners(nodes.size());
  const auto p = static_cast<std::uint32_t>(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    partners[i] = nodes[i].rng.partner.uniform_index(p);
  }
  return partners;
}

// Push targets exclude self: draw over p-1 and skip the own index.
std::vector<std::uint32_t> draw_push_targets(std::vector<NodeState>& nodes) {
  std::vector<std::uint32_t> targets(nodes.size());
  const auto p = static_cast<std::uint32_t>(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::uint32_t j = nodes[i].rng.partner.uniform_index(p - 1);
    if (j >= i) ++j;
    targets[i] = j;
  }
  return targets;
}

}  // namespace

TraceRecord make_trace_record(const SimConfig& cfg, const Objective& obj,
                              std::span<const ParamVec> thetas, std::uint64_t t,
                              std::optional<double> sim_time, double alpha) {
  TraceRecord rec;
  rec.run_id = cfg.run_id;
  rec.protocol = cfg.protocol;
  rec.t = t;
  rec.sim_time = sim_time;
  rec.alpha = alpha;

  for (const ParamVec& th : thetas) {
    if (!th.all_finite()) {
      throw std::runtime_error("non-finite parameter encountered at t=" + std::to_string(t));
    }
  }
  const ParamVec mean = spatial_mean(thetas);
  double consensus = 0.0;
  double loss = 0.0;
  for (const ParamVec& th : thetas) {
    consensus += squared_distance(th, mean);
    loss += obj.value(th);
  }
  rec.sq_err_consensus = consensus;
  rec.loss_mean = loss / static_cast<double>(thetas.size());

  if (const auto opt = obj.optimum(); opt.has_value()) {
    double err = 0.0;
    for (const ParamVec& th : thetas) err += squared_distance(th, *opt);
    rec.sq_err_opt = err;
  }
  return rec;
}

std::pair<double, std::uint32_t> sample_next_event(const ClockModel& clock,
                                                   std::uint32_t p, RngStream& rng) {
  if (clock.kind != ClockModel::Kind::kPoisson) {
    throw std::invalid_argument("sample_next_event requires a poisson clock");
  }
  if (p == 0) throw std::invalid_argument("p must be >= 1");
  if (!(clock.rate_per_node > 0.0)) {
    throw std::invalid_argument("rate_per_node must be positive");
  }
  // Superposition of p rate-r clocks: master gaps are Exp(p*r) and the
  // ticking node is uniform. Gap first, node second; oracles rely on the
  // draw order.
  const double gap = rng.exponential(static_cast<double>(p) * clock.rate_per_node);
  const std::uint32_t node = rng.uniform_index(p);
  return {gap, node};
}

double apply_straggler(const StragglerModel& model, std::uint32_t node_id,
                       RngStream& rng) {
  switch (model.kind) {
    case StragglerModel::Kind::kConstant:
      if (!(model.constant > 0.0)) {
        throw std::invalid_argument("straggler constant must be positive");
      }
      return model.constant;
    case StragglerModel::Kind::kLogNormal:
      return std::exp(model.log_mean + model.log_sigma * rng.normal());
    case StragglerModel::Kind::kConstantWithOutlier:
      if (!(model.constant > 0.0) || !(model.slow_factor >= 1.0)) {
        throw std::invalid_argument("outlier straggler needs constant > 0, slow_factor >= 1");
      }
      return node_id == model.slow_node ? model.constant * model.slow_factor
                                        : model.constant;
  }
  throw std::invalid_argument("unknown straggler model");
}

std::vector<NodeState> make_initial_nodes(const SimConfig& cfg, const Objective& obj) {
  const std::size_t d = obj.dim();
  const auto opt = obj.optimum();

  ParamVec base;
  switch (cfg.init.kind) {
    case InitSpec::Kind::kZeros:
      base = ParamVec::zeros(d);
      break;
    case InitSpec::Kind::kOffsetOnes: {
      if (!opt.has_value()) {
        throw std::invalid_argument("offset-ones init requires an objective with a known optimum");
      }
      if (!(cfg.init.target_sq_err > 0.0)) {
        throw std::invalid_argument("init target_sq_err must be positive");
      }
      const double c = std::sqrt(cfg.init.target_sq_err /
                                 (static_cast<double>(cfg.p) * static_cast<double>(d)));
      base = *opt;
      for (std::size_t k = 0; k < d; ++k) base[k] += c;
      break;
    }
    case InitSpec::Kind::kGaussianSpread:
      base = opt.has_value() ? *opt : ParamVec::zeros(d);
      break;
    case InitSpec::Kind::kExplicit:
      if (cfg.init.values.size() != d) {
        throw std::invalid_argument("explicit init size must match objective dimension");
      }
      base = ParamVec(cfg.init.values);
      break;
  }

  std::vector<NodeState> nodes;
  nodes.reserve(cfg.p);
  for (std::uint32_t i = 0; i < cfg.p; ++i) {
    ParamVec theta0 = base;
    if (cfg.init.kind == InitSpec::Kind::kGaussianSpread) {
      RngStream init = make_stream(cfg.seed, cfg.run_id, i, StreamPurpose::kInit);
      for (std::size_t k = 0; k < d; ++k) {
        theta0[k] += cfg.init.scale * init.normal();
      }
    }
    nodes.push_back(make_node(i, std::move(theta0), cfg.seed, cfg.run_id));
  }
  return nodes;
}

RunResult run_sync(const SimConfig& cfg, const Objective& obj) {
  return run_sync(cfg, obj, replicate(obj, cfg.p));
}

RunResult run_sync(const SimConfig& cfg, const Objective& eval_obj,
                   std::span<const Objective* const> node_objs) {
  if (cfg.protocol == ProtocolKind::kAsyncPull) {
    throw std::invalid_argument("async-pull requires the asynchronous driver");
  }
  check_noise_dim(cfg, eval_obj);
  check_node_objs(cfg, eval_obj, node_objs);
  if (cfg.rounds == 0) throw std::invalid_argument("rounds must be >= 1");
  if (cfg.trace_every == 0) throw std::invalid_argument("trace_every must be >= 1");

  RunResult result;
  std::vector<NodeState> nodes = make_initial_nodes(cfg, eval_obj);
  ServerState server;
  if (cfg.protocol == ProtocolKind::kElasticAvg) server = make_server(nodes);

  result.node_time.assign(cfg.p, 0.0);
  result.trace.push_back(
      make_record(cfg, eval_obj, nodes, 0, 0.0, step_size_at(cfg.hyper, 0)));

  const Hyperparams& h = cfg.hyper;
  for (std::uint64_t t = 0; t < cfg.rounds; ++t) {
    const bool gated = is_gated(t, h.tau);
    switch (cfg.protocol) {
      case ProtocolKind::kAllReduce: {
        nodes = allreduce_round(std::move(nodes), node_objs, cfg.noise, h,
                                cfg.momentum_scope, &result.max_grad_norm);
        double round_time = 0.0;
        for (NodeState& n : nodes) {
          round_time = std::max(round_time,
                                apply_straggler(cfg.straggler, n.id, n.rng.straggler));
        }
        for (double& time : result.node_time) time += round_time;  // barrier
        break;
      }
      case ProtocolKind::kPullGossip: {
        if (gated) {
          const auto partners = draw_pull_partners(nodes);
          nodes = pull_gossip_round(std::move(nodes), partners, node_objs, cfg.noise, h,
                                    &result.max_grad_norm);
        } else {
          for (NodeState& n : nodes) {
            n = local_sgd_step(std::move(n), *node_objs[n.id], cfg.noise, h,
                               &result.max_grad_norm);
          }
        }
        for (NodeState& n : nodes) {
          result.node_time[n.id] += apply_straggler(cfg.straggler, n.id, n.rng.straggler) +
                                    (gated ? cfg.exchange_latency : 0.0);
        }
        break;
      }
      case ProtocolKind::kPushGossip: {
        if (gated && cfg.p > 1) {
          const auto targets = draw_push_targets(nodes);
          nodes = push_gossip_round(std::move(nodes), targets, node_objs, cfg.noise, h,
                                    &result.max_grad_norm);
        } else {
          for (NodeState& n : nodes) {
            n = local_sgd_step(std::move(n), *node_objs[n.id], cfg.noise, h,
                               &result.max_grad_norm);
          }
        }
        for (NodeState& n : nodes) {
          result.node_time[n.id] += apply_straggler(cfg.straggler, n.id, n.rng.straggler) +
                                    (gated && cfg.p > 1 ? cfg.exchange_latency : 0.0);
        }
        break;
      }
      case ProtocolKind::kGossipStale: {
        if (gated) {
          const auto partners = draw_pull_partners(nodes);
          std::vector<ParamVec> snapshot;
          snapshot.reserve(nodes.size());
          for (const NodeState& n : nodes) snapshot.push_back(n.theta);
          for (std::size_t i = 0; i < nodes.size(); ++i) {
            nodes[i] = gossip_stale_step(std::move(nodes[i]), snapshot[partners[i]],
                                         *node_objs[i], cfg.noise, h,
                                         &result.max_grad_norm);
          }
        } else {
          for (NodeState& n : nodes) {
            n = local_sgd_step(std::move(n), *node_objs[n.id], cfg.noise, h,
                               &result.max_grad_norm);
          }
        }
        for (NodeState& n : nodes) {
          result.node_time[n.id] += apply_straggler(cfg.straggler, n.id, n.rng.straggler) +
                                    (gated ? cfg.exchange_latency : 0.0);
        }
        break;
      }
      case ProtocolKind::kGossipFresh: {
        if (gated) {
          const auto partners = draw_pull_partners(nodes);
          for (NodeState& n : nodes) {
            n = local_sgd_step(std::move(n), *node_objs[n.id], cfg.noise, h,
                               &result.max_grad_norm);
          }
          // Mix against the post-step snapshot; each node steps exactly once.
          std::vector<ParamVec> stepped;
          stepped.reserve(nodes.size());
          for (const NodeState& n : nodes) stepped.push_back(n.theta);
          for (std::size_t i = 0; i < nodes.size(); ++i) {
            nodes[i] = gossip_fresh_mix(std::move(nodes[i]), stepped[partners[i]],
                                        h.beta_gossip);
          }
        } else {
          for (NodeState& n : nodes) {
            n = local_sgd_step(std::move(n), *node_objs[n.id], cfg.noise, h,
                               &result.max_grad_norm);
          }
        }
        for (NodeState& n : nodes) {
          result.node_time[n.id] += apply_straggler(cfg.straggler, n.id, n.rng.straggler) +
                                    (gated ? cfg.exchange_latency : 0.0);
        }
        break;
      }
      case ProtocolKind::kElasticAvg: {
        // Clients sweep in node order; the server applies each update
        // serially, so later clients see earlier clients' updates.
        for (std::size_t i = 0; i < nodes.size(); ++i) {
          if (gated) {
            auto [node, update] =
                ea_client_step(std::move(nodes[i]), server.theta_center, *node_objs[i],
                               cfg.noise, h, &result.max_grad_norm);
            nodes[i] = std::move(node);
            server = ea_server_apply(std::move(server), update);
          } else {
            nodes[i] = local_sgd_step(std::move(nodes[i]), *node_objs[i], cfg.noise, h,
                                      &result.max_grad_norm);
          }
        }
        for (NodeState& n : nodes) {
          result.node_time[n.id] += apply_straggler(cfg.straggler, n.id, n.rng.straggler);
        }
        break;
      }
      case ProtocolKind::kAsyncPull:
        throw std::logic_error("unreachable");
    }

    const std::uint64_t done = t + 1;
    result.sim_time = *std::max_element(result.node_time.begin(), result.node_time.end());
    if (done % cfg.trace_every == 0 || done == cfg.rounds) {
      result.trace.push_back(make_record(cfg, eval_obj, nodes, done, result.sim_time,
                                         step_size_at(h, done)));
    }
    if (cfg.max_sim_time.has_value() && result.sim_time >= *cfg.max_sim_time) {
      if (result.trace.back().t != done) {
        result.trace.push_back(make_record(cfg, eval_obj, nodes, done, result.sim_time,
                                           step_size_at(h, done)));
      }
      break;
    }
  }

  result.final_nodes = std::move(nodes);
  if (cfg.protocol == ProtocolKind::kElasticAvg) result.final_server = std::move(server);
  return result;
}

RunResult run_async(const SimConfig& cfg, const Objective& obj) {
  return run_async(cfg, obj, replicate(obj, cfg.p));
}

RunResult run_async(const SimConfig& cfg, const Objective& eval_obj,
                    std::span<const Objective* const> node_objs) {
  if (cfg.protocol != ProtocolKind::kAsyncPull &&
      cfg.protocol != ProtocolKind::kElasticAvg) {
    throw std::invalid_argument("asynchronous driver supports async-pull and elastic-avg");
  }
  if (cfg.clock.kind != ClockModel::Kind::kPoisson) {
    throw std::invalid_argument("asynchronous driver requires a poisson clock");
  }
  check_noise_dim(cfg, eval_obj);
  check_node_objs(cfg, eval_obj, node_objs);
  if (cfg.events == 0) throw std::invalid_argument("events must be >= 1");
  if (cfg.trace_every == 0) throw std::invalid_argument("trace_every must be >= 1");

  RunResult result;
  std::vector<NodeState> nodes = make_initial_nodes(cfg, eval_obj);
  ServerState server;
  if (cfg.protocol == ProtocolKind::kElasticAvg) server = make_server(nodes);

  RngStream clock_rng = make_stream(cfg.seed, cfg.run_id, kRunLevelNode,
                                    StreamPurpose::kClock);
  result.node_time.assign(cfg.p, 0.0);
  result.trace.push_back(
      make_record(cfg, eval_obj, nodes, 0, 0.0, step_size_at(cfg.hyper, 0)));

  const Hyperparams& h = cfg.hyper;
  double sim_time = 0.0;
  double last_alpha = step_size_at(h, 0);
  for (std::uint64_t k = 0; k < cfg.events; ++k) {
    const auto [gap, i] = sample_next_event(cfg.clock, cfg.p, clock_rng);
    sim_time += gap;
    last_alpha = step_size_at(h, nodes[i].t);

    if (cfg.protocol == ProtocolKind::kAsyncPull) {
      const std::uint32_t j =
          nodes[i].rng.partner.uniform_index(static_cast<std::uint32_t>(nodes.size()));
      nodes = async_pull_event(std::move(nodes), i, j, *node_objs[i], cfg.noise, h,
                               &result.max_grad_norm);
    } else {
      if (is_gated(nodes[i].t, h.tau)) {
        auto [node, update] =
            ea_client_step(std::move(nodes[i]), server.theta_center, *node_objs[i],
                           cfg.noise, h, &result.max_grad_norm);
        nodes[i] = std::move(node);
        server = ea_server_apply(std::move(server), update);
      } else {
        nodes[i] = local_sgd_step(std::move(nodes[i]), *node_objs[i], cfg.noise, h,
                                  &result.max_grad_norm);
      }
    }
    result.node_time[i] = sim_time;

    const std::uint64_t done = k + 1;
    if (done % cfg.trace_every == 0 || done == cfg.events) {
      result.trace.push_back(make_record(cfg, eval_obj, nodes, done, sim_time, last_alpha));
    }
    if (cfg.max_sim_time.has_value() && sim_time >= *cfg.max_sim_time) {
      if (result.trace.back().t != done) {
        result.trace.push_back(
            make_record(cfg, eval_obj, nodes, done, sim_time, last_alpha));
      }
      break;
    }
  }

  result.sim_time = sim_time;
  result.final_nodes = std::move(nodes);
  if (cfg.protocol == ProtocolKind::kElasticAvg) result.final_server = std::move(server);
  return result;
}

RunResult run_simulation(const SimConfig& cfg, const Objective& obj) {
  return run_simulation(cfg, obj, replicate(obj, cfg.p));
}

RunResult run_simulation(const SimConfig& cfg, const Objective& eval_obj,
                         std::span<const Objective* const> node_objs) {
  if (cfg.protocol == ProtocolKind::kAsyncPull) {
    return run_async(cfg, eval_obj, node_objs);
  }
  if (cfg.protocol == ProtocolKind::kElasticAvg &&
      cfg.clock.kind == ClockModel::Kind::kPoisson) {
    return run_async(cfg, eval_obj, node_objs);
  }
  if (cfg.clock.kind == ClockModel::Kind::kPoisson) {
    throw std::invalid_argument("poisson clock applies to async-pull and elastic-avg only");
  }
  return run_sync(cfg, eval_obj, node_objs);
}

}  // namespace dsgd
