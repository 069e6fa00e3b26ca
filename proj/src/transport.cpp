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

#include "dsgd/transport.hpp"

#include <algorithm>
#include <bit>
#include <exception>
#include <thread>
#include <utility>

namespace dsgd {

namespace {

void append_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  buf.push_back(static_cast<std::uint8_t>(v & 0xff));
  buf.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  buf.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  buf.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::size_t kHeaderBytes = 13;
constexpr std::uint8_t kMaxKindByte = 6;

}  // namespace

std::vector<std::uint8_t> encode_message(const Message& msg) {
  if (msg.payload.size() >= (1ull << 31)) {
    throw TransportError("payload too large to frame");
  }
  std::vector<std::uint8_t> buf;
  buf.reserve(kHeaderBytes + 8 * msg.payload.size());
  buf.push_back(static_cast<std::uint8_t>(msg.kind));
  append_u32(buf, msg.sender);
  append_u32(buf, msg.round_tag);
  append_u32(buf, static_cast<std::uint32_t>(msg.payload.size()));
  for (double x : msg.payload) {
    const auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) {
      buf.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xff));
    }
  }
  return buf;
}

Message decode_message(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw TransportError("truncated frame: missing header");
  }
  if (bytes[0] > kMaxKindByte) {
    throw TransportError("unknown message kind byte " + std::to_string(bytes[0]));
  }
  Message msg;
  msg.kind = static_cast<MessageKind>(bytes[0]);
  msg.sender = read_u32(bytes.data() + 1);
  msg.round_tag = read_u32(bytes.data() + 5);
  const std::uint32_t count = read_u32(bytes.data() + 9);
  if (bytes.size() != kHeaderBytes + 8ull * count) {
    throw TransportError("frame length does not match element count");
  }
  msg.payload.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    const std::uint8_t* p = bytes.data() + kHeaderBytes + 8ull * i;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    }
    msg.payload[i] = std::bit_cast<double>(bits);
  }
  return msg;
}

Network::Network(std::uint32_t endpoints) {
  if (endpoints == 0) throw std::invalid_argument("network needs at least one endpoint");
  boxes_.reserve(endpoints);
  for (std::uint32_t i = 0; i < endpoints; ++i) {
    boxes_.push_back(std::make_unique<Mailbox>());
  }
}

void Network::send(std::uint32_t to, Message msg) {
  if (to >= boxes_.size()) throw TransportError("send to unknown endpoint");
  Mailbox& box = *boxes_[to];
  {
    std::lock_guard<std::mutex> lock(box.mu);
    box.queue.push_back(std::move(msg));
  }
  box.cv.notify_all();
}

Message Network::recv_match(std::uint32_t at, const std::function<bool(const Message&)>& pred,
                            std::chrono::milliseconds timeout) {
  if (at >= boxes_.size()) throw TransportError("receive at unknown endpoint");
  Mailbox& box = *boxes_[at];
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::unique_lock<std::mutex> lock(box.mu);
  while (true) {
    for (auto it = box.queue.begin(); it != box.queue.end(); ++it) {
      if (pred(*it)) {
        Message msg = std::move(*it);
        box.queue.erase(it);
        return msg;
      }
    }
    if (box.cv.wait_until(lock, deadline) == std::cv_status::timeout) {
      // One final scan: the notification may have raced the deadline.
      for (auto it = box.queue.begin(); it != box.queue.end(); ++it) {
        if (pred(*it)) {
          Message msg = std::move(*it);
          box.queue.erase(it);
          return msg;
        }
      }
      throw TransportError("receive timed out at endpoint " + std::to_string(at));
    }
  }
}

bool Network::try_recv_match(std::uint32_t at,
                             const std::function<bool(const Message&)>& pred, Message* out) {
  if (at >= boxes_.size()) throw TransportError("receive at unknown endpoint");
  Mailbox& box = *boxes_[at];
  std::lock_guard<std::mutex> lock(box.mu);
  for (auto it = box.queue.begin(); it != box.queue.end(); ++it) {
    if (pred(*it)) {
      *out = std::move(*it);
      box.queue.erase(it);
      return true;
    }
  }
  return false;
}

Endpoint::Endpoint(Network* net, std::uint32_t id, std::chrono::milliseconds timeout,
                   std::uint64_t chaos_seed)
    : net_(net), id_(id), timeout_(timeout) {
  if (net == nullptr) throw std::invalid_argument("endpoint needs a network");
  if (chaos_seed != 0) {
    chaos_ = true;
    chaos_rng_ = make_stream(chaos_seed, "chaos", id, StreamPurpose::kClock);
  }
}

void Endpoint::jitter() {
  if (!chaos_) return;
  std::this_thread::sleep_for(std::chrono::microseconds(chaos_rng_.uniform_index(200)));
}

void Endpoint::send(std::uint32_t to, MessageKind kind, std::uint32_t round_tag,
                    std::vector<double> payload) {
  jitter();
  net_->send(to, Message{kind, id_, round_tag, std::move(payload)});
}

Message Endpoint::recv(const std::function<bool(const Message&)>& pred) {
  jitter();
  return net_->recv_match(id_, pred, timeout_);
}

bool Endpoint::try_recv(const std::function<bool(const Message&)>& pred, Message* out) {
  jitter();
  return net_->try_recv_match(id_, pred, out);
}

std::vector<double> ring_allreduce(Endpoint& ep, std::uint32_t p,
                                   std::vector<double> values, std::uint32_t round_tag) {
  if (p == 0) throw std::invalid_argument("ring_allreduce needs p >= 1");
  const std::uint32_t r = ep.id();
  if (r >= p) throw std::invalid_argument("ring rank out of range");
  if (p == 1) return values;

  // Fixed chunking: chunk c covers [c*base + min(c, rem), +len) with
  // len = base + (c < rem). A fixed function of (dim, p) only.
  const std::size_t dim = values.size();
  const std::size_t base = dim / p;
  const std::size_t rem = dim % p;
  const auto chunk_start = [&](std::uint32_t c) {
    return c * base + std::min<std::size_t>(c, rem);
  };
  const auto chunk_len = [&](std::uint32_t c) { return base + (c < rem ? 1 : 0); };

  const std::uint32_t next = (r + 1) % p;
  const std::uint32_t prev = (r + p - 1) % p;
  const auto from_prev = [&](const Message& m) {
    return m.kind == MessageKind::kRingChunk && m.sender == prev &&
           m.round_tag == round_tag;
  };
  const auto send_chunk = [&](std::uint32_t c) {
    const std::size_t s = chunk_start(c);
    ep.send(next, MessageKind::kRingChunk, round_tag,
            std::vector<double>(values.begin() + s, values.begin() + s + chunk_len(c)));
  };

  // Reduce-scatter: after p-1 phases node r holds the full sum of chunk
  // (r+1) mod p. Accumulation is always received-partial + own value, so the
  // sum of chunk c is folded left in ring order starting at node c,
  // independent of thread interleaving.
  for (std::uint32_t s = 0; s < p - 1; ++s) {
    send_chunk((r + p - s) % p);
    const std::uint32_t rc = (r + p - s - 1) % p;
    const Message m = ep.recv(from_prev);
    if (m.payload.size() != chunk_len(rc)) {
      throw TransportError("ring chunk size mismatch");
    }
    const std::size_t start = chunk_start(rc);
    for (std::size_t k = 0; k < m.payload.size(); ++k) {
      values[start + k] = m.payload[k] + values[start + k];
    }
  }

  const std::uint32_t owned = (r + 1) % p;
  {
    const std::size_t start = chunk_start(owned);
    for (std::size_t k = 0; k < chunk_len(owned); ++k) {
      values[start + k] /= static_cast<double>(p);
    }
  }

  // All-gather: forward finished chunks verbatim, p-1 phases.
  for (std::uint32_t s = 0; s < p - 1; ++s) {
    send_chunk((r + 1 + p - s) % p);
    const std::uint32_t rc = (r + p - s) % p;
    const Message m = ep.recv(from_prev);
    if (m.payload.size() != chunk_len(rc)) {
      throw TransportError("ring chunk size mismatch");
    }
    std::copy(m.payload.begin(), m.payload.end(), values.begin() + chunk_start(rc));
  }
  return values;
}

void serve_pull(Endpoint& ep, const ParamVec& snapshot) {
  Message req;
  while (ep.try_recv([](const Message& m) { return m.kind == MessageKind::kPullRequest; },
                     &req)) {
    ep.send(req.sender, MessageKind::kPullReply, req.round_tag, snapshot.values());
  }
}

void push_param(Endpoint& ep, std::uint32_t target, const ParamVec& theta,
                std::uint32_t round_tag) {
  if (target == ep.id()) throw std::invalid_argument("push target must differ from sender");
  ep.send(target, MessageKind::kParamPush, round_tag, theta.values());
}

ServerState ea_server_loop(Endpoint& ep, ServerState server) {
  while (true) {
    const Message msg = ep.recv([](const Message& m) {
      return m.kind == MessageKind::kEaUpdate || m.kind == MessageKind::kPullRequest ||
             m.kind == MessageKind::kBarrier;
    });
    switch (msg.kind) {
      case MessageKind::kEaUpdate:
        server = ea_server_apply(std::move(server), ParamVec(msg.payload));
        break;
      case MessageKind::kPullRequest:
        ep.send(msg.sender, MessageKind::kEaCenter, msg.round_tag,
                server.theta_center.values());
        break;
      default:
        return server;
    }
  }
}

namespace {

bool is_gated(std::uint64_t t, std::uint32_t tau) { return t > 0 && t % tau == 0; }

// Trace iteration indices for a horizon, identical to the simulator's.
std::vector<std::uint64_t> trace_points(std::uint64_t rounds, std::uint64_t every) {
  std::vector<std::uint64_t> ts;
  for (std::uint64_t done = 1; done <= rounds; ++done) {
    if (done % every == 0 || done == rounds) ts.push_back(done);
  }
  return ts;
}

struct WorkerScratch {
  std::vector<ParamVec> history;  // one snapshot per trace point
  double grad_norm = 0.0;
  double seconds = 0.0;
  std::exception_ptr error;
};

}  // namespace

RunResult run_transport(const SimConfig& cfg, const Objective& obj,
                        const TransportOptions& options) {
  switch (cfg.protocol) {
    case ProtocolKind::kAllReduce:
    case ProtocolKind::kElasticAvg:
    case ProtocolKind::kPullGossip:
    case ProtocolKind::kPushGossip:
      break;
    default:
      throw std::invalid_argument(
          "transport backend supports all-reduce, elastic-avg, pull-gossip, push-gossip");
  }
  if (cfg.noise.dim != obj.dim()) {
    throw std::invalid_argument("noise dimension must match objective dimension");
  }
  if (cfg.p == 0) throw std::invalid_argument("p must be >= 1");
  if (cfg.rounds == 0) throw std::invalid_argument("rounds must be >= 1");
  if (cfg.trace_every == 0) throw std::invalid_argument("trace_every must be >= 1");

  const std::uint32_t p = cfg.p;
  const Hyperparams& h = cfg.hyper;
  std::vector<NodeState> nodes = make_initial_nodes(cfg, obj);

  std::vector<ParamVec> initial_thetas;
  initial_thetas.reserve(p);
  for (const NodeState& n : nodes) initial_thetas.push_back(n.theta);

  // Endpoint p doubles as the EA server inbox and the shutdown coordinator
  // inbox; the main thread talks to it through the Network directly.
  Network net(p + 1);
  const std::uint32_t coord = p;
  const auto ts = trace_points(cfg.rounds, cfg.trace_every);

  std::vector<WorkerScratch> scratch(p);
  std::vector<NodeState> finals(p);

  const auto worker = [&](std::uint32_t r) {
    WorkerScratch& me = scratch[r];
    try {
      Endpoint ep(&net, r, options.timeout, options.chaos_seed);
      NodeState node = std::move(nodes[r]);
      ParamVec committed = node.theta;
      const auto t0 = std::chrono::steady_clock::now();

      for (std::uint64_t t = 0; t < cfg.rounds; ++t) {
        const bool gated = is_gated(t, h.tau);
        switch (cfg.protocol) {
          case ProtocolKind::kAllReduce: {
            const ParamVec delta =
                compute_local_delta(node, obj, cfg.noise, h, &me.grad_norm);
            const ParamVec avg(ring_allreduce(ep, p, delta.values(),
                                              static_cast<std::uint32_t>(t)));
            node.theta += avg;
            node.delta_prev =
                cfg.momentum_scope == MomentumScope::kAggregate ? avg : delta;
            node.t += 1;
            break;
          }
          case ProtocolKind::kPullGossip: {
            committed = node.theta;
            serve_pull(ep, committed);
            if (gated) {
              const std::uint32_t j = node.rng.partner.uniform_index(p);
              ParamVec pulled;
              if (j == r) {
                pulled = node.theta;
              } else {
                ep.send(j, MessageKind::kPullRequest, static_cast<std::uint32_t>(t));
                // Serve other pullers from the committed snapshot while
                // blocked on our own reply; this breaks pull cycles.
                while (true) {
                  Message m = ep.recv([&](const Message& msg) {
                    return msg.kind == MessageKind::kPullRequest ||
                           (msg.kind == MessageKind::kPullReply && msg.sender == j &&
                            msg.round_tag == static_cast<std::uint32_t>(t));
                  });
                  if (m.kind == MessageKind::kPullRequest) {
                    ep.send(m.sender, MessageKind::kPullReply, m.round_tag,
                            committed.values());
                    continue;
                  }
                  pulled = ParamVec(std::move(m.payload));
                  break;
                }
              }
              if (pulled.dim() != node.theta.dim()) {
                throw TransportError("pull reply dimension mismatch");
              }
              for (std::size_t k = 0; k < node.theta.dim(); ++k) {
                node.theta[k] += 0.5 * (pulled[k] - node.theta[k]);
              }
            }
            node = local_sgd_step(std::move(node), obj, cfg.noise, h, &me.grad_norm);
            break;
          }
          case ProtocolKind::kPushGossip: {
            if (gated && p > 1) {
              std::uint32_t j = node.rng.partner.uniform_index(p - 1);
              if (j >= r) ++j;
              push_param(ep, j, node.theta, static_cast<std::uint32_t>(t));
              // Average own theta with every push that has arrived by now,
              // in centered form around the own value.
              ParamVec acc = ParamVec::zeros(node.theta.dim());
              std::size_t count = 1;
              Message m;
              while (ep.try_recv(
                  [](const Message& msg) { return msg.kind == MessageKind::kParamPush; },
                  &m)) {
                if (m.payload.size() != node.theta.dim()) {
                  throw TransportError("push dimension mismatch");
                }
                for (std::size_t k = 0; k < acc.dim(); ++k) {
                  acc[k] += m.payload[k] - node.theta[k];
                }
                ++count;
              }
              const double inv = 1.0 / static_cast<double>(count);
              for (std::size_t k = 0; k < node.theta.dim(); ++k) {
                node.theta[k] += acc[k] * inv;
              }
            }
            node = local_sgd_step(std::move(node), obj, cfg.noise, h, &me.grad_norm);
            break;
          }
          case ProtocolKind::kElasticAvg: {
            if (gated) {
              ep.send(coord, MessageKind::kPullRequest, static_cast<std::uint32_t>(t));
              const Message m = ep.recv([&](const Message& msg) {
                return msg.kind == MessageKind::kEaCenter &&
                       msg.round_tag == static_cast<std::uint32_t>(t);
              });
              auto [stepped, update] =
                  ea_client_step(std::move(node), ParamVec(m.payload), obj, cfg.noise, h,
                                 &me.grad_norm);
              node = std::move(stepped);
              ep.send(coord, MessageKind::kEaUpdate, static_cast<std::uint32_t>(t),
                      update.values());
            } else {
              node = local_sgd_step(std::move(node), obj, cfg.noise, h, &me.grad_norm);
            }
            break;
          }
          default:
            throw std::logic_error("unreachable");
        }

        const std::uint64_t done = t + 1;
        if (done % cfg.trace_every == 0 || done == cfg.rounds) {
          me.history.push_back(node.theta);
        }
      }

      me.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                       .count();

      if (cfg.protocol == ProtocolKind::kPullGossip) {
        // Drain: keep answering pulls until every worker has finished its
        // rounds and the main thread broadcasts the barrier.
        committed = node.theta;
        ep.send(coord, MessageKind::kBarrier, 0);
        while (true) {
          Message m = ep.recv([](const Message& msg) {
            return msg.kind == MessageKind::kPullRequest ||
                   msg.kind == MessageKind::kBarrier;
          });
          if (m.kind == MessageKind::kBarrier) break;
          ep.send(m.sender, MessageKind::kPullReply, m.round_tag, committed.values());
        }
      }
      finals[r] = std::move(node);
    } catch (...) {
      me.error = std::current_exception();
    }
  };

  std::optional<ServerState> final_server;
  std::exception_ptr server_error;
  std::thread server_thread;
  if (cfg.protocol == ProtocolKind::kElasticAvg) {
    ServerState server{spatial_mean(initial_thetas), 0};
    server_thread = std::thread([&, server]() mutable {
      try {
        Endpoint ep(&net, coord, options.timeout, options.chaos_seed);
        final_server = ea_server_loop(ep, std::move(server));
      } catch (...) {
        server_error = std::current_exception();
      }
    });
  }

  std::vector<std::thread> threads;
  threads.reserve(p);
  for (std::uint32_t r = 0; r < p; ++r) threads.emplace_back(worker, r);

  if (cfg.protocol == ProtocolKind::kPullGossip) {
    // Collect one barrier per worker, then release them all. A worker that
    // died replies nothing, so bound the wait and let its stored error win.
    try {
      for (std::uint32_t k = 0; k < p; ++k) {
        net.recv_match(coord,
                       [](const Message& m) { return m.kind == MessageKind::kBarrier; },
                       options.timeout);
      }
    } catch (const TransportError&) {
      // fall through to join; worker errors are rethrown below
    }
    for (std::uint32_t r = 0; r < p; ++r) {
      net.send(r, Message{MessageKind::kBarrier, coord, 0, {}});
    }
  }

  for (std::thread& th : threads) th.join();

  if (cfg.protocol == ProtocolKind::kElasticAvg) {
    net.send(coord, Message{MessageKind::kBarrier, coord, 0, {}});
    server_thread.join();
    if (server_error) std::rethrow_exception(server_error);
  }
  for (const WorkerScratch& s : scratch) {
    if (s.error) std::rethrow_exception(s.error);
  }

  RunResult result;
  result.trace.push_back(
      make_trace_record(cfg, obj, initial_thetas, 0, std::nullopt, step_size_at(h, 0)));
  for (std::size_t idx = 0; idx < ts.size(); ++idx) {
    std::vector<ParamVec> thetas;
    thetas.reserve(p);
    for (std::uint32_t r = 0; r < p; ++r) {
      if (scratch[r].history.size() != ts.size()) {
        throw std::logic_error("trace history size mismatch");
      }
      thetas.push_back(scratch[r].history[idx]);
    }
    result.trace.push_back(make_trace_record(cfg, obj, thetas, ts[idx], std::nullopt,
                                             step_size_at(h, ts[idx])));
  }

  result.final_nodes = std::move(finals);
  result.final_server = std::move(final_server);
  result.node_time.resize(p);
  for (std::uint32_t r = 0; r < p; ++r) {
    result.node_time[r] = scratch[r].seconds;
    result.max_grad_norm = std::max(result.max_grad_norm, scratch[r].grad_norm);
  }
  result.sim_time = *std::max_element(result.node_time.begin(), result.node_time.end());
  return result;
}

}  // namespace dsgd
