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

#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "dsgd/objectives.hpp"
#include "dsgd/transport.hpp"

using namespace dsgd;
using namespace std::chrono_literals;

namespace {

SimConfig transport_config(ProtocolKind protocol, std::uint32_t p, std::size_t dim) {
  SimConfig cfg;
  cfg.protocol = protocol;
  cfg.p = p;
  cfg.noise = NoiseModel::zero(dim);
  cfg.hyper.alpha0 = 0.05;
  cfg.hyper.anneal_at.clear();
  cfg.hyper.mu = 0.0;
  cfg.hyper.weight_decay = 0.0;
  cfg.rounds = 12;
  cfg.trace_every = 4;
  cfg.seed = 7;
  cfg.run_id = "transport-test";
  return cfg;
}

QuadraticObjective ref_quadratic() {
  return QuadraticObjective({1.0, 2.0, 5.0, 10.0}, ParamVec{0.5, -0.5, 0.0, 1.0});
}

// Runs fn on ranks 0..p-1, one thread each, over a fresh network with one
// spare coordinator slot (unused by most tests).
template <typename Fn>
void run_ranks(std::uint32_t p, Fn fn) {
  Network net(p);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(p);
  for (std::uint32_t r = 0; r < p; ++r) {
    threads.emplace_back([&, r] {
      try {
        Endpoint ep(&net, r, 5000ms);
        fn(ep, r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

TEST_CASE("message codec round-trips every field") {
  for (MessageKind kind : {MessageKind::kParamPush, MessageKind::kPullRequest,
                           MessageKind::kPullReply, MessageKind::kEaUpdate,
                           MessageKind::kEaCenter, MessageKind::kBarrier,
                           MessageKind::kRingChunk}) {
    Message msg;
    msg.kind = kind;
    msg.sender = 0xDEADBEEF;
    msg.round_tag = 42;
    msg.payload = {1.5, -2.25, 0.0, 1e300, -1e-300};
    const Message back = decode_message(encode_message(msg));
    CHECK(back.kind == msg.kind);
    CHECK(back.sender == msg.sender);
    CHECK(back.round_tag == msg.round_tag);
    CHECK(back.payload == msg.payload);
  }
}

TEST_CASE("empty payload encodes to exactly 13 bytes") {
  Message msg;
  msg.kind = MessageKind::kBarrier;
  msg.sender = 3;
  msg.round_tag = 9;
  const auto bytes = encode_message(msg);
  CHECK(bytes.size() == 13);
  CHECK(bytes[0] == static_cast<std::uint8_t>(MessageKind::kBarrier));
  const Message back = decode_message(bytes);
  CHECK(back.sender == 3);
  CHECK(back.round_tag == 9);
  CHECK(back.payload.empty());
}

TEST_CASE("decoding rejects malformed frames") {
  Message msg;
  msg.kind = MessageKind::kParamPush;
  msg.payload = {1.0, 2.0};
  auto bytes = encode_message(msg);

  auto truncated = bytes;
  truncated.resize(12);  // below the fixed header
  CHECK_THROWS(decode_message(truncated));

  auto short_payload = bytes;
  short_payload.pop_back();  // count promises more doubles than present
  CHECK_THROWS(decode_message(short_payload));

  auto bad_kind = bytes;
  bad_kind[0] = 0xFF;
  CHECK_THROWS(decode_message(bad_kind));
}

TEST_CASE("mailboxes preserve per-sender order and match the earliest message") {
  Network net(2);
  net.send(0, Message{MessageKind::kParamPush, 1, 10, {1.0}});
  net.send(0, Message{MessageKind::kBarrier, 1, 11, {}});
  net.send(0, Message{MessageKind::kParamPush, 1, 12, {2.0}});

  // Predicate skips the push messages but leaves them queued.
  const Message barrier = net.recv_match(
      0, [](const Message& m) { return m.kind == MessageKind::kBarrier; }, 1000ms);
  CHECK(barrier.round_tag == 11);

  const auto is_push = [](const Message& m) {
    return m.kind == MessageKind::kParamPush;
  };
  CHECK(net.recv_match(0, is_push, 1000ms).round_tag == 10);
  CHECK(net.recv_match(0, is_push, 1000ms).round_tag == 12);

  Message out;
  CHECK(!net.try_recv_match(0, is_push, &out));
}

TEST_CASE("receive times out with a transport error") {
  Network net(1);
  Endpoint ep(&net, 0, 50ms);
  const auto start = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(ep.recv([](const Message&) { return true; }), TransportError);
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed >= 40ms);
}

TEST_CASE("ring all-reduce averages exactly on two nodes") {
  std::vector<std::vector<double>> results(2);
  run_ranks(2, [&](Endpoint& ep, std::uint32_t r) {
    const std::vector<double> own = r == 0 ? std::vector<double>{1.0, 2.0}
                                           : std::vector<double>{3.0, 4.0};
    results[r] = ring_allreduce(ep, 2, own, 0);
  });
  CHECK(results[0] == std::vector<double>{2.0, 3.0});
  CHECK(results[1] == std::vector<double>{2.0, 3.0});
}

TEST_CASE("ring all-reduce is the identity on one node") {
  Network net(1);
  Endpoint ep(&net, 0, 1000ms);
  const std::vector<double> values{1.0, -2.0, 3.5};
  CHECK(ring_allreduce(ep, 1, values, 0) == values);
}

TEST_CASE("ring all-reduce handles dimensions below the node count") {
  std::vector<std::vector<double>> results(3);
  run_ranks(3, [&](Endpoint& ep, std::uint32_t r) {
    results[r] = ring_allreduce(ep, 3, {static_cast<double>(r + 1)}, 5);
  });
  for (const auto& out : results) {
    REQUIRE(out.size() == 1);
    CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-15));
  }
  CHECK(results[0] == results[1]);
  CHECK(results[1] == results[2]);
}

TEST_CASE("ring all-reduce returns bit-identical bytes on every node") {
  const std::uint32_t p = 8;
  const std::size_t dim = 21;  // uneven chunks: rem = 5
  std::vector<std::vector<double>> results(p);
  run_ranks(p, [&](Endpoint& ep, std::uint32_t r) {
    std::vector<double> own(dim);
    RngStream rng(100 + r);
    for (double& v : own) v = rng.normal();
    results[r] = ring_allreduce(ep, p, own, 3);
  });
  for (std::uint32_t r = 1; r < p; ++r) {
    CHECK(results[r] == results[0]);  // exact equality, not approximate
  }
  // Sanity: entries are near the true mean of 8 standard normals.
  for (double v : results[0]) CHECK(std::abs(v) < 3.0);
}

TEST_CASE("queued pull requests are answered in arrival order") {
  Network net(3);
  Endpoint server(&net, 0, 1000ms);
  Endpoint a(&net, 1, 1000ms);
  Endpoint b(&net, 2, 1000ms);
  a.send(0, MessageKind::kPullRequest, 7);
  b.send(0, MessageKind::kPullRequest, 8);

  const ParamVec snapshot{1.0, 2.0, 3.0};
  serve_pull(server, snapshot);

  const auto is_reply = [](const Message& m) {
    return m.kind == MessageKind::kPullReply;
  };
  const Message ra = a.recv(is_reply);
  CHECK(ra.round_tag == 7);
  CHECK(ra.payload == snapshot.values());
  const Message rb = b.recv(is_reply);
  CHECK(rb.round_tag == 8);
  CHECK(rb.payload == snapshot.values());

  Message none;
  CHECK(!server.try_recv([](const Message&) { return true; }, &none));
}

TEST_CASE("push rejects the sender as its own target") {
  Network net(2);
  Endpoint ep(&net, 0, 1000ms);
  CHECK_THROWS(push_param(ep, 0, ParamVec{1.0}, 0));
  CHECK_NOTHROW(push_param(ep, 1, ParamVec{1.0}, 0));
}

TEST_CASE("elastic averaging server applies updates serially and answers pulls") {
  Network net(2);
  ServerState returned;
  std::thread server_thread([&] {
    Endpoint ep(&net, 0, 1000ms);
    returned = ea_server_loop(ep, ServerState{ParamVec{0.0, 0.0}, 0});
  });

  Endpoint client(&net, 1, 1000ms);
  client.send(0, MessageKind::kEaUpdate, 1, {0.5, 1.0});
  client.send(0, MessageKind::kPullRequest, 2);
  const Message center = client.recv(
      [](const Message& m) { return m.kind == MessageKind::kEaCenter; });
  CHECK(center.payload == std::vector<double>{0.5, 1.0});  // first update applied
  client.send(0, MessageKind::kEaUpdate, 3, {0.5, 1.0});
  client.send(0, MessageKind::kBarrier, 4);
  server_thread.join();

  CHECK(returned.applied_updates == 2);
  CHECK(returned.theta_center == ParamVec({1.0, 2.0}));
}

TEST_CASE("transport rejects protocols outside its whitelist") {
  const auto obj = ref_quadratic();
  for (ProtocolKind protocol : {ProtocolKind::kGossipStale, ProtocolKind::kGossipFresh,
                                ProtocolKind::kAsyncPull}) {
    CHECK_THROWS(run_transport(transport_config(protocol, 2, 4), obj));
  }
}

TEST_CASE("threaded all-reduce runs are deterministic with zero consensus error") {
  const auto obj = ref_quadratic();
  SimConfig cfg = transport_config(ProtocolKind::kAllReduce, 4, 4);
  cfg.noise = NoiseModel::gaussian_total(0.01, 4);
  const RunResult a = run_transport(cfg, obj);
  const RunResult b = run_transport(cfg, obj);

  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t k = 0; k < a.trace.size(); ++k) {
    CHECK(a.trace[k] == b.trace[k]);
    CHECK(a.trace[k].sq_err_consensus == 0.0);
    CHECK(!a.trace[k].sim_time.has_value());
  }
  for (std::uint32_t r = 0; r < 4; ++r) {
    CHECK(a.final_nodes[r].theta == b.final_nodes[r].theta);
    CHECK(a.final_nodes[r].theta == a.final_nodes[0].theta);
    CHECK(a.node_time[r] >= 0.0);
  }
  CHECK(a.sim_time >= a.node_time[0]);
}

TEST_CASE("threaded all-reduce matches the simulator trajectory") {
  const auto obj = ref_quadratic();
  SimConfig cfg = transport_config(ProtocolKind::kAllReduce, 4, 4);
  cfg.noise = NoiseModel::gaussian_total(0.01, 4);
  cfg.rounds = 40;
  cfg.trace_every = 10;
  const RunResult wire = run_transport(cfg, obj);
  const RunResult sim = run_sync(cfg, obj);

  // The ring folds chunk sums in ring order while the simulator averages in
  // node order, so agreement is to rounding, not bit-exact.
  REQUIRE(wire.trace.size() == sim.trace.size());
  for (std::size_t k = 0; k < wire.trace.size(); ++k) {
    CHECK(wire.trace[k].t == sim.trace[k].t);
    CHECK(wire.trace[k].loss_mean ==
          doctest::Approx(sim.trace[k].loss_mean).epsilon(1e-10));
    REQUIRE(wire.trace[k].sq_err_opt.has_value());
    CHECK(*wire.trace[k].sq_err_opt ==
          doctest::Approx(*sim.trace[k].sq_err_opt).epsilon(1e-10));
  }
}

TEST_CASE("chaos jitter cannot change the all-reduce answer") {
  const auto obj = ref_quadratic();
  SimConfig cfg = transport_config(ProtocolKind::kAllReduce, 4, 4);
  cfg.rounds = 3;
  const RunResult baseline = run_transport(cfg, obj);
  for (std::uint64_t chaos_seed : {1ull, 2ull, 3ull}) {
    TransportOptions opts;
    opts.chaos_seed = chaos_seed;
    const RunResult jittered = run_transport(cfg, obj, opts);
    for (std::uint32_t r = 0; r < 4; ++r) {
      CHECK(jittered.final_nodes[r].theta == baseline.final_nodes[r].theta);
    }
  }
}

TEST_CASE("single-client elastic averaging matches the simulator bit for bit") {
  const auto obj = ref_quadratic();
  SimConfig cfg = transport_config(ProtocolKind::kElasticAvg, 1, 4);
  cfg.hyper.tau = 2;
  cfg.rounds = 10;
  const RunResult wire = run_transport(cfg, obj);
  const RunResult sim = run_sync(cfg, obj);

  CHECK(wire.final_nodes[0].theta == sim.final_nodes[0].theta);
  REQUIRE(wire.final_server.has_value());
  REQUIRE(sim.final_server.has_value());
  CHECK(wire.final_server->theta_center == sim.final_server->theta_center);
  CHECK(wire.final_server->applied_updates == sim.final_server->applied_updates);
}

TEST_CASE("threaded gossip runs produce well-formed improving traces") {
  const auto obj = ref_quadratic();
  for (ProtocolKind protocol : {ProtocolKind::kPullGossip, ProtocolKind::kPushGossip}) {
    SimConfig cfg = transport_config(protocol, 4, 4);
    cfg.rounds = 40;
    cfg.trace_every = 10;
    cfg.init.kind = InitSpec::Kind::kGaussianSpread;
    cfg.init.scale = 1.0;
    const RunResult result = run_transport(cfg, obj);
    REQUIRE(result.trace.size() == 5);
    CHECK(result.trace.back().t == 40);
    // Message timing is scheduling-dependent here, so only the qualitative
    // claim is stable: sustained local SGD plus mixing reduces the loss.
    CHECK(result.trace.back().loss_mean < result.trace.front().loss_mean);
    for (std::uint32_t r = 0; r < 4; ++r) {
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(std::isfinite(result.final_nodes[r].theta[k]));
      }
    }
  }
}

TEST_CASE("threaded elastic averaging converges with several clients") {
  const auto obj = ref_quadratic();
  SimConfig cfg = transport_config(ProtocolKind::kElasticAvg, 4, 4);
  cfg.rounds = 60;
  cfg.trace_every = 30;
  cfg.hyper.beta_ea = 0.2;
  const RunResult result = run_transport(cfg, obj);
  REQUIRE(result.final_server.has_value());
  // tau = 1: every round after the first is gated on every client.
  CHECK(result.final_server->applied_updates == 4u * 59u);
  CHECK(result.trace.back().loss_mean < result.trace.front().loss_mean);
}
