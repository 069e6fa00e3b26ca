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

#ifndef DSGD_TRANSPORT_HPP_
#define DSGD_TRANSPORT_HPP_

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "dsgd/core.hpp"
#include "dsgd/objectives.hpp"
#include "dsgd/simulator.hpp"

namespace dsgd {

enum class MessageKind : std::uint8_t {
  kParamPush = 0,
  kPullRequest = 1,
  kPullReply = 2,
  kEaUpdate = 3,
  kEaCenter = 4,
  kBarrier = 5,
  kRingChunk = 6,
};

struct Message {
  MessageKind kind = MessageKind::kBarrier;
  std::uint32_t sender = 0;
  std::uint32_t round_tag = 0;
  std::vector<double> payload;
};

// Wire format, all little-endian: 1 byte kind, 4 bytes sender, 4 bytes
// round_tag, 4 bytes element count, then count IEEE-754 doubles. An empty
// payload is exactly 13 bytes.
std::vector<std::uint8_t> encode_message(const Message& msg);
Message decode_message(const std::vector<std::uint8_t>& bytes);

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One in-process network: an indexed set of FIFO mailboxes. Send never
// blocks; receive blocks until a message matching the predicate arrives or
// the timeout expires (TransportError). Matching always returns the earliest
// queued match, so per-sender FIFO order is preserved.
class Network {
 public:
  explicit Network(std::uint32_t endpoints);

  std::uint32_t size() const { return static_cast<std::uint32_t>(boxes_.size()); }

  void send(std::uint32_t to, Message msg);
  Message recv_match(std::uint32_t at, const std::function<bool(const Message&)>& pred,
                     std::chrono::milliseconds timeout);
  bool try_recv_match(std::uint32_t at, const std::function<bool(const Message&)>& pred,
                      Message* out);

 private:
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Message> queue;
  };
  std::vector<std::unique_ptr<Mailbox>> boxes_;
};

// A node's handle on the network. With a nonzero chaos seed every send and
// receive first sleeps a few random microseconds, which the interleaving
// tests use to shake out ordering assumptions.
class Endpoint {
 public:
  Endpoint(Network* net, std::uint32_t id, std::chrono::milliseconds timeout,
           std::uint64_t chaos_seed = 0);

  std::uint32_t id() const { return id_; }

  void send(std::uint32_t to, MessageKind kind, std::uint32_t round_tag,
            std::vector<double> payload = {});
  Message recv(const std::function<bool(const Message&)>& pred);
  bool try_recv(const std::function<bool(const Message&)>& pred, Message* out);

 private:
  void jitter();

  Network* net_;
  std::uint32_t id_;
  std::chrono::milliseconds timeout_;
  bool chaos_ = false;
  RngStream chaos_rng_;
};

// Ring all-reduce average over worker endpoints 0..p-1: reduce-scatter then
// all-gather, 2(p-1) phases. Chunk boundaries and summation order are fixed
// functions of (dim, p), so every node returns bit-identical bytes for the
// same inputs regardless of thread interleaving.
std::vector<double> ring_allreduce(Endpoint& ep, std::uint32_t p,
                                   std::vector<double> values, std::uint32_t round_tag);

// Answers every currently queued PullRequest with a PullReply carrying the
// given committed snapshot. Non-blocking; replies in arrival order.
void serve_pull(Endpoint& ep, const ParamVec& snapshot);

// Fire-and-forget parameter push.
void push_param(Endpoint& ep, std::uint32_t target, const ParamVec& theta,
                std::uint32_t round_tag);

// Elastic-averaging server: applies EaUpdate messages serially in arrival
// order, answers PullRequest with the current center (EaCenter), exits on
// Barrier. Returns the final server state.
ServerState ea_server_loop(Endpoint& ep, ServerState server);

struct TransportOptions {
  std::chrono::milliseconds timeout{30000};
  std::uint64_t chaos_seed = 0;
};

// Runs the configured protocol on real threads (one per node, plus a server
// thread for elastic-avg). Supports all-reduce, elastic-avg, pull-gossip and
// push-gossip. Traces carry no sim_time (there is no virtual clock here);
// node_time reports wall-clock seconds per worker.
RunResult run_transport(const SimConfig& cfg, const Objective& obj,
                        const TransportOptions& options = {});

}  // namespace dsgd

#endif  // DSGD_TRANSPORT_HPP_
