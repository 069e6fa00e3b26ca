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

#include "dsgd/config.hpp"

#include <charconv>
#include <set>
#include <sstream>

namespace dsgd {

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

double parse_double(std::size_t line_no, const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(line_no, key + " expects a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::size_t line_no, const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    fail(line_no, key + " expects a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::uint32_t parse_u32(std::size_t line_no, const std::string& key, const std::string& v) {
  const std::uint64_t wide = parse_u64(line_no, key, v);
  if (wide > 0xffffffffull) fail(line_no, key + " out of range");
  return static_cast<std::uint32_t>(wide);
}

bool parse_bool(std::size_t line_no, const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line_no, key + " expects true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> parts;
  if (trim(v).empty()) return parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = v.find(',', start);
    parts.push_back(trim(v.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

std::vector<double> parse_double_list(std::size_t line_no, const std::string& key,
                                      const std::string& v) {
  std::vector<double> out;
  for (const std::string& part : split_list(v)) {
    out.push_back(parse_double(line_no, key, part));
  }
  return out;
}

std::vector<std::uint64_t> parse_u64_list(std::size_t line_no, const std::string& key,
                                          const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const std::string& part : split_list(v)) {
    out.push_back(parse_u64(line_no, key, part));
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

std::string join_doubles(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ',';
    out += format_double(xs[i]);
  }
  return out;
}

std::string join_u64s(const std::vector<std::uint64_t>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ',';
    out += std::to_string(xs[i]);
  }
  return out;
}

ClockModel::Kind clock_from_string(std::size_t line_no, const std::string& v) {
  if (v == "lockstep") return ClockModel::Kind::kLockstep;
  if (v == "poisson") return ClockModel::Kind::kPoisson;
  fail(line_no, "unknown clock '" + v + "'");
}

std::string_view to_string(ClockModel::Kind kind) {
  return kind == ClockModel::Kind::kLockstep ? "lockstep" : "poisson";
}

StragglerModel::Kind straggler_from_string(std::size_t line_no, const std::string& v) {
  if (v == "constant") return StragglerModel::Kind::kConstant;
  if (v == "log-normal") return StragglerModel::Kind::kLogNormal;
  if (v == "constant-with-outlier") return StragglerModel::Kind::kConstantWithOutlier;
  fail(line_no, "unknown straggler model '" + v + "'");
}

std::string_view to_string(StragglerModel::Kind kind) {
  switch (kind) {
    case StragglerModel::Kind::kConstant: return "constant";
    case StragglerModel::Kind::kLogNormal: return "log-normal";
    case StragglerModel::Kind::kConstantWithOutlier: return "constant-with-outlier";
  }
  return "constant";
}

InitSpec::Kind init_from_string(std::size_t line_no, const std::string& v) {
  if (v == "zeros") return InitSpec::Kind::kZeros;
  if (v == "offset-ones") return InitSpec::Kind::kOffsetOnes;
  if (v == "gaussian-spread") return InitSpec::Kind::kGaussianSpread;
  if (v == "explicit") return InitSpec::Kind::kExplicit;
  fail(line_no, "unknown init '" + v + "'");
}

std::string_view to_string(InitSpec::Kind kind) {
  switch (kind) {
    case InitSpec::Kind::kZeros: return "zeros";
    case InitSpec::Kind::kOffsetOnes: return "offset-ones";
    case InitSpec::Kind::kGaussianSpread: return "gaussian-spread";
    case InitSpec::Kind::kExplicit: return "explicit";
  }
  return "zeros";
}

}  // namespace

std::string_view to_string(Backend backend) {
  return backend == Backend::kSim ? "sim" : "transport";
}

std::string_view to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::kQuadratic ? "quadratic" : "logistic";
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;

  while (std::getline(in, raw)) {
    ++line_no;
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) fail(line_no, "empty key");
    if (!seen.insert(key).second) fail(line_no, "duplicate key '" + key + "'");

    // List-valued keys tolerate an empty value; everything else rejects it.
    const bool list_key = key == "anneal_at" || key == "spectrum" || key == "optimum" ||
                          key == "init_values" || key == "emit" || key == "bound";
    if (value.empty() && !list_key) fail(line_no, "empty value for '" + key + "'");

    if (key == "protocol") {
      const auto kind = protocol_from_string(value);
      if (!kind) fail(line_no, "unknown protocol '" + value + "'");
      cfg.sim.protocol = *kind;
    } else if (key == "backend") {
      if (value == "sim") cfg.backend = Backend::kSim;
      else if (value == "transport") cfg.backend = Backend::kTransport;
      else fail(line_no, "unknown backend '" + value + "'");
    } else if (key == "p") {
      cfg.sim.p = parse_u32(line_no, key, value);
    } else if (key == "trials") {
      cfg.trials = parse_u32(line_no, key, value);
    } else if (key == "seed") {
      cfg.sim.seed = parse_u64(line_no, key, value);
    } else if (key == "run_id") {
      cfg.sim.run_id = value;
    } else if (key == "output_dir") {
      cfg.output_dir = value;
    } else if (key == "emit") {
      cfg.emit_trace = cfg.emit_summary = cfg.emit_bound_report = false;
      for (const std::string& part : split_list(value)) {
        if (part == "trace_jsonl") cfg.emit_trace = true;
        else if (part == "summary_json") cfg.emit_summary = true;
        else if (part == "bound_report") cfg.emit_bound_report = true;
        else fail(line_no, "unknown emit target '" + part + "'");
      }
    } else if (key == "rounds") {
      cfg.sim.rounds = parse_u64(line_no, key, value);
    } else if (key == "events") {
      cfg.sim.events = parse_u64(line_no, key, value);
    } else if (key == "trace_every") {
      cfg.sim.trace_every = parse_u64(line_no, key, value);
    } else if (key == "max_sim_time") {
      cfg.sim.max_sim_time = parse_double(line_no, key, value);
    } else if (key == "exchange_latency") {
      cfg.sim.exchange_latency = parse_double(line_no, key, value);
    } else if (key == "alpha0") {
      cfg.sim.hyper.alpha0 = parse_double(line_no, key, value);
    } else if (key == "anneal_factor") {
      cfg.sim.hyper.anneal_factor = parse_double(line_no, key, value);
    } else if (key == "anneal_at") {
      cfg.sim.hyper.anneal_at = parse_u64_list(line_no, key, value);
    } else if (key == "mu") {
      cfg.sim.hyper.mu = parse_double(line_no, key, value);
    } else if (key == "weight_decay") {
      cfg.sim.hyper.weight_decay = parse_double(line_no, key, value);
    } else if (key == "beta_gossip") {
      cfg.sim.hyper.beta_gossip = parse_double(line_no, key, value);
    } else if (key == "beta_ea") {
      cfg.sim.hyper.beta_ea = parse_double(line_no, key, value);
    } else if (key == "tau") {
      cfg.sim.hyper.tau = parse_u32(line_no, key, value);
    } else if (key == "batch") {
      cfg.sim.hyper.batch = parse_u32(line_no, key, value);
    } else if (key == "momentum_scope") {
      const auto scope = momentum_scope_from_string(value);
      if (!scope) fail(line_no, "unknown momentum_scope '" + value + "'");
      cfg.sim.momentum_scope = *scope;
    } else if (key == "sigma_sq") {
      cfg.sigma_sq = parse_double(line_no, key, value);
    } else if (key == "clock") {
      cfg.sim.clock.kind = clock_from_string(line_no, value);
    } else if (key == "rate_per_node") {
      cfg.sim.clock.rate_per_node = parse_double(line_no, key, value);
    } else if (key == "straggler") {
      cfg.sim.straggler.kind = straggler_from_string(line_no, value);
    } else if (key == "straggler_constant") {
      cfg.sim.straggler.constant = parse_double(line_no, key, value);
    } else if (key == "straggler_log_mean") {
      cfg.sim.straggler.log_mean = parse_double(line_no, key, value);
    } else if (key == "straggler_log_sigma") {
      cfg.sim.straggler.log_sigma = parse_double(line_no, key, value);
    } else if (key == "straggler_slow_factor") {
      cfg.sim.straggler.slow_factor = parse_double(line_no, key, value);
    } else if (key == "straggler_slow_node") {
      cfg.sim.straggler.slow_node = parse_u32(line_no, key, value);
    } else if (key == "init") {
      cfg.sim.init.kind = init_from_string(line_no, value);
    } else if (key == "init_target_sq_err") {
      cfg.sim.init.target_sq_err = parse_double(line_no, key, value);
    } else if (key == "init_scale") {
      cfg.sim.init.scale = parse_double(line_no, key, value);
    } else if (key == "init_values") {
      cfg.sim.init.values = parse_double_list(line_no, key, value);
    } else if (key == "objective") {
      if (value == "quadratic") cfg.objective = ObjectiveKind::kQuadratic;
      else if (value == "logistic") cfg.objective = ObjectiveKind::kLogistic;
      else fail(line_no, "unknown objective '" + value + "'");
    } else if (key == "spectrum") {
      cfg.spectrum = parse_double_list(line_no, key, value);
    } else if (key == "optimum") {
      cfg.optimum = parse_double_list(line_no, key, value);
    } else if (key == "dataset") {
      cfg.dataset = value;
    } else if (key == "dataset_header") {
      cfg.dataset_header = parse_bool(line_no, key, value);
    } else if (key == "dataset_l2") {
      cfg.dataset_l2 = parse_double(line_no, key, value);
    } else if (key == "shard") {
      cfg.shard = parse_bool(line_no, key, value);
    } else if (key == "bound") {
      cfg.bounds.clear();
      for (const std::string& part : split_list(value)) {
        const auto kind = bound_kind_from_string(part);
        if (!kind) fail(line_no, "unknown bound '" + part + "'");
        cfg.bounds.push_back(*kind);
      }
    } else if (key == "lambda_variant") {
      const auto variant = lambda_variant_from_string(value);
      if (!variant) fail(line_no, "unknown lambda_variant '" + value + "'");
      cfg.lambda_variant = *variant;
    } else if (key == "grad_bound_c") {
      cfg.grad_bound_c = parse_double(line_no, key, value);
    } else if (key == "timeout_ms") {
      cfg.timeout_ms = parse_u64(line_no, key, value);
    } else if (key == "chaos_seed") {
      cfg.chaos_seed = parse_u64(line_no, key, value);
    } else {
      fail(line_no, "unknown key '" + key + "'");
    }
  }

  if (!seen.count("protocol")) throw ConfigError("missing required key 'protocol'");
  // Reference regime couples the elastic rate to the node count.
  if (!seen.count("beta_ea")) {
    if (cfg.sim.p == 0) throw ConfigError("p must be >= 1");
    cfg.sim.hyper.beta_ea = 0.8 / static_cast<double>(cfg.sim.p);
  }

  if (cfg.objective == ObjectiveKind::kQuadratic) {
    for (const char* k : {"dataset", "dataset_header", "dataset_l2"}) {
      if (seen.count(k)) {
        throw ConfigError(std::string(k) + " requires objective = logistic");
      }
    }
    if (cfg.spectrum.empty()) throw ConfigError("spectrum must be non-empty");
    for (double a : cfg.spectrum) {
      if (!(a > 0.0)) throw ConfigError("spectrum entries must be positive");
    }
    if (!cfg.optimum.empty() && cfg.optimum.size() != cfg.spectrum.size()) {
      throw ConfigError("optimum size must match spectrum size");
    }
  } else {
    for (const char* k : {"spectrum", "optimum"}) {
      if (seen.count(k)) {
        throw ConfigError(std::string(k) + " requires objective = quadratic");
      }
    }
    if (cfg.dataset.empty()) throw ConfigError("logistic objective requires dataset");
    if (!(cfg.dataset_l2 > 0.0)) throw ConfigError("dataset_l2 must be positive");
  }

  if (cfg.shard) {
    if (cfg.objective != ObjectiveKind::kLogistic) {
      throw ConfigError("shard = true requires objective = logistic");
    }
    if (cfg.backend == Backend::kTransport) {
      throw ConfigError("shard = true is not supported on the transport backend");
    }
  }

  if (cfg.backend == Backend::kTransport) {
    switch (cfg.sim.protocol) {
      case ProtocolKind::kAllReduce:
      case ProtocolKind::kElasticAvg:
      case ProtocolKind::kPullGossip:
      case ProtocolKind::kPushGossip:
        break;
      default:
        throw ConfigError(
            "transport backend requires protocol in {all-reduce, elastic-avg, "
            "pull-gossip, push-gossip}");
    }
  }

  if (cfg.trials < 1) throw ConfigError("trials must be >= 1");
  if (cfg.sim.p < 1) throw ConfigError("p must be >= 1");
  if (cfg.sim.rounds < 1) throw ConfigError("rounds must be >= 1");
  if (cfg.sim.events < 1) throw ConfigError("events must be >= 1");
  if (cfg.sim.trace_every < 1) throw ConfigError("trace_every must be >= 1");
  if (!(cfg.sigma_sq >= 0.0)) throw ConfigError("sigma_sq must be >= 0");
  if (cfg.grad_bound_c < 0.0) throw ConfigError("grad_bound_c must be >= 0");
  if (cfg.timeout_ms < 1) throw ConfigError("timeout_ms must be >= 1");
  if (cfg.sim.max_sim_time.has_value() && !(*cfg.sim.max_sim_time > 0.0)) {
    throw ConfigError("max_sim_time must be positive");
  }
  try {
    cfg.sim.hyper.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.emit_bound_report && cfg.sim.init.kind == InitSpec::Kind::kGaussianSpread) {
    throw ConfigError("bound_report requires a deterministic init");
  }
  return cfg;
}

std::string canonical_config_text(const RunConfig& cfg) {
  std::string out;
  const auto put = [&](std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  const auto put_sv = [&](std::string_view key, std::string_view value) {
    put(key, std::string(value));
  };

  put_sv("protocol", to_string(cfg.sim.protocol));
  put_sv("backend", to_string(cfg.backend));
  put("p", std::to_string(cfg.sim.p));
  put("trials", std::to_string(cfg.trials));
  put("seed", std::to_string(cfg.sim.seed));
  put("run_id", cfg.sim.run_id);
  put("output_dir", cfg.output_dir);
  {
    std::string emit;
    if (cfg.emit_trace) emit += "trace_jsonl";
    if (cfg.emit_summary) emit += emit.empty() ? "summary_json" : ",summary_json";
    if (cfg.emit_bound_report) emit += emit.empty() ? "bound_report" : ",bound_report";
    put("emit", emit);
  }

  put_sv("objective", to_string(cfg.objective));
  if (cfg.objective == ObjectiveKind::kQuadratic) {
    put("spectrum", join_doubles(cfg.spectrum));
    if (!cfg.optimum.empty()) put("optimum", join_doubles(cfg.optimum));
  } else {
    put("dataset", cfg.dataset);
    put("dataset_header", cfg.dataset_header ? "true" : "false");
    put("dataset_l2", format_double(cfg.dataset_l2));
  }
  put("shard", cfg.shard ? "true" : "false");
  put("sigma_sq", format_double(cfg.sigma_sq));

  put("rounds", std::to_string(cfg.sim.rounds));
  put("events", std::to_string(cfg.sim.events));
  put("trace_every", std::to_string(cfg.sim.trace_every));
  if (cfg.sim.max_sim_time.has_value()) {
    put("max_sim_time", format_double(*cfg.sim.max_sim_time));
  }
  put("exchange_latency", format_double(cfg.sim.exchange_latency));

  put("alpha0", format_double(cfg.sim.hyper.alpha0));
  put("anneal_factor", format_double(cfg.sim.hyper.anneal_factor));
  put("anneal_at", join_u64s(cfg.sim.hyper.anneal_at));
  put("mu", format_double(cfg.sim.hyper.mu));
  put("weight_decay", format_double(cfg.sim.hyper.weight_decay));
  put("beta_gossip", format_double(cfg.sim.hyper.beta_gossip));
  put("beta_ea", format_double(cfg.sim.hyper.beta_ea));
  put("tau", std::to_string(cfg.sim.hyper.tau));
  put("batch", std::to_string(cfg.sim.hyper.batch));
  put_sv("momentum_scope", to_string(cfg.sim.momentum_scope));

  put_sv("clock", to_string(cfg.sim.clock.kind));
  put("rate_per_node", format_double(cfg.sim.clock.rate_per_node));

  put_sv("straggler", to_string(cfg.sim.straggler.kind));
  put("straggler_constant", format_double(cfg.sim.straggler.constant));
  put("straggler_log_mean", format_double(cfg.sim.straggler.log_mean));
  put("straggler_log_sigma", format_double(cfg.sim.straggler.log_sigma));
  put("straggler_slow_factor", format_double(cfg.sim.straggler.slow_factor));
  put("straggler_slow_node", std::to_string(cfg.sim.straggler.slow_node));

  put_sv("init", to_string(cfg.sim.init.kind));
  put("init_target_sq_err", format_double(cfg.sim.init.target_sq_err));
  put("init_scale", format_double(cfg.sim.init.scale));
  if (!cfg.sim.init.values.empty()) put("init_values", join_doubles(cfg.sim.init.values));

  if (!cfg.bounds.empty()) {
    std::string bounds;
    for (std::size_t i = 0; i < cfg.bounds.size(); ++i) {
      if (i > 0) bounds += ',';
      bounds += to_string(cfg.bounds[i]);
    }
    put("bound", bounds);
  }
  put_sv("lambda_variant", to_string(cfg.lambda_variant));
  put("grad_bound_c", format_double(cfg.grad_bound_c));

  put("timeout_ms", std::to_string(cfg.timeout_ms));
  put("chaos_seed", std::to_string(cfg.chaos_seed));
  return out;
}

}  // namespace dsgd
