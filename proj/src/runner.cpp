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

#include "dsgd/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dsgd/mixing.hpp"
#include "dsgd/trace_io.hpp"
#include "dsgd/transport.hpp"

namespace dsgd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string trial_file_name(std::uint32_t k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "trace_trial%03u.jsonl", k);
  return buf;
}

// Bounds to validate when the config names none: the async theorem pair for
// async-pull, the synchronous envelope otherwise.
std::vector<BoundKind> default_bounds(ProtocolKind protocol) {
  if (protocol == ProtocolKind::kAsyncPull) {
    return {BoundKind::kAsyncOptimality, BoundKind::kAsyncConsensus};
  }
  return {BoundKind::kSyncOptimality};
}

struct InitErrors {
  double sq_err = 0.0;
  double sq_consensus = 0.0;
};

// Exact initial error terms for the bound envelopes. Requires the
// deterministic inits (parse_config already rejects gaussian-spread here).
InitErrors initial_errors(const SimConfig& sim, const Objective& obj) {
  const auto opt = obj.optimum();
  if (!opt.has_value()) {
    throw ConfigError("bound validation requires an objective with a known optimum");
  }
  const std::vector<NodeState> nodes = make_initial_nodes(sim, obj);
  std::vector<ParamVec> thetas;
  thetas.reserve(nodes.size());
  for (const NodeState& n : nodes) thetas.push_back(n.theta);
  const ParamVec mean = spatial_mean(thetas);

  InitErrors out;
  for (const ParamVec& th : thetas) {
    out.sq_err += squared_distance(th, *opt);
    out.sq_consensus += squared_distance(th, mean);
  }
  return out;
}

json report_json(const ValidationReport& report) {
  return json::parse(validation_report_to_json(report));
}

std::string format_matrix(const Eigen::MatrixXd& m) {
  std::ostringstream out;
  out << m.format(Eigen::IOFormat(Eigen::FullPrecision, 0, "  ", "\n", "  "));
  return out.str();
}

}  // namespace

BuiltObjective build_objective(const RunConfig& cfg) {
  BuiltObjective built;
  if (cfg.objective == ObjectiveKind::kQuadratic) {
    ParamVec opt = cfg.optimum.empty() ? ParamVec::zeros(cfg.spectrum.size())
                                       : ParamVec(cfg.optimum);
    built.eval = std::make_unique<QuadraticObjective>(cfg.spectrum, std::move(opt));
    return built;
  }

  auto full = load_csv_dataset(cfg.dataset, cfg.dataset_header, cfg.dataset_l2);
  if (cfg.shard) {
    const std::size_t n = full->num_samples();
    const std::size_t p = cfg.sim.p;
    if (n < p) throw ConfigError("sharding needs at least one sample per node");
    built.shards.reserve(p);
    for (std::size_t i = 0; i < p; ++i) {
      auto shard = std::make_unique<LogisticObjective>(*full);
      shard->set_sample_range(i * n / p, (i + 1) * n / p);
      built.shards.push_back(std::move(shard));
    }
  }
  built.eval = std::move(full);
  return built;
}

ExperimentOutcome run_experiment(const RunConfig& cfg, std::ostream& log) {
  const auto wall0 = std::chrono::steady_clock::now();
  ExperimentOutcome outcome;

  const char* env_dir = std::getenv("DSGD_OUTPUT_DIR");
  outcome.output_dir = env_dir != nullptr && *env_dir != '\0' ? env_dir : cfg.output_dir;
  const fs::path dir(outcome.output_dir);
  fs::create_directories(dir);

  const BuiltObjective built = build_objective(cfg);
  const Objective& eval = *built.eval;
  std::vector<const Objective*> shard_ptrs;
  for (const auto& s : built.shards) shard_ptrs.push_back(s.get());

  SimConfig sim = cfg.sim;
  sim.noise = cfg.sigma_sq > 0.0 ? NoiseModel::gaussian_total(cfg.sigma_sq, eval.dim())
                                 : NoiseModel::zero(eval.dim());

  const bool async_horizon = sim.protocol == ProtocolKind::kAsyncPull ||
                             (sim.protocol == ProtocolKind::kElasticAvg &&
                              sim.clock.kind == ClockModel::Kind::kPoisson);
  log << "running " << to_string(sim.protocol) << " on " << to_string(cfg.backend)
      << ": p=" << sim.p << ", " << (async_horizon ? sim.events : sim.rounds)
      << (async_horizon ? " events" : " rounds") << ", " << cfg.trials << " trial(s)\n";

  std::vector<std::vector<TraceRecord>> ensemble;
  ensemble.reserve(cfg.trials);
  double max_grad_norm = 0.0;
  double sim_time_sum = 0.0;
  double final_sq_consensus = 0.0;
  double final_loss = 0.0;
  double final_sq_opt = 0.0;
  bool have_sq_opt = true;

  const std::uint32_t report_every = std::max<std::uint32_t>(1, cfg.trials / 10);
  for (std::uint32_t k = 0; k < cfg.trials; ++k) {
    SimConfig trial = sim;
    trial.run_id = sim.run_id + "/trial" + std::to_string(k);

    RunResult result;
    if (cfg.backend == Backend::kTransport) {
      TransportOptions options;
      options.timeout = std::chrono::milliseconds(cfg.timeout_ms);
      options.chaos_seed = cfg.chaos_seed;
      result = run_transport(trial, eval, options);
    } else if (cfg.shard) {
      result = run_simulation(trial, eval, shard_ptrs);
    } else {
      result = run_simulation(trial, eval);
    }

    max_grad_norm = std::max(max_grad_norm, result.max_grad_norm);
    sim_time_sum += result.sim_time;
    const TraceRecord& last = result.trace.back();
    const double last_consensus = last.sq_err_consensus;
    final_sq_consensus += last.sq_err_consensus;
    final_loss += last.loss_mean;
    if (last.sq_err_opt.has_value()) {
      final_sq_opt += *last.sq_err_opt;
    } else {
      have_sq_opt = false;
    }

    if (cfg.emit_trace) {
      const fs::path path = dir / trial_file_name(k);
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open " + path.string());
      write_trace_jsonl(out, result.trace);
      if (!out) throw std::runtime_error("write failed for " + path.string());
      outcome.files.push_back(path.string());
    }
    ensemble.push_back(std::move(result.trace));

    if ((k + 1) % report_every == 0 || k + 1 == cfg.trials) {
      log << "  trial " << (k + 1) << "/" << cfg.trials
          << " done, final consensus err " << last_consensus << "\n";
    }
  }
  const double trials_d = static_cast<double>(cfg.trials);

  if (cfg.emit_bound_report) {
    const auto [m, lipschitz] = eval.convexity_params();
    const InitErrors init = initial_errors(sim, eval);
    const double c_used =
        cfg.grad_bound_c > 0.0 ? cfg.grad_bound_c : 1.1 * max_grad_norm;
    const std::vector<BoundKind> kinds =
        cfg.bounds.empty() ? default_bounds(sim.protocol) : cfg.bounds;

    const auto make_spec = [&](LambdaVariant variant) {
      try {
        return BoundSpec(sim.p, m, lipschitz, sim.hyper.alpha0, cfg.sigma_sq,
                         init.sq_err, init.sq_consensus, sim.hyper.beta_gossip, c_used,
                         variant);
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("bound hypotheses violated: ") + e.what());
      }
    };

    for (BoundKind kind : kinds) {
      try {
        outcome.reports.push_back(
            validate_trace(ensemble, make_spec(cfg.lambda_variant), kind));
        if (kind == BoundKind::kAsyncConsensus) {
          // The consensus envelope depends on lambda; report both readings.
          const LambdaVariant other = cfg.lambda_variant == LambdaVariant::kTheorem
                                          ? LambdaVariant::kDiagonalization
                                          : LambdaVariant::kTheorem;
          outcome.reports.push_back(validate_trace(ensemble, make_spec(other), kind));
        }
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("bound validation: ") + e.what());
      }
    }

    json arr = json::array();
    for (const ValidationReport& r : outcome.reports) arr.push_back(report_json(r));
    const fs::path path = dir / "bound_report.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << arr.dump(2) << "\n";
    outcome.files.push_back(path.string());

    for (const ValidationReport& r : outcome.reports) {
      log << "  bound " << to_string(r.bound_kind) << " (lambda "
          << to_string(r.lambda_variant) << "): " << (r.pass ? "pass" : "FAIL") << "\n";
      if (!r.pass) outcome.exit_code = 1;
    }
  }

  outcome.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();

  if (cfg.emit_summary) {
    json final_block = {
        {"sq_err_consensus_mean", final_sq_consensus / trials_d},
        {"loss_mean", final_loss / trials_d},
    };
    final_block["sq_err_opt_mean"] =
        have_sq_opt ? json(final_sq_opt / trials_d) : json(nullptr);

    json summary = {
        {"config", canonical_config_text(cfg)},
        {"run_id", sim.run_id},
        {"seed", sim.seed},
        {"protocol", std::string(to_string(sim.protocol))},
        {"backend", std::string(to_string(cfg.backend))},
        {"trials", cfg.trials},
        {"sim_time_mean", sim_time_sum / trials_d},
        {"max_grad_norm", max_grad_norm},
        {"wall_seconds", outcome.wall_seconds},
        {"final", final_block},
        {"bound_pass", cfg.emit_bound_report
                           ? json(std::all_of(outcome.reports.begin(),
                                              outcome.reports.end(),
                                              [](const ValidationReport& r) {
                                                return r.pass;
                                              }))
                           : json(nullptr)},
    };
    const fs::path path = dir / "summary.json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << summary.dump(2) << "\n";
    outcome.files.push_back(path.string());
  }

  log << "wrote " << outcome.files.size() << " file(s) to " << outcome.output_dir << "\n";
  return outcome;
}

std::string mixing_diagnostics_text(std::uint32_t p, double beta) {
  if (p < 1 || p > 8) throw ConfigError("diagnose-mixing supports 1 <= p <= 8");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must be in [0, 1]");

  std::ostringstream out;
  out.precision(17);
  out << "p = " << p << ", beta = " << beta << "\n\n";

  if (p <= 5) {
    const Eigen::MatrixXd closed = expected_second_moment_pull(p);
    const Eigen::MatrixXd enumerated = enumerate_second_moment_pull(p);
    out << "pull second moment E[M^T M], closed form:\n"
        << format_matrix(closed) << "\n";
    out << "enumerated over p^p assignments:\n" << format_matrix(enumerated) << "\n";
    out << "max |closed - enumerated| = "
        << (closed - enumerated).cwiseAbs().maxCoeff() << "\n\n";
  } else {
    out << "pull enumeration skipped (supported for p <= 5)\n\n";
  }

  const AsyncMoments closed = expected_second_moment_async(p, beta);
  const AsyncMoments enumerated = enumerate_second_moment_async(p, beta);
  out << "async E[D^T D], closed form:\n" << format_matrix(closed.dtd) << "\n";
  out << "enumerated over p^2 pairs:\n" << format_matrix(enumerated.dtd) << "\n";
  out << "max |closed - enumerated| = "
      << (closed.dtd - enumerated.dtd).cwiseAbs().maxCoeff() << "\n\n";

  out << "async E[D^T 1 1^T D], closed form:\n"
      << format_matrix(closed.dt_ones_d) << "\n";
  out << "enumerated:\n" << format_matrix(enumerated.dt_ones_d) << "\n";
  out << "max |closed - enumerated| = "
      << (closed.dt_ones_d - enumerated.dt_ones_d).cwiseAbs().maxCoeff() << "\n\n";

  out << "consensus operator, closed form:\n"
      << format_matrix(closed.consensus_op) << "\n\n";

  const LambdaPair lambdas = contraction_lambdas(p, beta);
  out << "lambda_theorem         = " << lambdas.theorem << "\n";
  out << "lambda_diagonalization = " << lambdas.diagonalization << "\n";
  out << "lambda gap             = " << lambdas.gap << "\n";
  return out.str();
}

}  // namespace dsgd
