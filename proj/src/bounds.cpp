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

#include "dsgd/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dsgd {

std::string_view to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::kSyncOptimality:
      return "sync-optimality";
    case BoundKind::kAsyncOptimality:
      return "async-optimality";
    case BoundKind::kAsyncConsensus:
      return "async-consensus";
  }
  return "unknown";
}

std::optional<BoundKind> bound_kind_from_string(std::string_view name) {
  for (BoundKind k : {BoundKind::kSyncOptimality, BoundKind::kAsyncOptimality,
                      BoundKind::kAsyncConsensus}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

BoundSpec::BoundSpec(std::uint32_t p, double m, double lipschitz, double alpha,
                     double sigma_sq, double init_sq_err, double init_sq_consensus,
                     double beta, double grad_bound_c, LambdaVariant lambda_variant)
    : p_(p),
      m_(m),
      lipschitz_(lipschitz),
      alpha_(alpha),
      sigma_sq_(sigma_sq),
      init_sq_err_(init_sq_err),
      init_sq_consensus_(init_sq_consensus),
      beta_(beta),
      grad_bound_c_(grad_bound_c),
      lambda_variant_(lambda_variant) {
  if (p_ == 0) throw std::invalid_argument("p must be >= 1");
  if (!(m_ > 0.0)) throw std::invalid_argument("m must be positive");
  if (!(lipschitz_ >= m_)) throw std::invalid_argument("L must be >= m");
  if (!(alpha_ > 0.0 && alpha_ <= 2.0 / (m_ + lipschitz_))) {
    throw std::invalid_argument("step size must satisfy 0 < alpha <= 2/(m+L)");
  }
  if (!(sigma_sq_ >= 0.0)) throw std::invalid_argument("sigma^2 must be >= 0");
  if (!(init_sq_err_ >= 0.0) || !(init_sq_consensus_ >= 0.0)) {
    throw std::invalid_argument("initial squared errors must be >= 0");
  }
  if (!(beta_ > 0.0 && beta_ < 1.0)) {
    throw std::invalid_argument("beta must be in (0, 1)");
  }
  if (!(grad_bound_c_ >= 0.0)) throw std::invalid_argument("C must be >= 0");
}

namespace {

double harmonic_rate(const BoundSpec& s) {
  return s.m() * s.lipschitz() / (s.m() + s.lipschitz());
}

double noise_residual(const BoundSpec& s) {
  return static_cast<double>(s.p()) * s.alpha() * s.sigma_sq() *
         (s.m() + s.lipschitz()) / (2.0 * s.m() * s.lipschitz());
}

}  // namespace

double sync_optimality_bound(const BoundSpec& spec, std::uint64_t t) {
  const double rate = 1.0 - 2.0 * spec.alpha() * harmonic_rate(spec);
  return std::pow(rate, static_cast<double>(t)) * spec.init_sq_err() +
         noise_residual(spec);
}

double async_optimality_bound(const BoundSpec& spec, std::uint64_t t) {
  const double rate =
      1.0 - (2.0 * spec.alpha() / static_cast<double>(spec.p())) * harmonic_rate(spec);
  return std::pow(rate, static_cast<double>(t)) * spec.init_sq_err() +
         noise_residual(spec);
}

double async_consensus_bound(const BoundSpec& spec, std::uint64_t t) {
  const double lambda = contraction_lambda(spec.p(), spec.beta(), spec.lambda_variant());
  const double base =
      lambda * (1.0 - spec.alpha() * spec.m() / static_cast<double>(spec.p()));
  if (!(base < 1.0)) {
    throw std::invalid_argument("consensus bound requires lambda*(1 - alpha m / p) < 1");
  }
  const double c_sq = spec.grad_bound_c() * spec.grad_bound_c();
  const double residual =
      lambda * spec.alpha() * spec.alpha() * (c_sq + spec.sigma_sq()) / (1.0 - base);
  return std::pow(base, static_cast<double>(t)) * spec.init_sq_consensus() + residual;
}

double evaluate_bound(BoundKind kind, const BoundSpec& spec, std::uint64_t t) {
  switch (kind) {
    case BoundKind::kSyncOptimality:
      return sync_optimality_bound(spec, t);
    case BoundKind::kAsyncOptimality:
      return async_optimality_bound(spec, t);
    case BoundKind::kAsyncConsensus:
      return async_consensus_bound(spec, t);
  }
  throw std::invalid_argument("unknown bound kind");
}

std::string validation_report_to_json(const ValidationReport& report) {
  nlohmann::json j;
  j["bound_kind"] = std::string(to_string(report.bound_kind));
  j["lambda_variant"] = report.lambda_variant == LambdaVariant::kTheorem
                            ? "theorem"
                            : "diagonalization";
  j["trials"] = report.trials;
  j["points"] = report.points;
  j["c_used"] = report.c_used;
  j["lambda_theorem"] = report.lambda_theorem;
  j["lambda_diagonalization"] = report.lambda_diagonalization;
  j["lambda_gap"] = report.lambda_gap;
  j["pass"] = report.pass;
  j["violations"] = nlohmann::json::array();
  for (const BoundViolation& v : report.violations) {
    nlohmann::json jv;
    jv["t"] = v.t;
    jv["ensemble_mean"] = v.ensemble_mean;
    jv["bound"] = v.bound;
    jv["allowance"] = v.allowance;
    j["violations"].push_back(jv);
  }
  return j.dump(2);
}

ValidationReport validate_trace(const std::vector<std::vector<TraceRecord>>& ensemble,
                                const BoundSpec& spec, BoundKind kind) {
  if (ensemble.size() < 30) {
    throw std::invalid_argument("bound validation needs at least 30 trials");
  }
  const std::size_t points = ensemble[0].size();
  if (points == 0) throw std::invalid_argument("empty trace in ensemble");
  for (const auto& trace : ensemble) {
    if (trace.size() != points) {
      throw std::invalid_argument("ensemble traces are not aligned (length mismatch)");
    }
    for (std::size_t k = 0; k < points; ++k) {
      if (trace[k].t != ensemble[0][k].t) {
        throw std::invalid_argument("ensemble traces are not aligned (t grid mismatch)");
      }
    }
  }

  ValidationReport report;
  report.bound_kind = kind;
  report.lambda_variant = spec.lambda_variant();
  report.trials = ensemble.size();
  report.points = points;
  report.c_used = spec.grad_bound_c();
  const LambdaPair lambdas = contraction_lambdas(spec.p(), spec.beta());
  report.lambda_theorem = lambdas.theorem;
  report.lambda_diagonalization = lambdas.diagonalization;
  report.lambda_gap = lambdas.gap;

  const double n = static_cast<double>(ensemble.size());
  for (std::size_t k = 0; k < points; ++k) {
    const std::uint64_t t = ensemble[0][k].t;
    double mean = 0.0;
    for (const auto& trace : ensemble) {
      double value = 0.0;
      if (kind == BoundKind::kAsyncConsensus) {
        value = trace[k].sq_err_consensus;
      } else {
        if (!trace[k].sq_err_opt.has_value()) {
          throw std::invalid_argument("optimality validation needs sq_err_opt in traces");
        }
        value = *trace[k].sq_err_opt;
      }
      mean += value;
    }
    mean /= n;

    double var = 0.0;
    for (const auto& trace : ensemble) {
      const double value = kind == BoundKind::kAsyncConsensus
                               ? trace[k].sq_err_consensus
                               : *trace[k].sq_err_opt;
      var += (value - mean) * (value - mean);
    }
    var /= (n - 1.0);
    const double stderr_mean = std::sqrt(var / n);

    const double bound = evaluate_bound(kind, spec, t);
    const double allowance = bound + 3.0 * stderr_mean;
    if (mean > allowance) {
      report.violations.push_back({t, mean, bound, allowance});
    }
  }
  report.pass = report.violations.empty();
  return report;
}

}  // namespace dsgd
