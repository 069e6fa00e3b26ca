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

#ifndef DSGD_BOUNDS_HPP_
#define DSGD_BOUNDS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dsgd/core.hpp"
#include "dsgd/mixing.hpp"

namespace dsgd {

enum class BoundKind { kSyncOptimality, kAsyncOptimality, kAsyncConsensus };

std::string_view to_string(BoundKind kind);
std::optional<BoundKind> bound_kind_from_string(std::string_view name);

// Inputs to the convergence envelopes. Construction enforces the step-size
// condition 0 < alpha <= 2/(m+L) plus domain checks, so an envelope is never
// evaluated outside its theorem's hypotheses.
class BoundSpec {
 public:
  BoundSpec(std::uint32_t p, double m, double lipschitz, double alpha, double sigma_sq,
            double init_sq_err, double init_sq_consensus = 0.0, double beta = 0.5,
            double grad_bound_c = 0.0,
            LambdaVariant lambda_variant = LambdaVariant::kTheorem);

  std::uint32_t p() const { return p_; }
  double m() const { return m_; }
  double lipschitz() const { return lipschitz_; }
  double alpha() const { return alpha_; }
  double sigma_sq() const { return sigma_sq_; }
  double init_sq_err() const { return init_sq_err_; }
  double init_sq_consensus() const { return init_sq_consensus_; }
  double beta() const { return beta_; }
  double grad_bound_c() const { return grad_bound_c_; }
  LambdaVariant lambda_variant() const { return lambda_variant_; }

 private:
  std::uint32_t p_;
  double m_;
  double lipschitz_;
  double alpha_;
  double sigma_sq_;
  double init_sq_err_;
  double init_sq_consensus_;
  double beta_;
  double grad_bound_c_;
  LambdaVariant lambda_variant_;
};

// Synchronous envelope on E sum_i ||theta_t,i - theta*||^2:
//   (1 - 2 alpha mL/(m+L))^t * init + p alpha sigma^2 (m+L) / (2mL).
double sync_optimality_bound(const BoundSpec& spec, std::uint64_t t);

// Asynchronous envelope: the contraction weakens to (2 alpha / p) mL/(m+L)
// per master tick (one node steps per tick); the residual is unchanged.
double async_optimality_bound(const BoundSpec& spec, std::uint64_t t);

// Asynchronous consensus envelope on E sum_i ||theta_t,i - mean||^2 with
// lambda from the configured variant:
//   (lambda (1 - alpha m / p))^t * init_consensus
//     + lambda alpha^2 (C^2 + sigma^2) / (1 - lambda (1 - alpha m / p)).
// Throws when the decay base reaches 1.
double async_consensus_bound(const BoundSpec& spec, std::uint64_t t);

double evaluate_bound(BoundKind kind, const BoundSpec& spec, std::uint64_t t);

struct BoundViolation {
  std::uint64_t t = 0;
  double ensemble_mean = 0.0;
  double bound = 0.0;
  double allowance = 0.0;  // bound + 3 * stderr actually compared against
};

struct ValidationReport {
  BoundKind bound_kind = BoundKind::kSyncOptimality;
  LambdaVariant lambda_variant = LambdaVariant::kTheorem;
  std::size_t trials = 0;
  std::uint64_t points = 0;
  double c_used = 0.0;
  double lambda_theorem = 0.0;
  double lambda_diagonalization = 0.0;
  double lambda_gap = 0.0;
  std::vector<BoundViolation> violations;
  bool pass = false;
};

std::string validation_report_to_json(const ValidationReport& report);

// Compares the ensemble mean of the bounded quantity (sq_err_opt for
// optimality bounds, sq_err_consensus for the consensus bound) against the
// envelope at every logged t, allowing 3 standard errors of Monte-Carlo
// slack. Requires >= 30 aligned trials.
ValidationReport validate_trace(const std::vector<std::vector<TraceRecord>>& ensemble,
                                const BoundSpec& spec, BoundKind kind);

}  // namespace dsgd

#endif  // DSGD_BOUNDS_HPP_
