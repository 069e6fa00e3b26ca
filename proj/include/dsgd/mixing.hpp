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

#ifndef DSGD_MIXING_HPP_
#define DSGD_MIXING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dsgd/param_vec.hpp"
#include "dsgd/rng.hpp"

namespace dsgd {

// Second-moment matrices of the random mixing operators, in closed form and
// by exhaustive enumeration. The closed forms are what the convergence
// analysis uses; the enumerations are independent oracles over the full
// discrete distribution (p^p pull assignments, p^2 async pairs).

// Pull mixing matrix M = (1/2) sum_i e_i (e_i + e_{j_i})^T for one partner
// assignment. Right-stochastic; row i is the identity row when j_i == i.
Eigen::MatrixXd pull_matrix(std::span<const std::uint32_t> assignment);

// Async pair matrix D = I + beta e_i (e_j - e_i)^T. Exactly the identity
// when i == j (the beta terms cancel).
Eigen::MatrixXd async_matrix(std::uint32_t i, std::uint32_t j, double beta,
                             std::uint32_t p);

// E[M^T M] = (1/2)(I + (1/p) 1 1^T). Eigenvalues: 1 on the consensus
// direction, 1/2 with multiplicity p-1.
Eigen::MatrixXd expected_second_moment_pull(std::uint32_t p);

// Exhaustive average of M^T M over all p^p assignments. p <= 5.
Eigen::MatrixXd enumerate_second_moment_pull(std::uint32_t p);

struct AsyncMoments {
  Eigen::MatrixXd dtd;           // E[D^T D]
  Eigen::MatrixXd dt_ones_d;     // E[D^T 1 1^T D]
  Eigen::MatrixXd consensus_op;  // E[D^T D] - (1/p) E[D^T 1 1^T D]
};

// Closed forms:
//   E[D^T D]       = (1 - 2b(1-b)/p) I + (2b(1-b)/p^2) 1 1^T
//   E[D^T 1 1^T D] = (2b^2/p) I + (1 - 2b^2/p^2) 1 1^T
// with b = beta; consensus_op annihilates the consensus direction.
AsyncMoments expected_second_moment_async(std::uint32_t p, double beta);

// Exhaustive average over all p^2 (i, j) pairs. p <= 8.
AsyncMoments enumerate_second_moment_async(std::uint32_t p, double beta);

enum class LambdaVariant { kTheorem, kDiagonalization };

std::string_view to_string(LambdaVariant variant);
std::optional<LambdaVariant> lambda_variant_from_string(std::string_view name);

// Consensus contraction factor for the async pull analysis.
//   theorem:         1 - 2b(1-b)/p - 2b^2/p     (= 1 - 2b/p)
//   diagonalization: 1 - 2b(1-b)/p - 2b^2/p^2   (consensus_op's nonzero eigenvalue)
// The diagonalization value is never below the theorem value; their gap is
// 2b^2(1/p - 1/p^2).
double contraction_lambda(std::uint32_t p, double beta, LambdaVariant variant);

struct LambdaPair {
  double theorem;
  double diagonalization;
  double gap;  // diagonalization - theorem, >= 0
};

LambdaPair contraction_lambdas(std::uint32_t p, double beta);

// Diffusion weights: v starts as the identity (node i holds exactly its own
// initial parameter) and left-multiplies by each round's mixing matrix;
// w tracks row sums.
struct WeightState {
  Eigen::MatrixXd v;
  Eigen::VectorXd w;

  static WeightState identity(std::uint32_t p);
};

WeightState evolve_weights(WeightState ws, const Eigen::MatrixXd& mix);

// Diffusion potential
//   Phi = sum_i sum_j || v_ij theta_j(0) - (1/p) sum_j' v_ij' theta_j'(0) ||^2,
// the dispersion of each row's weighted contributions around the row mean.
double diffusion_potential(const WeightState& ws, std::span<const ParamVec> theta0);

}  // namespace dsgd

#endif  // DSGD_MIXING_HPP_
