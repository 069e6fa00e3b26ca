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

#include "dsgd/mixing.hpp"

#include <cmath>
#include <stdexcept>

namespace dsgd {

namespace {

void check_beta(double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("mixing beta must be in [0, 1]");
  }
}

}  // namespace

Eigen::MatrixXd pull_matrix(std::span<const std::uint32_t> assignment) {
  const std::size_t p = assignment.size();
  if (p == 0) throw std::invalid_argument("pull_matrix: empty assignment");
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    if (assignment[i] >= p) {
      throw std::invalid_argument("pull_matrix: partner index out of range");
    }
    m(i, i) += 0.5;
    m(i, assignment[i]) += 0.5;
  }
  return m;
}

Eigen::MatrixXd async_matrix(std::uint32_t i, std::uint32_t j, double beta,
                             std::uint32_t p) {
  if (i >= p || j >= p) {
    throw std::invalid_argument("async_matrix: node index out of range");
  }
  check_beta(beta);
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(p, p);
  if (i != j) {
    d(i, i) = 1.0 - beta;
    d(i, j) = beta;
  }
  return d;
}

Eigen::MatrixXd expected_second_moment_pull(std::uint32_t p) {
  if (p == 0) throw std::invalid_argument("p must be >= 1");
  const double n = static_cast<double>(p);
  return 0.5 * (Eigen::MatrixXd::Identity(p, p).eval() +
                Eigen::MatrixXd::Constant(p, p, 1.0 / n).eval());
}

Eigen::MatrixXd enumerate_second_moment_pull(std::uint32_t p) {
  if (p == 0 || p > 5) {
    throw std::invalid_argument("pull enumeration supports 1 <= p <= 5");
  }
  std::vector<std::uint32_t> assignment(p, 0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  std::uint64_t count = 0;
  // Odometer over all p^p assignments.
  while (true) {
    const Eigen::MatrixXd m = pull_matrix(assignment);
    acc += m.transpose() * m;
    ++count;
    std::size_t pos = 0;
    while (pos < p && ++assignment[pos] == p) {
      assignment[pos] = 0;
      ++pos;
    }
    if (pos == p) break;
  }
  return acc / static_cast<double>(count);
}

AsyncMoments expected_second_moment_async(std::uint32_t p, double beta) {
  if (p == 0) throw std::invalid_argument("p must be >= 1");
  check_beta(beta);
  const double n = static_cast<double>(p);
  const double b = beta;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Constant(p, p, 1.0);

  AsyncMoments out;
  out.dtd = (1.0 - 2.0 * b * (1.0 - b) / n) * eye + (2.0 * b * (1.0 - b) / (n * n)) * ones;
  out.dt_ones_d = (2.0 * b * b / n) * eye + (1.0 - 2.0 * b * b / (n * n)) * ones;
  out.consensus_op = out.dtd - out.dt_ones_d / n;
  return out;
}

AsyncMoments enumerate_second_moment_async(std::uint32_t p, double beta) {
  if (p == 0 || p > 8) {
    throw std::invalid_argument("async enumeration supports 1 <= p <= 8");
  }
  check_beta(beta);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(p);
  Eigen::MatrixXd dtd = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd dt_ones_d = Eigen::MatrixXd::Zero(p, p);
  for (std::uint32_t i = 0; i < p; ++i) {
    for (std::uint32_t j = 0; j < p; ++j) {
      const Eigen::MatrixXd d = async_matrix(i, j, beta, p);
      dtd += d.transpose() * d;
      const Eigen::VectorXd dt1 = d.transpose() * one;
      dt_ones_d += dt1 * dt1.transpose();
    }
  }
  const double count = static_cast<double>(p) * static_cast<double>(p);
  AsyncMoments out;
  out.dtd = dtd / count;
  out.dt_ones_d = dt_ones_d / count;
  out.consensus_op = out.dtd - out.dt_ones_d / static_cast<double>(p);
  return out;
}

std::string_view to_string(LambdaVariant variant) {
  return variant == LambdaVariant::kTheorem ? "theorem" : "diagonalization";
}

std::optional<LambdaVariant> lambda_variant_from_string(std::string_view name) {
  if (name == "theorem") return LambdaVariant::kTheorem;
  if (name == "diagonalization") return LambdaVariant::kDiagonalization;
  return std::nullopt;
}

double contraction_lambda(std::uint32_t p, double beta, LambdaVariant variant) {
  if (p == 0) throw std::invalid_argument("p must be >= 1");
  check_beta(beta);
  const double n = static_cast<double>(p);
  const double b = beta;
  const double base = 1.0 - 2.0 * b * (1.0 - b) / n;
  switch (variant) {
    case LambdaVariant::kTheorem:
      return base - 2.0 * b * b / n;
    case LambdaVariant::kDiagonalization:
      return base - 2.0 * b * b / (n * n);
  }
  throw std::invalid_argument("unknown lambda variant");
}

LambdaPair contraction_lambdas(std::uint32_t p, double beta) {
  LambdaPair pair{};
  pair.theorem = contraction_lambda(p, beta, LambdaVariant::kTheorem);
  pair.diagonalization = contraction_lambda(p, beta, LambdaVariant::kDiagonalization);
  pair.gap = pair.diagonalization - pair.theorem;
  return pair;
}

WeightState WeightState::identity(std::uint32_t p) {
  if (p == 0) throw std::invalid_argument("p must be >= 1");
  WeightState ws;
  ws.v = Eigen::MatrixXd::Identity(p, p);
  ws.w = Eigen::VectorXd::Ones(p);
  return ws;
}

WeightState evolve_weights(WeightState ws, const Eigen::MatrixXd& mix) {
  if (mix.rows() != ws.v.rows() || mix.cols() != ws.v.rows()) {
    throw std::invalid_argument("evolve_weights: mixing matrix shape mismatch");
  }
  ws.v = (mix * ws.v).eval();
  ws.w = ws.v.rowwise().sum();
  return ws;
}

double diffusion_potential(const WeightState& ws, std::span<const ParamVec> theta0) {
  const std::size_t p = static_cast<std::size_t>(ws.v.rows());
  if (theta0.size() != p) {
    throw std::invalid_argument("diffusion_potential: theta0 size must equal p");
  }
  const std::size_t d = theta0[0].dim();
  for (const ParamVec& th : theta0) {
    if (th.dim() != d) {
      throw std::invalid_argument("diffusion_potential: theta0 dimension mismatch");
    }
  }

  double phi = 0.0;
  std::vector<ParamVec> contrib(p, ParamVec::zeros(d));
  for (std::size_t i = 0; i < p; ++i) {
    ParamVec row_mean = ParamVec::zeros(d);
    for (std::size_t j = 0; j < p; ++j) {
      ParamVec u = theta0[j];
      u *= ws.v(i, j);
      row_mean += u;
      contrib[j] = std::move(u);
    }
    row_mean *= 1.0 / static_cast<double>(p);
    for (std::size_t j = 0; j < p; ++j) {
      phi += squared_distance(contrib[j], row_mean);
    }
  }
  return phi;
}

}  // namespace dsgd
