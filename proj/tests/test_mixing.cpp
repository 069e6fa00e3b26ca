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

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dsgd/core.hpp"
#include "dsgd/mixing.hpp"
#include "dsgd/protocols.hpp"
#include "dsgd/rng.hpp"

using namespace dsgd;

namespace {

Eigen::MatrixXd ones_outer(std::uint32_t p) {
  return Eigen::MatrixXd::Ones(p, p);
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("pull matrix construction oracles") {
  const std::uint32_t swap2[] = {1, 0};
  Eigen::MatrixXd m = pull_matrix(swap2);
  CHECK(m(0, 0) == 0.5);
  CHECK(m(0, 1) == 0.5);
  CHECK(m(1, 0) == 0.5);
  CHECK(m(1, 1) == 0.5);

  const std::uint32_t self3[] = {0, 1, 2};
  CHECK(max_abs_diff(pull_matrix(self3), Eigen::MatrixXd::Identity(3, 3)) == 0.0);

  const std::uint32_t both_to_first[] = {0, 0};
  Eigen::MatrixXd m2 = pull_matrix(both_to_first);
  CHECK(m2(0, 0) == 1.0);
  CHECK(m2(0, 1) == 0.0);
  CHECK(m2(1, 0) == 0.5);
  CHECK(m2(1, 1) == 0.5);

  const std::uint32_t bad[] = {5, 0};
  CHECK_THROWS(pull_matrix(bad));
}

TEST_CASE("pull matrices are right stochastic over random assignments") {
  RngStream rng(17);
  for (std::uint32_t p = 2; p <= 8; ++p) {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<std::uint32_t> assign(p);
      for (auto& j : assign) j = rng.uniform_index(p);
      const Eigen::MatrixXd m = pull_matrix(assign);
      for (std::uint32_t i = 0; i < p; ++i) {
        CHECK(std::abs(m.row(i).sum() - 1.0) <= 1e-12);
        CHECK(m.row(i).minCoeff() >= 0.0);
        CHECK(m.row(i).maxCoeff() <= 1.0);
      }
    }
  }
}

TEST_CASE("monte carlo mean of M^T M approaches the closed form") {
  RngStream rng(23);
  const std::uint32_t p = 4;
  const int n = 10000;
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(p, p);
  std::vector<std::uint32_t> assign(p);
  for (int trial = 0; trial < n; ++trial) {
    for (auto& j : assign) j = rng.uniform_index(p);
    const Eigen::MatrixXd m = pull_matrix(assign);
    acc += m.transpose() * m;
  }
  acc /= n;
  CHECK(max_abs_diff(acc, expected_second_moment_pull(p)) <=
        4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("async matrix construction oracles") {
  CHECK(max_abs_diff(async_matrix(0, 1, 0.0, 3), Eigen::MatrixXd::Identity(3, 3)) ==
        0.0);
  CHECK(max_abs_diff(async_matrix(2, 2, 0.7, 4), Eigen::MatrixXd::Identity(4, 4)) ==
        0.0);  // i == j cancels exactly

  Eigen::MatrixXd d = async_matrix(0, 1, 0.5, 2);
  CHECK(d(0, 0) == 0.5);
  CHECK(d(0, 1) == 0.5);
  CHECK(d(1, 0) == 0.0);
  CHECK(d(1, 1) == 1.0);

  CHECK_THROWS(async_matrix(9, 0, 0.5, 2));
  CHECK_THROWS(async_matrix(0, 0, 1.5, 2));
}

TEST_CASE("pull second moment closed form equals enumeration") {
  Eigen::MatrixXd p2 = expected_second_moment_pull(2);
  CHECK(p2(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(p2(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(expected_second_moment_pull(1)(0, 0) == doctest::Approx(1.0));

  for (std::uint32_t p = 2; p <= 5; ++p) {
    CHECK(max_abs_diff(expected_second_moment_pull(p),
                       enumerate_second_moment_pull(p)) <= 1e-12);
  }
}

TEST_CASE("pull second moment eigenvalues are 1 and 1/2") {
  const std::uint32_t p = 4;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(expected_second_moment_pull(p));
  const Eigen::VectorXd ev = es.eigenvalues();
  CHECK(ev(p - 1) == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint32_t k = 0; k + 1 < p; ++k) {
    CHECK(ev(k) == doctest::Approx(0.5).epsilon(1e-12));
  }
  // Top eigenvector is the consensus direction.
  Eigen::VectorXd top = es.eigenvectors().col(p - 1);
  top /= top(0);
  for (std::uint32_t i = 0; i < p; ++i) {
    CHECK(top(i) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("async second moments match enumeration for all tested p and beta") {
  for (std::uint32_t p = 2; p <= 8; ++p) {
    for (double beta : {0.1, 0.5, 0.9}) {
      const AsyncMoments closed = expected_second_moment_async(p, beta);
      const AsyncMoments enumerated = enumerate_second_moment_async(p, beta);
      CHECK(max_abs_diff(closed.dtd, enumerated.dtd) <= 1e-12);
      CHECK(max_abs_diff(closed.dt_ones_d, enumerated.dt_ones_d) <= 1e-12);
      CHECK(max_abs_diff(closed.consensus_op, enumerated.consensus_op) <= 1e-12);
    }
  }
}

TEST_CASE("async second moment hand values at p 2 beta half") {
  const AsyncMoments m = expected_second_moment_async(2, 0.5);
  CHECK(m.dtd(0, 0) == doctest::Approx(0.875).epsilon(1e-15));
  CHECK(m.dtd(0, 1) == doctest::Approx(0.125).epsilon(1e-15));
}

TEST_CASE("async moments at beta 0 are the no-mixing identities") {
  const std::uint32_t p = 5;
  const AsyncMoments m = expected_second_moment_async(p, 0.0);
  CHECK(max_abs_diff(m.dtd, Eigen::MatrixXd::Identity(p, p)) <= 1e-15);
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(p, p) - ones_outer(p) / p;
  CHECK(max_abs_diff(m.consensus_op, centering) <= 1e-15);
}

TEST_CASE("consensus operator annihilates the all-ones direction") {
  for (std::uint32_t p : {2u, 4u, 8u}) {
    for (double beta : {0.1, 0.5, 0.9}) {
      const AsyncMoments m = expected_second_moment_async(p, beta);
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(p);
      CHECK((m.consensus_op * ones).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("consensus operator nonzero eigenvalue matches the diagonalization") {
  // p=2, beta=1/2: 1 - 2*(1/4)/2 - 2*(1/4)/4 = 0.625.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
      expected_second_moment_async(2, 0.5).consensus_op);
  CHECK(es.eigenvalues()(1) == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(contraction_lambda(2, 0.5, LambdaVariant::kDiagonalization) ==
        doctest::Approx(0.625).epsilon(1e-15));
}

TEST_CASE("contraction lambda variants at the reference point") {
  CHECK(contraction_lambda(4, 0.5, LambdaVariant::kTheorem) ==
        doctest::Approx(0.75).epsilon(1e-15));
  CHECK(contraction_lambda(4, 0.5, LambdaVariant::kDiagonalization) ==
        doctest::Approx(0.84375).epsilon(1e-15));
  CHECK(contraction_lambda(8, 0.5, LambdaVariant::kTheorem) ==
        doctest::Approx(0.875).epsilon(1e-15));
  CHECK(contraction_lambda(3, 0.0, LambdaVariant::kTheorem) == 1.0);
  CHECK(contraction_lambda(3, 0.0, LambdaVariant::kDiagonalization) == 1.0);

  const LambdaPair pair = contraction_lambdas(4, 0.5);
  CHECK(pair.theorem == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(pair.diagonalization == doctest::Approx(0.84375).epsilon(1e-15));
  CHECK(pair.gap == doctest::Approx(0.09375).epsilon(1e-12));
  CHECK(pair.gap >= 0.0);
}

TEST_CASE("lambda string names round trip") {
  CHECK(to_string(LambdaVariant::kTheorem) == "theorem");
  CHECK(to_string(LambdaVariant::kDiagonalization) == "diagonalization");
  CHECK(lambda_variant_from_string("theorem") == LambdaVariant::kTheorem);
  CHECK(lambda_variant_from_string("diagonalization") ==
        LambdaVariant::kDiagonalization);
  CHECK(!lambda_variant_from_string("midpoint").has_value());
}

TEST_CASE("pull mixing applied to states equals the matrix action") {
  RngStream rng(41);
  for (std::uint32_t p : {2u, 3u, 5u}) {
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::uint32_t> assign(p);
      for (auto& j : assign) j = rng.uniform_index(p);

      std::vector<NodeState> nodes;
      Eigen::VectorXd x(p);
      for (std::uint32_t i = 0; i < p; ++i) {
        x(i) = rng.normal();
        nodes.push_back(make_node(i, ParamVec{x(i)}, 1, "mix"));
      }
      nodes = pull_mix(std::move(nodes), assign);
      const Eigen::VectorXd want = pull_matrix(assign) * x;
      for (std::uint32_t i = 0; i < p; ++i) {
        CHECK(std::abs(nodes[i].theta[0] - want(i)) <= 1e-12);
      }
    }
  }
}

TEST_CASE("weight state starts as the identity and row sums stay one") {
  WeightState ws = WeightState::identity(3);
  CHECK(max_abs_diff(ws.v, Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(ws.w(i) == 1.0);

  RngStream rng(53);
  std::vector<std::uint32_t> assign(3);
  for (int round = 0; round < 10; ++round) {
    for (auto& j : assign) j = rng.uniform_index(3);
    ws = evolve_weights(std::move(ws), pull_matrix(assign));
    for (int i = 0; i < 3; ++i) {
      CHECK(ws.w(i) == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(ws.v.row(i).sum() - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("evolving by the identity changes nothing") {
  WeightState ws = WeightState::identity(4);
  const WeightState out =
      evolve_weights(ws, Eigen::MatrixXd::Identity(4, 4));
  CHECK(max_abs_diff(out.v, Eigen::MatrixXd::Identity(4, 4)) == 0.0);
}

TEST_CASE("diffusion potential hand values") {
  const std::vector<ParamVec> theta0 = {ParamVec{1.0}, ParamVec{0.0}};

  WeightState id = WeightState::identity(2);
  // Row 1: (1 - 1/2)^2 + (0 - 1/2)^2 = 1/2; row 2 contributes 1/2 as well
  // by symmetry of the zero entry... row 2 has v = (0, 1), contributions
  // (0*1, 1*0) = (0, 0), row mean 0, so row 2 adds 0. Total 0.5.
  CHECK(diffusion_potential(id, theta0) == doctest::Approx(0.5).epsilon(1e-12));

  // Perfect diffusion v = (1/p) 1 1^T: the within-row dispersion collapses
  // to (1/p) sum_j ||theta_j - mean||^2 = (1/2) * (1/4 + 1/4) = 0.25. The
  // potential vanishes only when the weighted contributions v_ij theta_j are
  // constant across each row, not at uniform weights alone.
  const std::uint32_t swap2[] = {1, 0};
  WeightState mixed = evolve_weights(std::move(id), pull_matrix(swap2));
  CHECK(max_abs_diff(mixed.v, 0.5 * Eigen::MatrixXd::Ones(2, 2)) <= 1e-15);
  CHECK(diffusion_potential(mixed, theta0) ==
        doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("diffusion potential is quadratically homogeneous in theta0") {
  RngStream rng(71);
  WeightState ws = WeightState::identity(4);
  std::vector<std::uint32_t> assign(4);
  for (auto& j : assign) j = rng.uniform_index(4);
  ws = evolve_weights(std::move(ws), pull_matrix(assign));

  std::vector<ParamVec> theta0;
  std::vector<ParamVec> scaled;
  const double c = 2.5;
  for (int i = 0; i < 4; ++i) {
    const double x = rng.normal();
    theta0.push_back(ParamVec{x});
    scaled.push_back(ParamVec{c * x});
  }
  CHECK(diffusion_potential(ws, scaled) ==
        doctest::Approx(c * c * diffusion_potential(ws, theta0)).epsilon(1e-12));
}
