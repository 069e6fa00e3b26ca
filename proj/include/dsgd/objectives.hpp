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

#ifndef DSGD_OBJECTIVES_HPP_
#define DSGD_OBJECTIVES_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dsgd/param_vec.hpp"
#include "dsgd/rng.hpp"

namespace dsgd {

// Smooth strongly convex objective. convexity_params() returns certified
// (m, L): m is a lower bound on curvature, L an upper bound on gradient
// Lipschitz constant, so theorem-side bounds computed from them stay valid.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(const ParamVec& theta) const = 0;
  virtual ParamVec gradient(const ParamVec& theta) const = 0;

  // Minibatch gradient estimate; unbiased for gradient(). The default is the
  // exact gradient (objectives with no sampling dimension draw nothing, so
  // stream bookkeeping stays protocol-independent).
  virtual ParamVec stochastic_gradient(const ParamVec& theta, std::uint32_t batch,
                                       RngStream& sample_rng) const {
    (void)batch;
    (void)sample_rng;
    return gradient(theta);
  }

  virtual std::pair<double, double> convexity_params() const = 0;
  virtual std::optional<ParamVec> optimum() const { return std::nullopt; }
};

// f(theta) = 1/2 sum_k a_k (theta_k - opt_k)^2 with a diagonal spectrum.
// m = min a_k, L = max a_k, both exact.
class QuadraticObjective : public Objective {
 public:
  QuadraticObjective(std::vector<double> spectrum, ParamVec opt);

  std::size_t dim() const override { return spectrum_.size(); }
  double value(const ParamVec& theta) const override;
  ParamVec gradient(const ParamVec& theta) const override;
  std::pair<double, double> convexity_params() const override { return {m_, l_}; }
  std::optional<ParamVec> optimum() const override { return opt_; }
  const std::vector<double>& spectrum() const { return spectrum_; }

 private:
  std::vector<double> spectrum_;
  ParamVec opt_;
  double m_ = 0.0;
  double l_ = 0.0;
};

// l2-regularized logistic regression on a fixed design matrix; the data
// term is the mean over samples. Labels are 0/1. Certified constants:
// m = l2, L = l2 + max_i ||x_i||^2 / 4.
class LogisticObjective : public Objective {
 public:
  LogisticObjective(std::vector<std::vector<double>> features,
                    std::vector<int> labels, double l2);

  std::size_t dim() const override { return dim_; }
  std::size_t num_samples() const { return features_.size(); }
  double value(const ParamVec& theta) const override;
  ParamVec gradient(const ParamVec& theta) const override;
  ParamVec stochastic_gradient(const ParamVec& theta, std::uint32_t batch,
                               RngStream& sample_rng) const override;

  // Restricts minibatch draws to rows [begin, end); used for sharded runs.
  void set_sample_range(std::size_t begin, std::size_t end);

  std::pair<double, double> convexity_params() const override { return {l2_, lipschitz_}; }

 private:
  ParamVec sample_gradient(const ParamVec& theta, std::size_t row) const;

  std::vector<std::vector<double>> features_;
  std::vector<int> labels_;
  double l2_;
  double lipschitz_;
  std::size_t dim_;
  std::size_t range_begin_ = 0;
  std::size_t range_end_ = 0;
};

// Additive gradient noise xi with independent N(0, sigma^2) coordinates.
// total_variance = E||xi||^2 = dim * sigma^2.
struct NoiseModel {
  enum class Kind { kZero, kGaussian };

  Kind kind = Kind::kZero;
  double sigma = 0.0;  // per-coordinate standard deviation
  std::size_t dim = 0;

  static NoiseModel zero(std::size_t dim) { return {Kind::kZero, 0.0, dim}; }
  static NoiseModel gaussian_per_coord(double sigma, std::size_t dim);
  static NoiseModel gaussian_total(double total_variance, std::size_t dim);

  double total_variance() const { return static_cast<double>(dim) * sigma * sigma; }

  // Draws xi. The zero kind consumes no RNG draws; the gaussian kind always
  // consumes 2*dim raw draws, even at sigma = 0.
  ParamVec sample(RngStream& noise_rng) const;

  bool operator==(const NoiseModel&) const = default;
};

// gradient(theta) + one noise draw.
ParamVec noisy_gradient(const Objective& obj, const NoiseModel& noise,
                        const ParamVec& theta, RngStream& noise_rng);

// Loads "label,f1,...,fd" CSV rows into a LogisticObjective. Labels must be
// 0 or 1. Malformed rows are reported with their line number.
std::unique_ptr<LogisticObjective> load_csv_dataset(const std::string& path,
                                                    bool has_header, double l2);

}  // namespace dsgd

#endif  // DSGD_OBJECTIVES_HPP_
