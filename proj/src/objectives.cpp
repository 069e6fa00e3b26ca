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

#include "dsgd/objectives.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dsgd {

namespace {

// log(1 + exp(z)) without overflow for large |z|.
double log1pexp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

QuadraticObjective::QuadraticObjective(std::vector<double> spectrum, ParamVec opt)
    : spectrum_(std::move(spectrum)), opt_(std::move(opt)) {
  if (spectrum_.empty()) {
    throw std::invalid_argument("quadratic spectrum must be non-empty");
  }
  if (opt_.dim() != spectrum_.size()) {
    throw std::invalid_argument("quadratic optimum dimension must match spectrum");
  }
  m_ = spectrum_[0];
  l_ = spectrum_[0];
  for (double a : spectrum_) {
    if (!(a > 0.0)) {
      throw std::invalid_argument("quadratic spectrum entries must be positive");
    }
    m_ = std::min(m_, a);
    l_ = std::max(l_, a);
  }
}

double QuadraticObjective::value(const ParamVec& theta) const {
  if (theta.dim() != dim()) throw std::invalid_argument("value: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < dim(); ++k) {
    const double d = theta[k] - opt_[k];
    s += spectrum_[k] * d * d;
  }
  return 0.5 * s;
}

ParamVec QuadraticObjective::gradient(const ParamVec& theta) const {
  if (theta.dim() != dim()) throw std::invalid_argument("gradient: dimension mismatch");
  ParamVec g = ParamVec::zeros(dim());
  for (std::size_t k = 0; k < dim(); ++k) {
    g[k] = spectrum_[k] * (theta[k] - opt_[k]);
  }
  return g;
}

LogisticObjective::LogisticObjective(std::vector<std::vector<double>> features,
                                     std::vector<int> labels, double l2)
    : features_(std::move(features)), labels_(std::move(labels)), l2_(l2) {
  if (features_.empty()) throw std::invalid_argument("logistic dataset is empty");
  if (features_.size() != labels_.size()) {
    throw std::invalid_argument("logistic features/labels size mismatch");
  }
  if (!(l2_ > 0.0)) {
    throw std::invalid_argument("logistic l2 must be positive (strong convexity)");
  }
  dim_ = features_[0].size();
  double max_row_sq = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].size() != dim_) {
      throw std::invalid_argument("logistic feature rows have inconsistent width");
    }
    if (labels_[i] != 0 && labels_[i] != 1) {
      throw std::invalid_argument("logistic labels must be 0 or 1");
    }
    double sq = 0.0;
    for (double x : features_[i]) sq += x * x;
    max_row_sq = std::max(max_row_sq, sq);
  }
  lipschitz_ = l2_ + 0.25 * max_row_sq;
  range_begin_ = 0;
  range_end_ = features_.size();
}

void LogisticObjective::set_sample_range(std::size_t begin, std::size_t end) {
  if (begin >= end || end > features_.size()) {
    throw std::invalid_argument("invalid sample range");
  }
  range_begin_ = begin;
  range_end_ = end;
}

double LogisticObjective::value(const ParamVec& theta) const {
  if (theta.dim() != dim_) throw std::invalid_argument("value: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < features_.size(); ++i) {
    double z = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) z += features_[i][k] * theta[k];
    s += log1pexp(z) - static_cast<double>(labels_[i]) * z;
  }
  return s / static_cast<double>(features_.size()) + 0.5 * l2_ * theta.squared_norm();
}

ParamVec LogisticObjective::sample_gradient(const ParamVec& theta, std::size_t row) const {
  double z = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) z += features_[row][k] * theta[k];
  const double coeff = sigmoid(z) - static_cast<double>(labels_[row]);
  ParamVec g = ParamVec::zeros(dim_);
  for (std::size_t k = 0; k < dim_; ++k) g[k] = coeff * features_[row][k];
  return g;
}

ParamVec LogisticObjective::gradient(const ParamVec& theta) const {
  if (theta.dim() != dim_) throw std::invalid_argument("gradient: dimension mismatch");
  ParamVec g = ParamVec::zeros(dim_);
  for (std::size_t i = 0; i < features_.size(); ++i) {
    g += sample_gradient(theta, i);
  }
  g *= 1.0 / static_cast<double>(features_.size());
  g.axpy(l2_, theta);
  return g;
}

ParamVec LogisticObjective::stochastic_gradient(const ParamVec& theta, std::uint32_t batch,
                                                RngStream& sample_rng) const {
  if (theta.dim() != dim_) {
    throw std::invalid_argument("stochastic_gradient: dimension mismatch");
  }
  if (batch == 0) throw std::invalid_argument("batch must be >= 1");
  const std::uint32_t span = static_cast<std::uint32_t>(range_end_ - range_begin_);
  ParamVec g = ParamVec::zeros(dim_);
  for (std::uint32_t b = 0; b < batch; ++b) {
    const std::size_t row = range_begin_ + sample_rng.uniform_index(span);
    g += sample_gradient(theta, row);
  }
  g *= 1.0 / static_cast<double>(batch);
  g.axpy(l2_, theta);
  return g;
}

NoiseModel NoiseModel::gaussian_per_coord(double sigma, std::size_t dim) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  return {Kind::kGaussian, sigma, dim};
}

NoiseModel NoiseModel::gaussian_total(double total_variance, std::size_t dim) {
  if (total_variance < 0.0) throw std::invalid_argument("total variance must be >= 0");
  if (dim == 0) throw std::invalid_argument("noise dim must be >= 1");
  return {Kind::kGaussian, std::sqrt(total_variance / static_cast<double>(dim)), dim};
}

ParamVec NoiseModel::sample(RngStream& noise_rng) const {
  ParamVec xi = ParamVec::zeros(dim);
  if (kind == Kind::kGaussian) {
    for (std::size_t k = 0; k < dim; ++k) {
      xi[k] = sigma * noise_rng.normal();
    }
  }
  return xi;
}

ParamVec noisy_gradient(const Objective& obj, const NoiseModel& noise,
                        const ParamVec& theta, RngStream& noise_rng) {
  ParamVec g = obj.gradient(theta);
  if (noise.dim != g.dim()) {
    throw std::invalid_argument("noise dimension must match objective");
  }
  g += noise.sample(noise_rng);
  return g;
}

std::unique_ptr<LogisticObjective> load_csv_dataset(const std::string& path,
                                                    bool has_header, double l2) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);

  std::vector<std::vector<double>> features;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && has_header) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::vector<double> fields;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &used);
      } catch (const std::exception&) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": field '" + cell + "' is not a number");
      }
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) {
        ++used;
      }
      if (used != cell.size()) {
        throw std::runtime_error("line " + std::to_string(line_no) +
                                 ": field '" + cell + "' is not a number");
      }
      fields.push_back(v);
    }
    if (fields.size() < 2) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": expected label plus at least one feature");
    }
    const double label = fields[0];
    if (label != 0.0 && label != 1.0) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": label must be 0 or 1");
    }
    labels.push_back(static_cast<int>(label));
    features.emplace_back(fields.begin() + 1, fields.end());
    if (features.front().size() != features.back().size()) {
      throw std::runtime_error("line " + std::to_string(line_no) +
                               ": row width differs from first row");
    }
  }
  if (features.empty()) throw std::runtime_error("dataset has no rows: " + path);
  return std::make_unique<LogisticObjective>(std::move(features), std::move(labels), l2);
}

}  // namespace dsgd
