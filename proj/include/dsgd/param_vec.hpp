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

#ifndef DSGD_PARAM_VEC_HPP_
#define DSGD_PARAM_VEC_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace dsgd {

// Dense parameter vector. Plain value semantics; dimension mismatches throw.
class ParamVec {
 public:
  ParamVec() = default;
  explicit ParamVec(std::size_t dim, double fill = 0.0) : v_(dim, fill) {}
  explicit ParamVec(std::vector<double> values) : v_(std::move(values)) {}
  ParamVec(std::initializer_list<double> values) : v_(values) {}

  static ParamVec zeros(std::size_t dim) { return ParamVec(dim, 0.0); }
  static ParamVec constant(std::size_t dim, double c) { return ParamVec(dim, c); }

  std::size_t dim() const { return v_.size(); }
  double operator[](std::size_t i) const { return v_[i]; }
  double& operator[](std::size_t i) { return v_[i]; }
  const std::vector<double>& values() const { return v_; }
  std::span<const double> data() const { return v_; }
  double* raw() { return v_.data(); }
  const double* raw() const { return v_.data(); }

  ParamVec& operator+=(const ParamVec& o) {
    check_dim(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  ParamVec& operator-=(const ParamVec& o) {
    check_dim(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  ParamVec& operator*=(double a) {
    for (double& x : v_) x *= a;
    return *this;
  }

  friend ParamVec operator+(ParamVec a, const ParamVec& b) { return a += b; }
  friend ParamVec operator-(ParamVec a, const ParamVec& b) { return a -= b; }
  friend ParamVec operator*(double a, ParamVec x) { return x *= a; }

  // this += a * x
  void axpy(double a, const ParamVec& x) {
    check_dim(x);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
  }

  double dot(const ParamVec& o) const {
    check_dim(o);
    double s = 0.0;
    for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (double x : v_) s += x * x;
    return s;
  }

  double norm() const { return std::sqrt(squared_norm()); }

  double inf_norm() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }

  bool all_finite() const {
    for (double x : v_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool operator==(const ParamVec& o) const { return v_ == o.v_; }

 private:
  void check_dim(const ParamVec& o) const {
    if (o.v_.size() != v_.size()) {
      throw std::invalid_argument("ParamVec dimension mismatch");
    }
  }

  std::vector<double> v_;
};

// Mean over nodes, computed as pivot + mean(deviation from pivot). Identical
// inputs therefore produce the exact common value (the deviations are exact
// zeros), which the all-reduce consensus invariant relies on.
ParamVec spatial_mean(std::span<const ParamVec> thetas);

double squared_distance(const ParamVec& a, const ParamVec& b);

}  // namespace dsgd

#endif  // DSGD_PARAM_VEC_HPP_
