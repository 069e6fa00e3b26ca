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

#include "dsgd/param_vec.hpp"

namespace dsgd {

ParamVec spatial_mean(std::span<const ParamVec> thetas) {
  if (thetas.empty()) {
    throw std::invalid_argument("spatial_mean over empty node set");
  }
  const ParamVec& pivot = thetas[0];
  const std::size_t d = pivot.dim();
  ParamVec dev = ParamVec::zeros(d);
  for (std::size_t i = 1; i < thetas.size(); ++i) {
    if (thetas[i].dim() != d) {
      throw std::invalid_argument("spatial_mean dimension mismatch");
    }
    for (std::size_t k = 0; k < d; ++k) {
      dev[k] += thetas[i][k] - pivot[k];
    }
  }
  const double inv_p = 1.0 / static_cast<double>(thetas.size());
  ParamVec mean = pivot;
  for (std::size_t k = 0; k < d; ++k) {
    mean[k] += dev[k] * inv_p;
  }
  return mean;
}

double squared_distance(const ParamVec& a, const ParamVec& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("squared_distance dimension mismatch");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.dim(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

}  // namespace dsgd
