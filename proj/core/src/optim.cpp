// Copyright 2026 The tcprune Authors
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

#include "tcprune/optim.hpp"

#include "tcprune/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tcprune {
namespace {

constexpr double kLrFactor = 0.99;

Gradients zeros_like(const Gradients& g) {
  Gradients z = g;
  for (auto& layer : z.layers) {
    for (auto& m : layer.filters) m.setZero();
    for (auto& m : layer.attention) m.setZero();
  }
  return z;
}

}  // namespace

LrState lr_update(const LrState& state, double new_loss, double max_nu) {
  if (!(state.nu > 0.0)) throw Error("learning rate must stay positive");
  LrState next = state;
  if (state.prev_loss) {
    if (new_loss > *state.prev_loss) {
      next.nu = state.nu * kLrFactor;
    } else if (new_loss < *state.prev_loss) {
      next.nu = std::min(max_nu, state.nu / kLrFactor);
    }
  }
  next.prev_loss = new_loss;
  return next;
}

double clip_global_norm(Gradients& grad, double max_norm) {
  double sq = 0.0;
  for (const auto& layer : grad.layers) {
    for (const auto& m : layer.filters) sq += m.squaredNorm();
    for (const auto& m : layer.attention) sq += m.squaredNorm();
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& layer : grad.layers) {
      for (auto& m : layer.filters) m *= scale;
      for (auto& m : layer.attention) m *= scale;
    }
  }
  return norm;
}

void Adam::step(MaskedWeights& weights, const Gradients& grad, double lr) {
  if (t_ == 0) {
    m_ = zeros_like(grad);
    v_ = zeros_like(grad);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    auto update = [&](Matrix& w, const Matrix& g, Matrix& m, Matrix& v) {
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
      w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + epsilon_);
    };
    for (std::size_t k = 0; k < weights.layers[l].filters.size(); ++k) {
      update(weights.layers[l].filters[k], grad.layers[l].filters[k], m_.layers[l].filters[k],
             v_.layers[l].filters[k]);
    }
    for (std::size_t k = 0; k < weights.layers[l].attention.size(); ++k) {
      update(weights.layers[l].attention[k], grad.layers[l].attention[k],
             m_.layers[l].attention[k], v_.layers[l].attention[k]);
    }
  }
}

}  // namespace tcprune
