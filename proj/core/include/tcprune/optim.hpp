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

#pragma once

#include "tcprune/loss.hpp"
#include "tcprune/network.hpp"

#include <limits>
#include <optional>

namespace tcprune {

/// Adaptive global learning rate: x0.99 after a loss increase, /0.99 after a
/// decrease, unchanged on an exact tie. The first observation only records
/// the loss. Increases stop at `max_nu`.
struct LrState {
  double nu = 0.01;
  std::optional<double> prev_loss;
};

LrState lr_update(const LrState& state, double new_loss,
                  double max_nu = std::numeric_limits<double>::infinity());

/// Scales `grad` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before scaling.
double clip_global_norm(Gradients& grad, double max_norm);

class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

  /// One bias-corrected Adam update with step size `lr`.
  void step(MaskedWeights& weights, const Gradients& grad, double lr);

  long steps() const { return t_; }

 private:
  double beta1_;
  double beta2_;
  double epsilon_;
  long t_ = 0;
  Gradients m_;
  Gradients v_;
};

}  // namespace tcprune
