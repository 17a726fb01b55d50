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

#include "tcprune/types.hpp"

#include <cstddef>
#include <string_view>

namespace tcprune {

/// Differentiable magnitude mask psi_T(w) = 2*sigmoid(w^2 / T) - 1.
///
/// Symmetric in w, zero at w = 0, approaches 1 as |w| grows, and gets
/// sharper as the temperature T shrinks. T = 1 is the plain form.
struct MaskFn {
  double temperature = 1.0;

  double operator()(double w) const;
  double derivative(double w) const;
};

/// Geometric temperature decay, floored at t_min.
struct AnnealSchedule {
  double t0 = 1.0;
  double decay = 0.99;
  double t_min = 1e-2;

  double temperature(int epoch) const;
  void validate() const;
};

/// Elementwise psi_T. Throws NumericError naming `layer` and the offending
/// index when an entry of `w` is not finite.
Matrix psi_apply(const Matrix& w, double temperature, std::string_view layer = {});

/// Elementwise d psi_T / d w.
Matrix psi_grad(const Matrix& w, double temperature, std::string_view layer = {});

struct BinarizeResult {
  BinaryMatrix mask;
  std::size_t ones = 0;
};

/// Crisp cut: entry is 1 iff soft >= threshold.
BinarizeResult binarize(const Matrix& soft, double threshold = 0.5);

}  // namespace tcprune
