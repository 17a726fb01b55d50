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

#include "tcprune/mask.hpp"

#include "tcprune/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace tcprune {
namespace {

// Largest double below one. tanh saturates to exactly 1.0 long before w is
// infinite; the clamp keeps psi strictly inside [0, 1).
const double kPsiMax = std::nextafter(1.0, 0.0);

void check_temperature(double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    std::ostringstream msg;
    msg << "mask temperature must be positive and finite, got " << temperature;
    throw Error(msg.str());
  }
}

void check_finite(const Matrix& w, std::string_view layer) {
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      if (!std::isfinite(w(r, c))) {
        std::ostringstream msg;
        msg << "non-finite weight";
        if (!layer.empty()) msg << " in " << layer;
        msg << " at (" << r << ", " << c << ")";
        throw NumericError(msg.str());
      }
    }
  }
}

}  // namespace

// 2*sigmoid(x) - 1 == tanh(x / 2), which avoids the cancellation near x = 0.
double MaskFn::operator()(double w) const {
  return std::min(std::tanh(w * w / (2.0 * temperature)), kPsiMax);
}

double MaskFn::derivative(double w) const {
  const double t = std::tanh(w * w / (2.0 * temperature));
  return (w / temperature) * (1.0 - t * t);
}

double AnnealSchedule::temperature(int epoch) const {
  return std::max(t_min, t0 * std::pow(decay, static_cast<double>(epoch)));
}

void AnnealSchedule::validate() const {
  if (!(t0 > 0.0)) throw Error("anneal.t0 must be > 0");
  if (!(decay > 0.0 && decay < 1.0)) throw Error("anneal.decay must be in (0, 1)");
  if (!(t_min > 0.0)) throw Error("anneal.t_min must be > 0");
}

Matrix psi_apply(const Matrix& w, double temperature, std::string_view layer) {
  check_temperature(temperature);
  check_finite(w, layer);
  const MaskFn psi{temperature};
  return w.unaryExpr([&](double x) { return psi(x); });
}

Matrix psi_grad(const Matrix& w, double temperature, std::string_view layer) {
  check_temperature(temperature);
  check_finite(w, layer);
  const MaskFn psi{temperature};
  return w.unaryExpr([&](double x) { return psi.derivative(x); });
}

BinarizeResult binarize(const Matrix& soft, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw Error("binarize threshold must lie in (0, 1), got " + std::to_string(threshold));
  }
  BinarizeResult out;
  out.mask = (soft.array() >= threshold).cast<std::uint8_t>();
  out.ones = static_cast<std::size_t>(out.mask.cast<long>().sum());
  return out;
}

}  // namespace tcprune
