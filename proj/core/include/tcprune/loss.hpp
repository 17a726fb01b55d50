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

#include "tcprune/mask.hpp"
#include "tcprune/network.hpp"
#include "tcprune/topo_state.hpp"
#include "tcprune/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace tcprune {

/// How the accessibility passes are evaluated.
///
/// straight_through: forward on binarized masks with an exact Heaviside,
///   backward through the soft masks with a sigmoid derivative.
/// smooth: soft masks and a sigmoid in both directions. Differentiable end to
///   end; used to check gradients against finite differences.
enum class GateMode { straight_through, smooth };

struct PruneConfig {
  /// Target kept-connection count c. Empty disables pruning: masks are
  /// identically one and no budget term is added.
  std::optional<double> target;
  double lambda = 10.0;
  double eta = 1.0;
  bool tc_enabled = true;
  AnnealSchedule anneal;
  double binarize_threshold = 0.5;
  int epochs = 300;
  int batch_size = 64;
  double lr0 = 0.01;
  std::optional<double> lr_max;  // ceiling for the adaptive rate; unbounded when empty
  int settle_epochs = 0;  // final epochs: step size ramps to zero, best epoch is kept
  double momentum = 0.9;
  double beta2 = 0.999;
  double ste_slope = 1.0;
  double clip_norm = 10.0;
  GateMode gate_mode = GateMode::straight_through;

  bool pruning_enabled() const { return target.has_value(); }
  /// Throws ConfigError listing every out-of-range field.
  void validate() const;
};

struct LossBreakdown {
  double ce = 0.0;
  double budget = 0.0;          // lambda * (count - c)^2
  double access_penalty = 0.0;  // eta * (soft mass - gated mass)
  double total = 0.0;
  // Masses are taken over binarized psi under straight-through gating and over
  // psi itself in smooth mode; the backward pass always uses psi'.
  double soft_mass = 0.0;   // total mass over all filters
  double gated_mass = 0.0;  // mass entering the budget term
};

struct Batch {
  Matrix inputs;
  std::vector<int> labels;
};

using Gradients = MaskedWeights;

/// Mean of -log softmax(logits)[label]. Writes d ce / d logits into `grad`
/// when given.
double cross_entropy(const Matrix& logits, std::span<const int> labels,
                     Matrix* grad = nullptr);

/// Kept mass entering the budget: sum of psi (no topo) or
/// sum_l phi_r^l' psi(W^l) phi_l^{l+1} (with topo).
double kept_mass(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                 const TopoState* topo = nullptr);

/// Unweighted (count - c)^2.
double budget_loss(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                   double target, const TopoState* topo = nullptr);

/// Unweighted soft mass of kept connections that are not accessible and
/// co-accessible under `topo`.
double access_penalty(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                      const TopoState& topo);

struct Evaluation {
  LossBreakdown loss;
  Gradients grad;    // empty unless requested
  TopoState topo;    // crisp accessibility state used by the gate (TC only)
  Matrix logits;
};

/// Loss (and optionally gradient) of the pruning objective on one batch.
/// With TC the gate, budget and penalty follow the accessibility passes;
/// without TC the loss is ce + lambda * budget on ungated masks.
Evaluation evaluate(const NetworkSpec& spec, const MaskedWeights& weights, const Batch& batch,
                    double temperature, const PruneConfig& config, bool with_grad);

LossBreakdown total_loss(const NetworkSpec& spec, const MaskedWeights& weights,
                         const Batch& batch, double temperature, const PruneConfig& config);

/// Gradient w.r.t. every filter and attention matrix. Throws NumericError
/// naming the layer on a non-finite gradient.
Evaluation backward(const NetworkSpec& spec, const MaskedWeights& weights, const Batch& batch,
                    double temperature, const PruneConfig& config);

}  // namespace tcprune
