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

#include "tcprune/topo_state.hpp"
#include "tcprune/types.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tcprune {

enum class LayerKind { gcn_block, dense };
enum class Activation { relu, identity, softmax_logits };

std::string_view to_string(LayerKind kind);
std::string_view to_string(Activation act);
std::optional<LayerKind> parse_layer_kind(std::string_view name);
std::optional<Activation> parse_activation(std::string_view name);

/// One layer of the stack.
///
/// dense:     in_dim -> out_dim, one prunable in_dim x out_dim matrix.
/// gcn_block: a graph signal with `nodes` nodes and in_dim channels mapped to
///            nodes x out_dim through `heads` attention matrices (nodes x
///            nodes, never pruned) and `heads` prunable in_dim x out_dim
///            filter blocks. The block emits the node-major flattening of its
///            nodes x out_dim output.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int in_dim = 0;
  int out_dim = 0;
  Activation activation = Activation::relu;
  int heads = 1;
  int nodes = 1;

  /// Features consumed / emitted per sample.
  int input_width() const { return kind == LayerKind::gcn_block ? nodes * in_dim : in_dim; }
  int output_width() const { return kind == LayerKind::gcn_block ? nodes * out_dim : out_dim; }
  std::size_t prunable_count() const {
    return static_cast<std::size_t>(heads) * static_cast<std::size_t>(in_dim) *
           static_cast<std::size_t>(out_dim);
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;

  /// Shape rules: gcn blocks form a prefix of the stack, consecutive gcn
  /// blocks chain channels, a dense layer after a gcn block consumes its
  /// flattened nodes*out_dim output, dense layers chain directly.
  void validate() const;
  /// validate() plus depth >= 2 and exactly one softmax_logits layer, last.
  void validate_classifier() const;

  int depth() const { return static_cast<int>(layers.size()); }
  int input_width() const;
  int num_classes() const;
  std::size_t prunable_count() const;

  /// Topology view: neuron count at level 0..L (level 0 = input channels).
  int level_width(int level) const;
  /// Filter rows per source neuron of layer `layer`. A dense layer fed by a
  /// gcn block has one row per (node, channel); row u*C + c belongs to
  /// channel c of the block.
  int row_tiling(int layer) const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct LayerParams {
  std::vector<Matrix> filters;    // heads x (in_dim x out_dim)
  std::vector<Matrix> attention;  // gcn only: heads x (nodes x nodes)
};

/// Latent weights of the whole stack. Masks are always re-derived from these.
struct MaskedWeights {
  std::vector<LayerParams> layers;

  /// Throws ShapeError if tensors do not match `spec`.
  void check(const NetworkSpec& spec) const;
};

/// Uniform Glorot init in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
/// Attention heads start at I, Â, Â^2, ... with Â the symmetric-normalized
/// adjacency (self-loops added); identity for every head if `adjacency` is
/// empty.
MaskedWeights init_weights(const NetworkSpec& spec, std::uint64_t seed,
                           const Matrix& adjacency = Matrix());

/// Real-valued gate of one layer; the filter entry (r, c) of every head is
/// scaled by row[r] * col[c]. `row` spans the filter rows, so it is the
/// source-level vector repeated row_tiling times.
struct LayerGate {
  Vector row;
  Vector col;
};

LayerGate make_gate(const NetworkSpec& spec, int layer, const Vector& phi_r_prev,
                    const Vector& phi_l);
std::vector<LayerGate> gates_from_topo(const NetworkSpec& spec, const TopoState& topo);

using LayerTensors = std::vector<std::vector<Matrix>>;  // [layer][head]

/// W (.) psi_T(W), further scaled by the gate when one is given.
LayerTensors effective_filters(const NetworkSpec& spec, const MaskedWeights& weights,
                               double temperature,
                               const std::vector<LayerGate>* gates = nullptr);

struct ForwardCache {
  std::vector<Matrix> inputs;  // [layer] batch x input_width
  std::vector<Matrix> pre;     // [layer] batch x output_width, before f
  std::vector<Matrix> out;     // [layer] batch x output_width

  const Matrix& logits() const { return out.back(); }
};

/// Evaluates the stack with explicit per-head filters (already masked).
ForwardCache forward_effective(const NetworkSpec& spec, const LayerTensors& filters,
                               const MaskedWeights& weights, const Matrix& input);

struct NetworkGrad {
  LayerTensors filters;    // d loss / d effective filter
  LayerTensors attention;  // d loss / d A^k
};

NetworkGrad backward_effective(const NetworkSpec& spec, const LayerTensors& filters,
                               const MaskedWeights& weights, const ForwardCache& cache,
                               const Matrix& d_out);

struct Activations {
  std::vector<Matrix> layers;  // phi^l per layer, batch rows
};

/// Masked evaluation: effective weight W (.) psi_T(W), additionally gated by
/// outer(phi_r^{l-1}, phi_l^l) when `gating` is supplied.
Activations forward_masked(const NetworkSpec& spec, const MaskedWeights& weights,
                           const Matrix& input, double temperature,
                           const TopoState* gating = nullptr);

/// f(sum_k A^k U^T W^k) for a single graph signal U (s x n).
Matrix gcn_block_forward(const std::vector<Matrix>& attention, const Matrix& signal,
                         const std::vector<Matrix>& filters, Activation f);

/// Soft kept-connection mass: sum over layers and heads of sum(psi_T(W)).
double unpruned_count(const MaskedWeights& weights, double temperature);

}  // namespace tcprune
