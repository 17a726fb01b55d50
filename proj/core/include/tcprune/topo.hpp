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

#include "tcprune/network.hpp"
#include "tcprune/topo_state.hpp"
#include "tcprune/types.hpp"

#include <cstddef>
#include <vector>

namespace tcprune {

/// Crisp masks of one layer. Every head is a (row_tiling * w_in) x w_out 0/1
/// matrix; row r leaves source neuron r % w_in. Heads are parallel
/// connections between the same two neuron sets.
struct MaskLayer {
  std::vector<BinaryMatrix> heads;
  int row_tiling = 1;
};

struct MaskStack {
  std::vector<MaskLayer> layers;

  int depth() const { return static_cast<int>(layers.size()); }
  int level_width(int level) const;
  std::size_t kept() const;
  /// Shapes chain and every entry is 0 or 1; throws ShapeError/Error otherwise.
  void validate() const;

  /// Plain layered net, one head per layer, no tiling.
  static MaskStack from_layers(std::vector<BinaryMatrix> masks);
};

/// binarize(psi_T(W), threshold) for every head, tiled like `spec`.
MaskStack crisp_masks(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                      double threshold = 0.5);

/// Accessibility and co-accessibility of every filter position (kept or
/// not), laid out like the masks: [layer][head].
struct ConnectionFlags {
  std::vector<std::vector<BinaryMatrix>> accessible;
  std::vector<std::vector<BinaryMatrix>> coaccessible;
};

/// Heaviside passes: phi_r left-to-right from all-ones, phi_l right-to-left
/// from all-ones. Rejects non-binary mask entries.
TopoState phi_forward(const MaskStack& masks);
ConnectionFlags flags_from_phi(const MaskStack& masks, const TopoState& topo);

/// Explicit graph search over the kept connections: BFS from every input
/// neuron and reverse BFS from every output neuron.
ConnectionFlags reachability_oracle(const MaskStack& masks);

/// Boolean mask products. sa[l] = N_0 ... N_{l-1} (w_0 x w_l) and
/// sc[l] = N_{l+1} ... N_{L-1} (w_{l+1} x w_L), where N_l is layer l folded to
/// a level-to-level 0/1 matrix. sa[0] and sc[L-1] are all-ones.
struct SaScProducts {
  std::vector<BinaryMatrix> sa;
  std::vector<BinaryMatrix> sc;
};

SaScProducts sa_sc_products(const MaskStack& masks);
ConnectionFlags flags_from_products(const MaskStack& masks, const SaScProducts& products);

/// Kept connections whose A-C flag differs between two flag sets.
std::size_t count_disagreements(const MaskStack& masks, const ConnectionFlags& a,
                                const ConnectionFlags& b);

struct LayerTopoReport {
  std::size_t kept = 0;
  std::size_t ac_kept = 0;
};

struct TopoReport {
  std::size_t total_kept = 0;
  std::size_t ac_kept = 0;
  double percent_ac = 100.0;  // 100 for an empty network
  std::vector<LayerTopoReport> per_layer;

  bool consistent() const { return ac_kept == total_kept; }
};

TopoReport consistency_report(const MaskStack& masks);
TopoReport report_from_flags(const MaskStack& masks, const ConnectionFlags& flags);

/// Keeps only connections whose source is accessible and target
/// co-accessible under `topo`.
MaskStack effective_mask(const MaskStack& masks, const TopoState& topo);

}  // namespace tcprune
