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

#include "tcprune/topo.hpp"

#include "tcprune/error.hpp"
#include "tcprune/mask.hpp"

#include <deque>
#include <sstream>
#include <string>

namespace tcprune {
namespace {

using IntMatrix = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IntVector = Eigen::Matrix<long, Eigen::Dynamic, 1>;

BinaryVector positive(const IntVector& v) { return (v.array() > 0).cast<std::uint8_t>(); }
BinaryMatrix positive(const IntMatrix& m) { return (m.array() > 0).cast<std::uint8_t>(); }

// Level-to-level connectivity of one layer: OR over heads and row tiles.
IntMatrix fold_layer(const MaskLayer& layer, int w_in) {
  IntMatrix folded = IntMatrix::Zero(w_in, layer.heads.front().cols());
  for (const BinaryMatrix& head : layer.heads) {
    for (int t = 0; t < layer.row_tiling; ++t) {
      folded += head.middleRows(static_cast<Eigen::Index>(t) * w_in, w_in).cast<long>();
    }
  }
  return positive(folded).cast<long>();
}

ConnectionFlags flags_from_neurons(const MaskStack& masks,
                                   const std::vector<BinaryVector>& source_ok,
                                   const std::vector<BinaryVector>& target_ok) {
  ConnectionFlags flags;
  flags.accessible.resize(masks.layers.size());
  flags.coaccessible.resize(masks.layers.size());
  for (int l = 0; l < masks.depth(); ++l) {
    const MaskLayer& layer = masks.layers[l];
    const BinaryVector rows = source_ok[l].replicate(layer.row_tiling, 1);
    for (const BinaryMatrix& head : layer.heads) {
      BinaryMatrix acc(head.rows(), head.cols());
      BinaryMatrix coacc(head.rows(), head.cols());
      for (Eigen::Index r = 0; r < head.rows(); ++r) {
        acc.row(r).setConstant(rows(r));
        coacc.row(r) = target_ok[l + 1].transpose();
      }
      flags.accessible[l].push_back(std::move(acc));
      flags.coaccessible[l].push_back(std::move(coacc));
    }
  }
  return flags;
}

}  // namespace

int MaskStack::level_width(int level) const {
  if (level == 0) {
    const MaskLayer& first = layers.front();
    return static_cast<int>(first.heads.front().rows()) / first.row_tiling;
  }
  return static_cast<int>(layers[level - 1].heads.front().cols());
}

std::size_t MaskStack::kept() const {
  std::size_t total = 0;
  for (const MaskLayer& layer : layers) {
    for (const BinaryMatrix& head : layer.heads) {
      total += static_cast<std::size_t>((head.array() != 0).count());
    }
  }
  return total;
}

void MaskStack::validate() const {
  if (layers.empty()) throw ShapeError("mask stack is empty");
  for (int l = 0; l < depth(); ++l) {
    const MaskLayer& layer = layers[l];
    if (layer.heads.empty()) throw ShapeError("mask layer " + std::to_string(l) + " has no heads");
    if (layer.row_tiling <= 0) throw ShapeError("mask layer " + std::to_string(l) + " tiling");
    const Eigen::Index rows = layer.heads.front().rows();
    const Eigen::Index cols = layer.heads.front().cols();
    if (rows % layer.row_tiling != 0) {
      throw ShapeError("mask layer " + std::to_string(l) + " rows not divisible by tiling");
    }
    if (l > 0 && rows / layer.row_tiling != level_width(l)) {
      std::ostringstream msg;
      msg << "mask layer " << l << " expects " << rows / layer.row_tiling
          << " source neurons, previous layer has " << level_width(l);
      throw ShapeError(msg.str());
    }
    for (std::size_t k = 0; k < layer.heads.size(); ++k) {
      const BinaryMatrix& head = layer.heads[k];
      if (head.rows() != rows || head.cols() != cols) {
        throw ShapeError("mask layer " + std::to_string(l) + " head " + std::to_string(k) +
                         " shape differs from head 0");
      }
      if ((head.array() > 1).any()) {
        throw Error("mask layer " + std::to_string(l) + " head " + std::to_string(k) +
                    " is not binary; binarize soft masks first");
      }
    }
  }
}

MaskStack MaskStack::from_layers(std::vector<BinaryMatrix> masks) {
  MaskStack stack;
  for (auto& m : masks) stack.layers.push_back(MaskLayer{{std::move(m)}, 1});
  return stack;
}

MaskStack crisp_masks(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                      double threshold) {
  weights.check(spec);
  MaskStack stack;
  for (int l = 0; l < spec.depth(); ++l) {
    MaskLayer layer;
    layer.row_tiling = spec.row_tiling(l);
    for (const Matrix& w : weights.layers[l].filters) {
      layer.heads.push_back(
          binarize(psi_apply(w, temperature, "layer " + std::to_string(l)), threshold).mask);
    }
    stack.layers.push_back(std::move(layer));
  }
  return stack;
}

TopoState phi_forward(const MaskStack& masks) {
  masks.validate();
  const int depth = masks.depth();
  TopoState topo;
  topo.phi_r.resize(depth + 1);
  topo.phi_l.resize(depth + 1);

  topo.phi_r[0] = BinaryVector::Ones(masks.level_width(0));
  for (int l = 0; l < depth; ++l) {
    const MaskLayer& layer = masks.layers[l];
    const IntVector incoming = topo.phi_r[l].cast<long>().replicate(layer.row_tiling, 1);
    IntVector z = IntVector::Zero(masks.level_width(l + 1));
    for (const BinaryMatrix& head : layer.heads) {
      z += head.cast<long>().transpose() * incoming;
    }
    topo.phi_r[l + 1] = positive(z);
  }

  topo.phi_l[depth] = BinaryVector::Ones(masks.level_width(depth));
  for (int l = depth - 1; l >= 0; --l) {
    const MaskLayer& layer = masks.layers[l];
    const int w_in = masks.level_width(l);
    IntVector rows = IntVector::Zero(static_cast<Eigen::Index>(w_in) * layer.row_tiling);
    for (const BinaryMatrix& head : layer.heads) {
      rows += head.cast<long>() * topo.phi_l[l + 1].cast<long>();
    }
    IntVector z = IntVector::Zero(w_in);
    for (int t = 0; t < layer.row_tiling; ++t) {
      z += rows.segment(static_cast<Eigen::Index>(t) * w_in, w_in);
    }
    topo.phi_l[l] = positive(z);
  }
  return topo;
}

ConnectionFlags flags_from_phi(const MaskStack& masks, const TopoState& topo) {
  return flags_from_neurons(masks, topo.phi_r, topo.phi_l);
}

ConnectionFlags reachability_oracle(const MaskStack& masks) {
  masks.validate();
  const int depth = masks.depth();

  // Global neuron ids, level by level.
  std::vector<int> offset(depth + 2, 0);
  for (int level = 0; level <= depth; ++level) {
    offset[level + 1] = offset[level] + masks.level_width(level);
  }
  const int total = offset[depth + 1];
  std::vector<std::vector<int>> succ(total);
  std::vector<std::vector<int>> pred(total);
  for (int l = 0; l < depth; ++l) {
    const MaskLayer& layer = masks.layers[l];
    const int w_in = masks.level_width(l);
    for (const BinaryMatrix& head : layer.heads) {
      for (Eigen::Index r = 0; r < head.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.cols(); ++c) {
          if (head(r, c) == 0) continue;
          const int from = offset[l] + static_cast<int>(r % w_in);
          const int to = offset[l + 1] + static_cast<int>(c);
          succ[from].push_back(to);
          pred[to].push_back(from);
        }
      }
    }
  }

  auto search = [total](const std::vector<std::vector<int>>& edges, int first, int last) {
    std::vector<char> seen(total, 0);
    std::deque<int> queue;
    for (int v = first; v < last; ++v) {
      seen[v] = 1;
      queue.push_back(v);
    }
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int next : edges[v]) {
        if (!seen[next]) {
          seen[next] = 1;
          queue.push_back(next);
        }
      }
    }
    return seen;
  };
  const std::vector<char> from_inputs = search(succ, offset[0], offset[1]);
  const std::vector<char> to_outputs = search(pred, offset[depth], offset[depth + 1]);

  ConnectionFlags flags;
  flags.accessible.resize(depth);
  flags.coaccessible.resize(depth);
  for (int l = 0; l < depth; ++l) {
    const int w_in = masks.level_width(l);
    for (const BinaryMatrix& head : masks.layers[l].heads) {
      BinaryMatrix acc(head.rows(), head.cols());
      BinaryMatrix coacc(head.rows(), head.cols());
      for (Eigen::Index r = 0; r < head.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.cols(); ++c) {
          acc(r, c) = from_inputs[offset[l] + static_cast<int>(r % w_in)];
          coacc(r, c) = to_outputs[offset[l + 1] + static_cast<int>(c)];
        }
      }
      flags.accessible[l].push_back(std::move(acc));
      flags.coaccessible[l].push_back(std::move(coacc));
    }
  }
  return flags;
}

SaScProducts sa_sc_products(const MaskStack& masks) {
  masks.validate();
  const int depth = masks.depth();
  std::vector<IntMatrix> folded;
  for (int l = 0; l < depth; ++l) folded.push_back(fold_layer(masks.layers[l], masks.level_width(l)));

  SaScProducts out;
  out.sa.resize(depth);
  out.sc.resize(depth);
  const int w0 = masks.level_width(0);
  out.sa[0] = BinaryMatrix::Ones(w0, w0);
  IntMatrix running = IntMatrix::Identity(w0, w0);
  for (int l = 1; l < depth; ++l) {
    running = positive(IntMatrix(running * folded[l - 1])).cast<long>();
    out.sa[l] = running.cast<std::uint8_t>();
  }
  const int wl = masks.level_width(depth);
  out.sc[depth - 1] = BinaryMatrix::Ones(wl, wl);
  running = IntMatrix::Identity(wl, wl);
  for (int l = depth - 2; l >= 0; --l) {
    running = positive(IntMatrix(folded[l + 1] * running)).cast<long>();
    out.sc[l] = running.cast<std::uint8_t>();
  }
  return out;
}

ConnectionFlags flags_from_products(const MaskStack& masks, const SaScProducts& products) {
  const int depth = masks.depth();
  std::vector<BinaryVector> source_ok(depth);
  std::vector<BinaryVector> target_ok(depth + 1);
  for (int l = 0; l < depth; ++l) {
    // Source neuron i of layer l is accessible iff column i of sa[l] is non-zero.
    source_ok[l] = (products.sa[l].cast<long>().colwise().sum().array() > 0)
                       .transpose()
                       .cast<std::uint8_t>();
    // Target neuron j is co-accessible iff row j of sc[l] is non-zero.
    target_ok[l + 1] =
        (products.sc[l].cast<long>().rowwise().sum().array() > 0).cast<std::uint8_t>();
  }
  return flags_from_neurons(masks, source_ok, target_ok);
}

std::size_t count_disagreements(const MaskStack& masks, const ConnectionFlags& a,
                                const ConnectionFlags& b) {
  std::size_t bad = 0;
  for (int l = 0; l < masks.depth(); ++l) {
    for (std::size_t k = 0; k < masks.layers[l].heads.size(); ++k) {
      const BinaryMatrix& head = masks.layers[l].heads[k];
      for (Eigen::Index r = 0; r < head.rows(); ++r) {
        for (Eigen::Index c = 0; c < head.cols(); ++c) {
          if (head(r, c) == 0) continue;
          const bool ac_a = a.accessible[l][k](r, c) && a.coaccessible[l][k](r, c);
          const bool ac_b = b.accessible[l][k](r, c) && b.coaccessible[l][k](r, c);
          if (ac_a != ac_b) ++bad;
        }
      }
    }
  }
  return bad;
}

TopoReport report_from_flags(const MaskStack& masks, const ConnectionFlags& flags) {
  TopoReport report;
  for (int l = 0; l < masks.depth(); ++l) {
    LayerTopoReport layer;
    for (std::size_t k = 0; k < masks.layers[l].heads.size(); ++k) {
      const auto kept = masks.layers[l].heads[k].array() != 0;
      const auto ac = (flags.accessible[l][k].array() != 0) &&
                      (flags.coaccessible[l][k].array() != 0);
      layer.kept += static_cast<std::size_t>(kept.count());
      layer.ac_kept += static_cast<std::size_t>((kept && ac).count());
    }
    report.total_kept += layer.kept;
    report.ac_kept += layer.ac_kept;
    report.per_layer.push_back(layer);
  }
  report.percent_ac = report.total_kept == 0
                          ? 100.0
                          : 100.0 * static_cast<double>(report.ac_kept) /
                                static_cast<double>(report.total_kept);
  return report;
}

TopoReport consistency_report(const MaskStack& masks) {
  return report_from_flags(masks, reachability_oracle(masks));
}

MaskStack effective_mask(const MaskStack& masks, const TopoState& topo) {
  masks.validate();
  MaskStack out;
  for (int l = 0; l < masks.depth(); ++l) {
    const MaskLayer& layer = masks.layers[l];
    if (topo.phi_r[l].size() != masks.level_width(l) ||
        topo.phi_l[l + 1].size() != masks.level_width(l + 1)) {
      throw ShapeError("topology state does not match mask layer " + std::to_string(l));
    }
    const BinaryVector rows = topo.phi_r[l].replicate(layer.row_tiling, 1);
    MaskLayer gated;
    gated.row_tiling = layer.row_tiling;
    for (const BinaryMatrix& head : layer.heads) {
      BinaryMatrix g = head;
      for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
          g(r, c) = static_cast<std::uint8_t>(head(r, c) & rows(r) & topo.phi_l[l + 1](c));
        }
      }
      gated.heads.push_back(std::move(g));
    }
    out.layers.push_back(std::move(gated));
  }
  return out;
}

}  // namespace tcprune
