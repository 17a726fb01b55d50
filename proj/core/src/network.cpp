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

#include "tcprune/network.hpp"

#include "tcprune/error.hpp"
#include "tcprune/mask.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <sstream>
#include <string>

namespace tcprune {
namespace {

std::string layer_name(int layer) { return "layer " + std::to_string(layer); }

[[noreturn]] void shape_error(int layer, const std::string& what) {
  throw ShapeError(layer_name(layer) + ": " + what);
}

Matrix apply_activation(const Matrix& z, Activation f) {
  if (f == Activation::relu) return z.cwiseMax(0.0);
  return z;
}

Matrix activation_grad(const Matrix& z, const Matrix& g, Activation f) {
  if (f == Activation::relu) return (z.array() > 0.0).select(g, 0.0);
  return g;
}

void check_activation_finite(const Matrix& out, int layer) {
  if (out.allFinite()) return;
  for (Eigen::Index b = 0; b < out.rows(); ++b) {
    if (!out.row(b).allFinite()) {
      std::ostringstream msg;
      msg << "non-finite activation in " << layer_name(layer) << " at batch index " << b;
      throw NumericError(msg.str());
    }
  }
}

// Node-feature view (nodes x channels) of one sample entering a gcn block.
// The first block reads the raw signal U (channels x nodes); later blocks
// read the node-major output of the previous block.
Matrix node_features(const Matrix& input, Eigen::Index row, const LayerSpec& layer,
                     bool raw_signal) {
  if (raw_signal) {
    return Eigen::Map<const Matrix>(input.row(row).data(), layer.in_dim, layer.nodes)
        .transpose();
  }
  return Eigen::Map<const Matrix>(input.row(row).data(), layer.nodes, layer.in_dim);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
  return kind == LayerKind::gcn_block ? "gcn_block" : "dense";
}

std::string_view to_string(Activation act) {
  switch (act) {
    case Activation::relu:
      return "relu";
    case Activation::identity:
      return "identity";
    case Activation::softmax_logits:
      return "softmax_logits";
  }
  return "identity";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name) {
  if (name == "gcn_block") return LayerKind::gcn_block;
  if (name == "dense") return LayerKind::dense;
  return std::nullopt;
}

std::optional<Activation> parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  if (name == "softmax_logits") return Activation::softmax_logits;
  return std::nullopt;
}

void NetworkSpec::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  bool seen_dense = false;
  for (int l = 0; l < depth(); ++l) {
    const LayerSpec& cur = layers[l];
    if (cur.in_dim <= 0 || cur.out_dim <= 0) shape_error(l, "dimensions must be positive");
    if (cur.heads <= 0) shape_error(l, "head count must be positive");
    if (cur.kind == LayerKind::dense) {
      if (cur.heads != 1) shape_error(l, "dense layers have exactly one head");
      seen_dense = true;
    } else {
      if (seen_dense) shape_error(l, "gcn_block may not follow a dense layer");
      if (cur.nodes <= 0) shape_error(l, "gcn_block needs a positive node count");
    }
    if (l == 0) continue;
    const LayerSpec& prev = layers[l - 1];
    if (prev.kind == LayerKind::gcn_block && cur.kind == LayerKind::gcn_block &&
        prev.nodes != cur.nodes) {
      shape_error(l, "node count differs from the preceding gcn_block");
    }
    const int expected =
        cur.kind == LayerKind::gcn_block ? prev.out_dim : prev.output_width();
    if (cur.in_dim != expected) {
      std::ostringstream msg;
      msg << "in_dim " << cur.in_dim << " does not chain with previous output " << expected;
      shape_error(l, msg.str());
    }
  }
}

void NetworkSpec::validate_classifier() const {
  validate();
  if (depth() < 2) throw ShapeError("classifier needs at least two layers");
  for (int l = 0; l + 1 < depth(); ++l) {
    if (layers[l].activation == Activation::softmax_logits) {
      shape_error(l, "softmax_logits is only allowed on the terminal layer");
    }
  }
  if (layers.back().activation != Activation::softmax_logits ||
      layers.back().kind != LayerKind::dense) {
    shape_error(depth() - 1, "terminal layer must be dense with softmax_logits");
  }
}

int NetworkSpec::input_width() const { return layers.front().input_width(); }

int NetworkSpec::num_classes() const { return layers.back().output_width(); }

std::size_t NetworkSpec::prunable_count() const {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.prunable_count();
  return total;
}

int NetworkSpec::level_width(int level) const {
  if (level == 0) return layers.front().in_dim;
  return layers[level - 1].out_dim;
}

int NetworkSpec::row_tiling(int layer) const {
  if (layer == 0) return 1;
  const LayerSpec& prev = layers[layer - 1];
  if (prev.kind == LayerKind::gcn_block && layers[layer].kind == LayerKind::dense) {
    return prev.nodes;
  }
  return 1;
}

void MaskedWeights::check(const NetworkSpec& spec) const {
  if (static_cast<int>(layers.size()) != spec.depth()) {
    std::ostringstream msg;
    msg << "weights have " << layers.size() << " layers, spec has " << spec.depth();
    throw ShapeError(msg.str());
  }
  for (int l = 0; l < spec.depth(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const LayerParams& lp = layers[l];
    if (static_cast<int>(lp.filters.size()) != ls.heads) shape_error(l, "filter head count");
    for (std::size_t k = 0; k < lp.filters.size(); ++k) {
      if (lp.filters[k].rows() != ls.in_dim || lp.filters[k].cols() != ls.out_dim) {
        shape_error(l, "filter head " + std::to_string(k) + " has wrong shape");
      }
    }
    const std::size_t want_attention =
        ls.kind == LayerKind::gcn_block ? static_cast<std::size_t>(ls.heads) : 0;
    if (lp.attention.size() != want_attention) shape_error(l, "attention head count");
    for (std::size_t k = 0; k < lp.attention.size(); ++k) {
      if (lp.attention[k].rows() != ls.nodes || lp.attention[k].cols() != ls.nodes) {
        shape_error(l, "attention head " + std::to_string(k) + " is not nodes x nodes");
      }
    }
  }
}

MaskedWeights init_weights(const NetworkSpec& spec, std::uint64_t seed,
                           const Matrix& adjacency) {
  spec.validate();
  std::mt19937_64 rng(seed);
  MaskedWeights weights;
  weights.layers.resize(spec.layers.size());
  for (int l = 0; l < spec.depth(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(ls.in_dim + ls.out_dim));
    std::uniform_real_distribution<double> uniform(-bound, bound);
    for (int k = 0; k < ls.heads; ++k) {
      Matrix w(ls.in_dim, ls.out_dim);
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng);
      weights.layers[l].filters.push_back(std::move(w));
    }
    if (ls.kind != LayerKind::gcn_block) continue;

    Matrix normalized = Matrix::Identity(ls.nodes, ls.nodes);
    if (adjacency.size() > 0) {
      if (adjacency.rows() != ls.nodes || adjacency.cols() != ls.nodes) {
        shape_error(l, "adjacency is not nodes x nodes");
      }
      const Matrix with_loops = adjacency + Matrix::Identity(ls.nodes, ls.nodes);
      const Vector inv_sqrt_deg = with_loops.rowwise().sum().cwiseSqrt().cwiseInverse();
      normalized = inv_sqrt_deg.asDiagonal() * with_loops * inv_sqrt_deg.asDiagonal();
    }
    Matrix power = Matrix::Identity(ls.nodes, ls.nodes);
    for (int k = 0; k < ls.heads; ++k) {
      weights.layers[l].attention.push_back(power);
      power = power * normalized;
    }
  }
  return weights;
}

LayerGate make_gate(const NetworkSpec& spec, int layer, const Vector& phi_r_prev,
                    const Vector& phi_l) {
  const int tiling = spec.row_tiling(layer);
  LayerGate gate;
  gate.row = phi_r_prev.replicate(tiling, 1);
  gate.col = phi_l;
  return gate;
}

std::vector<LayerGate> gates_from_topo(const NetworkSpec& spec, const TopoState& topo) {
  if (static_cast<int>(topo.phi_r.size()) != spec.depth() + 1 ||
      static_cast<int>(topo.phi_l.size()) != spec.depth() + 1) {
    throw ShapeError("topology state does not have one vector per level");
  }
  std::vector<LayerGate> gates;
  for (int l = 0; l < spec.depth(); ++l) {
    if (topo.phi_r[l].size() != spec.level_width(l) ||
        topo.phi_l[l + 1].size() != spec.level_width(l + 1)) {
      shape_error(l, "topology state width mismatch");
    }
    gates.push_back(make_gate(spec, l, topo.phi_r[l].cast<double>(),
                              topo.phi_l[l + 1].cast<double>()));
  }
  return gates;
}

LayerTensors effective_filters(const NetworkSpec& spec, const MaskedWeights& weights,
                               double temperature, const std::vector<LayerGate>* gates) {
  weights.check(spec);
  LayerTensors out(spec.layers.size());
  for (int l = 0; l < spec.depth(); ++l) {
    for (std::size_t k = 0; k < weights.layers[l].filters.size(); ++k) {
      const Matrix& w = weights.layers[l].filters[k];
      Matrix eff = w.cwiseProduct(psi_apply(w, temperature, layer_name(l)));
      if (gates != nullptr) {
        const LayerGate& g = (*gates)[l];
        eff = g.row.asDiagonal() * eff * g.col.asDiagonal();
      }
      out[l].push_back(std::move(eff));
    }
  }
  return out;
}

ForwardCache forward_effective(const NetworkSpec& spec, const LayerTensors& filters,
                               const MaskedWeights& weights, const Matrix& input) {
  if (input.cols() != spec.input_width()) {
    std::ostringstream msg;
    msg << "input width " << input.cols() << " does not match network input "
        << spec.input_width();
    shape_error(0, msg.str());
  }
  ForwardCache cache;
  const Eigen::Index batch = input.rows();
  Matrix current = input;
  for (int l = 0; l < spec.depth(); ++l) {
    const LayerSpec& ls = spec.layers[l];
    Matrix z;
    if (ls.kind == LayerKind::dense) {
      z = current * filters[l][0];
    } else {
      z.resize(batch, ls.output_width());
      for (Eigen::Index b = 0; b < batch; ++b) {
        const Matrix x = node_features(current, b, ls, l == 0);
        Matrix acc = Matrix::Zero(ls.nodes, ls.out_dim);
        for (int k = 0; k < ls.heads; ++k) {
          acc.noalias() += weights.layers[l].attention[k] * (x * filters[l][k]);
        }
        z.row(b) = Eigen::Map<const Eigen::RowVectorXd>(acc.data(), acc.size());
      }
    }
    Matrix out = apply_activation(z, ls.activation);
    check_activation_finite(out, l);
    cache.inputs.push_back(std::move(current));
    cache.pre.push_back(std::move(z));
    current = out;
    cache.out.push_back(std::move(out));
  }
  return cache;
}

NetworkGrad backward_effective(const NetworkSpec& spec, const LayerTensors& filters,
                               const MaskedWeights& weights, const ForwardCache& cache,
                               const Matrix& d_out) {
  NetworkGrad grad;
  grad.filters.resize(spec.layers.size());
  grad.attention.resize(spec.layers.size());
  Matrix g = d_out;
  for (int l = spec.depth() - 1; l >= 0; --l) {
    const LayerSpec& ls = spec.layers[l];
    const Matrix gz = activation_grad(cache.pre[l], g, ls.activation);
    const Matrix& x_in = cache.inputs[l];
    if (ls.kind == LayerKind::dense) {
      grad.filters[l].push_back(x_in.transpose() * gz);
      if (l > 0) g = gz * filters[l][0].transpose();
    } else {
      for (int k = 0; k < ls.heads; ++k) {
        grad.filters[l].push_back(Matrix::Zero(ls.in_dim, ls.out_dim));
        grad.attention[l].push_back(Matrix::Zero(ls.nodes, ls.nodes));
      }
      Matrix g_in;
      if (l > 0) g_in = Matrix::Zero(x_in.rows(), x_in.cols());
      for (Eigen::Index b = 0; b < x_in.rows(); ++b) {
        const Matrix x = node_features(x_in, b, ls, l == 0);
        const Matrix gzb = Eigen::Map<const Matrix>(gz.row(b).data(), ls.nodes, ls.out_dim);
        Matrix gx;
        if (l > 0) gx = Matrix::Zero(ls.nodes, ls.in_dim);
        for (int k = 0; k < ls.heads; ++k) {
          const Matrix& a = weights.layers[l].attention[k];
          const Matrix& w = filters[l][k];
          grad.filters[l][k].noalias() += (a * x).transpose() * gzb;
          grad.attention[l][k].noalias() += gzb * (x * w).transpose();
          if (l > 0) gx.noalias() += a.transpose() * gzb * w.transpose();
        }
        if (l > 0) g_in.row(b) = Eigen::Map<const Eigen::RowVectorXd>(gx.data(), gx.size());
      }
      if (l > 0) g = std::move(g_in);
    }
  }
  return grad;
}

Activations forward_masked(const NetworkSpec& spec, const MaskedWeights& weights,
                           const Matrix& input, double temperature, const TopoState* gating) {
  spec.validate();
  std::vector<LayerGate> gates;
  if (gating != nullptr) gates = gates_from_topo(spec, *gating);
  const LayerTensors eff =
      effective_filters(spec, weights, temperature, gating != nullptr ? &gates : nullptr);
  ForwardCache cache = forward_effective(spec, eff, weights, input);
  return Activations{std::move(cache.out)};
}

Matrix gcn_block_forward(const std::vector<Matrix>& attention, const Matrix& signal,
                         const std::vector<Matrix>& filters, Activation f) {
  if (attention.size() != filters.size() || attention.empty()) {
    throw ShapeError("gcn block needs the same positive number of attention and filter heads");
  }
  const Eigen::Index s = signal.rows();
  const Eigen::Index n = signal.cols();
  const Eigen::Index c = filters.front().cols();
  Matrix acc = Matrix::Zero(n, c);
  for (std::size_t k = 0; k < attention.size(); ++k) {
    if (attention[k].rows() != n || attention[k].cols() != n) {
      throw ShapeError("gcn head " + std::to_string(k) + ": attention is not n x n");
    }
    if (filters[k].rows() != s || filters[k].cols() != c) {
      throw ShapeError("gcn head " + std::to_string(k) + ": filter is not s x C");
    }
    acc.noalias() += attention[k] * signal.transpose() * filters[k];
  }
  return apply_activation(acc, f);
}

double unpruned_count(const MaskedWeights& weights, double temperature) {
  double total = 0.0;
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    for (const Matrix& w : weights.layers[l].filters) {
      total += psi_apply(w, temperature, layer_name(static_cast<int>(l))).sum();
    }
  }
  return total;
}

}  // namespace tcprune
