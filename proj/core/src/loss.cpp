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

#include "tcprune/loss.hpp"

#include "tcprune/error.hpp"

#include <cmath>
#include <sstream>
#include <string>

namespace tcprune {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Sums consecutive blocks of `width` entries: (tiling * width) -> width.
Vector fold(const Vector& rows, int width) {
  Vector out = Vector::Zero(width);
  for (Eigen::Index t = 0; t < rows.size() / width; ++t) out += rows.segment(t * width, width);
  return out;
}

// Soft masks, their derivatives and the matrices the passes run on.
struct LayerMasks {
  std::vector<Matrix> soft;   // psi_T(W)
  std::vector<Matrix> dsoft;  // psi_T'(W)
  std::vector<Matrix> pass;   // crisp (STE) or soft (smooth) matrix seen by the passes
};

std::vector<LayerMasks> build_masks(const NetworkSpec& spec, const MaskedWeights& weights,
                                    double temperature, const PruneConfig& config,
                                    bool with_grad) {
  std::vector<LayerMasks> out(spec.layers.size());
  for (int l = 0; l < spec.depth(); ++l) {
    const std::string name = "layer " + std::to_string(l);
    for (const Matrix& w : weights.layers[l].filters) {
      if (!config.pruning_enabled()) {
        out[l].soft.push_back(Matrix::Ones(w.rows(), w.cols()));
        if (with_grad) out[l].dsoft.push_back(Matrix::Zero(w.rows(), w.cols()));
        out[l].pass.push_back(Matrix::Ones(w.rows(), w.cols()));
        continue;
      }
      Matrix soft = psi_apply(w, temperature, name);
      if (with_grad) out[l].dsoft.push_back(psi_grad(w, temperature, name));
      if (config.gate_mode == GateMode::straight_through) {
        out[l].pass.push_back(binarize(soft, config.binarize_threshold).mask.cast<double>());
      } else {
        out[l].pass.push_back(soft);
      }
      out[l].soft.push_back(std::move(soft));
    }
  }
  return out;
}

// Accessibility passes with their pre-activations, kept for the backward.
struct Passes {
  std::vector<Vector> phi_r;  // levels 0..L
  std::vector<Vector> phi_l;
  std::vector<Vector> a_r;    // a_r[l] feeds phi_r[l], l >= 1
  std::vector<Vector> a_l;    // a_l[l] feeds phi_l[l], l <= L-1
};

Passes run_passes(const NetworkSpec& spec, const std::vector<LayerMasks>& masks,
                  const PruneConfig& config) {
  const int depth = spec.depth();
  const double slope = config.ste_slope;
  auto gate_fn = [&](const Vector& a) -> Vector {
    if (config.gate_mode == GateMode::straight_through) {
      return (a.array() > 0.0).cast<double>();
    }
    return a.unaryExpr([slope](double x) { return sigmoid(slope * x); });
  };

  Passes p;
  p.phi_r.resize(depth + 1);
  p.phi_l.resize(depth + 1);
  p.a_r.resize(depth + 1);
  p.a_l.resize(depth + 1);

  p.phi_r[0] = Vector::Ones(spec.level_width(0));
  for (int l = 0; l < depth; ++l) {
    const Vector in = p.phi_r[l].replicate(spec.row_tiling(l), 1);
    Vector a = Vector::Zero(spec.level_width(l + 1));
    for (const Matrix& m : masks[l].pass) a.noalias() += m.transpose() * in;
    p.phi_r[l + 1] = gate_fn(a);
    p.a_r[l + 1] = std::move(a);
  }

  p.phi_l[depth] = Vector::Ones(spec.level_width(depth));
  for (int l = depth - 1; l >= 0; --l) {
    Vector rows = Vector::Zero(masks[l].pass.front().rows());
    for (const Matrix& m : masks[l].pass) rows.noalias() += m * p.phi_l[l + 1];
    Vector a = fold(rows, spec.level_width(l));
    p.phi_l[l] = gate_fn(a);
    p.a_l[l] = std::move(a);
  }
  return p;
}

Vector gate_derivative(const Vector& a, double slope) {
  return a.unaryExpr([slope](double x) {
    const double s = sigmoid(slope * x);
    return slope * s * (1.0 - s);
  });
}

TopoState to_topo(const Passes& p) {
  TopoState topo;
  for (const Vector& v : p.phi_r) topo.phi_r.push_back((v.array() > 0.5).cast<std::uint8_t>());
  for (const Vector& v : p.phi_l) topo.phi_l.push_back((v.array() > 0.5).cast<std::uint8_t>());
  return topo;
}

void check_gradient(const Gradients& grad) {
  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    bool ok = true;
    for (const Matrix& g : grad.layers[l].filters) ok = ok && g.allFinite();
    for (const Matrix& g : grad.layers[l].attention) ok = ok && g.allFinite();
    if (!ok) {
      throw NumericError("non-finite gradient in layer " + std::to_string(l) +
                         " (exploding gradient)");
    }
  }
}

}  // namespace

void PruneConfig::validate() const {
  std::vector<std::string> bad;
  if (target && !(*target >= 0.0)) bad.push_back("prune.target: must be >= 0");
  if (!(lambda >= 0.0)) bad.push_back("prune.lambda: must be >= 0");
  if (!(eta >= 0.0)) bad.push_back("prune.eta: must be >= 0");
  if (!(lr0 > 0.0)) bad.push_back("prune.lr0: must be > 0");
  if (lr_max && !(*lr_max >= lr0)) bad.push_back("prune.lr_max: must be >= lr0");
  if (settle_epochs < 0 || settle_epochs > epochs) {
    bad.push_back("prune.settle_epochs: must lie in [0, epochs]");
  }
  if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
    bad.push_back("prune.binarize_threshold: must lie in (0, 1)");
  }
  if (epochs < 0) bad.push_back("prune.epochs: must be >= 0");
  if (batch_size <= 0) bad.push_back("prune.batch_size: must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) bad.push_back("prune.momentum: must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) bad.push_back("prune.beta2: must lie in [0, 1)");
  if (!(ste_slope > 0.0)) bad.push_back("prune.ste_slope: must be > 0");
  if (!(clip_norm > 0.0)) bad.push_back("prune.clip_norm: must be > 0");
  try {
    anneal.validate();
  } catch (const Error& e) {
    bad.push_back(std::string("prune.") + e.what());
  }
  if (!bad.empty()) throw ConfigError(std::move(bad));
}

double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* grad) {
  if (logits.rows() == 0) throw Error("cross_entropy: empty batch");
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw ShapeError("cross_entropy: label count does not match batch size");
  }
  const Eigen::Index batch = logits.rows();
  if (grad != nullptr) grad->resize(logits.rows(), logits.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int y = labels[static_cast<std::size_t>(b)];
    if (y < 0 || y >= logits.cols()) {
      throw Error("cross_entropy: label " + std::to_string(y) + " out of range");
    }
    const double peak = logits.row(b).maxCoeff();
    const Eigen::RowVectorXd shifted = logits.row(b).array() - peak;
    const double log_norm = std::log(shifted.array().exp().sum());
    total += log_norm - shifted(y);
    if (grad != nullptr) {
      grad->row(b) = (shifted.array() - log_norm).exp() / static_cast<double>(batch);
      (*grad)(b, y) -= 1.0 / static_cast<double>(batch);
    }
  }
  return total / static_cast<double>(batch);
}

double kept_mass(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                 const TopoState* topo) {
  weights.check(spec);
  std::vector<LayerGate> gates;
  if (topo != nullptr) gates = gates_from_topo(spec, *topo);
  double total = 0.0;
  for (int l = 0; l < spec.depth(); ++l) {
    for (const Matrix& w : weights.layers[l].filters) {
      const Matrix soft = psi_apply(w, temperature, "layer " + std::to_string(l));
      total += topo == nullptr ? soft.sum() : gates[l].row.dot(soft * gates[l].col);
    }
  }
  return total;
}

double budget_loss(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                   double target, const TopoState* topo) {
  const double residual = kept_mass(spec, weights, temperature, topo) - target;
  return residual * residual;
}

double access_penalty(const NetworkSpec& spec, const MaskedWeights& weights, double temperature,
                      const TopoState& topo) {
  return kept_mass(spec, weights, temperature) - kept_mass(spec, weights, temperature, &topo);
}

Evaluation evaluate(const NetworkSpec& spec, const MaskedWeights& weights, const Batch& batch,
                    double temperature, const PruneConfig& config, bool with_grad) {
  weights.check(spec);
  const int depth = spec.depth();
  const bool tc = config.tc_enabled && config.pruning_enabled();
  const std::vector<LayerMasks> masks =
      build_masks(spec, weights, temperature, config, with_grad);

  Passes passes;
  std::vector<LayerGate> gates;
  if (tc) {
    passes = run_passes(spec, masks, config);
    for (int l = 0; l < depth; ++l) {
      gates.push_back(make_gate(spec, l, passes.phi_r[l], passes.phi_l[l + 1]));
    }
  }

  // Effective filters W (.) psi (.) gate.
  LayerTensors eff(spec.layers.size());
  double soft_mass = 0.0;
  double gated_mass = 0.0;
  for (int l = 0; l < depth; ++l) {
    for (std::size_t k = 0; k < masks[l].soft.size(); ++k) {
      const Matrix& w = weights.layers[l].filters[k];
      const Matrix& soft = masks[l].soft[k];
      const Matrix& counted = masks[l].pass[k];
      soft_mass += counted.sum();
      if (tc) {
        gated_mass += gates[l].row.dot(counted * gates[l].col);
        eff[l].push_back(gates[l].row.asDiagonal() * w.cwiseProduct(soft) *
                         gates[l].col.asDiagonal());
      } else {
        eff[l].push_back(w.cwiseProduct(soft));
      }
    }
  }
  if (!tc) gated_mass = soft_mass;

  const ForwardCache cache = forward_effective(spec, eff, weights, batch.inputs);
  Matrix d_logits;
  Evaluation result;
  result.loss.ce = cross_entropy(cache.logits(), batch.labels, with_grad ? &d_logits : nullptr);
  result.loss.soft_mass = soft_mass;
  result.loss.gated_mass = gated_mass;
  double residual = 0.0;
  if (config.pruning_enabled()) {
    residual = gated_mass - *config.target;
    result.loss.budget = config.lambda * residual * residual;
  }
  if (tc) result.loss.access_penalty = config.eta * (soft_mass - gated_mass);
  result.loss.total = result.loss.ce + result.loss.budget + result.loss.access_penalty;
  if (!std::isfinite(result.loss.total)) throw NumericError("non-finite loss");
  result.logits = cache.logits();
  if (tc) result.topo = to_topo(passes);
  if (!with_grad) return result;

  const NetworkGrad net = backward_effective(spec, eff, weights, cache, d_logits);

  // d/d(gated mass) and d/d(soft mass) of the two regularizers.
  const double beta = config.pruning_enabled() ? 2.0 * config.lambda * residual : 0.0;
  const double d_gated = tc ? beta - config.eta : beta;
  const double d_soft = tc ? config.eta : 0.0;

  std::vector<std::vector<Matrix>> d_mask(depth);
  Gradients& grad = result.grad;
  grad.layers.resize(spec.layers.size());
  std::vector<Vector> g_phi_r(depth + 1);
  std::vector<Vector> g_phi_l(depth + 1);
  for (int l = 0; l <= depth; ++l) {
    g_phi_r[l] = Vector::Zero(spec.level_width(l));
    g_phi_l[l] = Vector::Zero(spec.level_width(l));
  }

  for (int l = 0; l < depth; ++l) {
    Matrix g_gate;  // d loss / d outer(row, col)
    for (std::size_t k = 0; k < masks[l].soft.size(); ++k) {
      const Matrix& w = weights.layers[l].filters[k];
      const Matrix& soft = masks[l].soft[k];
      const Matrix& ge = net.filters[l][k];
      if (tc) {
        const Matrix gate = gates[l].row * gates[l].col.transpose();
        d_mask[l].push_back(ge.cwiseProduct(w).cwiseProduct(gate) +
                            (d_gated * gate.array() + d_soft).matrix());
        grad.layers[l].filters.push_back(ge.cwiseProduct(soft).cwiseProduct(gate));
        const Matrix contrib = ge.cwiseProduct(w).cwiseProduct(soft) + d_gated * masks[l].pass[k];
        if (g_gate.size() == 0) {
          g_gate = contrib;
        } else {
          g_gate += contrib;
        }
      } else {
        d_mask[l].push_back((ge.cwiseProduct(w).array() + d_gated).matrix());
        grad.layers[l].filters.push_back(ge.cwiseProduct(soft));
      }
    }
    grad.layers[l].attention = net.attention[l];
    if (tc) {
      g_phi_r[l] += fold(g_gate * gates[l].col, spec.level_width(l));
      g_phi_l[l + 1] += g_gate.transpose() * gates[l].row;
    }
  }

  if (tc) {
    const double slope = config.ste_slope;
    // phi_r was computed left to right; unwind right to left.
    for (int l = depth - 1; l >= 0; --l) {
      const Vector g_a = g_phi_r[l + 1].cwiseProduct(gate_derivative(passes.a_r[l + 1], slope));
      const Vector in = passes.phi_r[l].replicate(spec.row_tiling(l), 1);
      for (std::size_t k = 0; k < masks[l].soft.size(); ++k) {
        d_mask[l][k].noalias() += in * g_a.transpose();
        if (l > 0) g_phi_r[l] += fold(masks[l].soft[k] * g_a, spec.level_width(l));
      }
    }
    // phi_l was computed right to left; unwind left to right.
    for (int l = 0; l < depth; ++l) {
      const Vector g_a = g_phi_l[l].cwiseProduct(gate_derivative(passes.a_l[l], slope));
      const Vector expanded = g_a.replicate(spec.row_tiling(l), 1);
      for (std::size_t k = 0; k < masks[l].soft.size(); ++k) {
        d_mask[l][k].noalias() += expanded * passes.phi_l[l + 1].transpose();
        if (l + 1 < depth) g_phi_l[l + 1] += masks[l].soft[k].transpose() * expanded;
      }
    }
  }

  for (int l = 0; l < depth; ++l) {
    for (std::size_t k = 0; k < masks[l].soft.size(); ++k) {
      grad.layers[l].filters[k] += d_mask[l][k].cwiseProduct(masks[l].dsoft[k]);
    }
  }
  check_gradient(grad);
  return result;
}

LossBreakdown total_loss(const NetworkSpec& spec, const MaskedWeights& weights,
                         const Batch& batch, double temperature, const PruneConfig& config) {
  return evaluate(spec, weights, batch, temperature, config, false).loss;
}

Evaluation backward(const NetworkSpec& spec, const MaskedWeights& weights, const Batch& batch,
                    double temperature, const PruneConfig& config) {
  return evaluate(spec, weights, batch, temperature, config, true);
}

}  // namespace tcprune
