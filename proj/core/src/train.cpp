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

#include "tcprune/train.hpp"

#include "tcprune/config.hpp"
#include "tcprune/mask.hpp"
#include "tcprune/optim.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <limits>
#include <cstdio>
#include <numeric>
#include <random>

namespace tcprune {

using detail::json;

DeployedMasks deploy_masks(const NetworkSpec& spec, const MaskedWeights& weights,
                           double temperature, const PruneConfig& config) {
  weights.check(spec);
  DeployedMasks out;
  out.soft.resize(spec.layers.size());
  for (int l = 0; l < spec.depth(); ++l) {
    for (const Matrix& w : weights.layers[l].filters) {
      out.soft[l].push_back(config.pruning_enabled()
                                ? psi_apply(w, temperature, "layer " + std::to_string(l))
                                : Matrix::Ones(w.rows(), w.cols()));
    }
  }
  auto to_stack = [&](const LayerTensors& soft) {
    MaskStack stack;
    for (int l = 0; l < spec.depth(); ++l) {
      MaskLayer layer;
      layer.row_tiling = spec.row_tiling(l);
      for (const Matrix& m : soft[l]) {
        layer.heads.push_back(binarize(m, config.binarize_threshold).mask);
      }
      stack.layers.push_back(std::move(layer));
    }
    return stack;
  };
  out.crisp = to_stack(out.soft);
  if (config.pruning_enabled() && config.tc_enabled) {
    const std::vector<LayerGate> gates = gates_from_topo(spec, phi_forward(out.crisp));
    for (int l = 0; l < spec.depth(); ++l) {
      for (Matrix& m : out.soft[l]) m = gates[l].row.asDiagonal() * m * gates[l].col.asDiagonal();
    }
    out.crisp = to_stack(out.soft);
  }
  return out;
}

double mean_class_accuracy(const NetworkSpec& spec, const MaskedWeights& weights,
                           const MaskStack& crisp, const Dataset& data,
                           const std::vector<int>& indices) {
  if (indices.empty()) return 0.0;
  LayerTensors eff(spec.layers.size());
  for (int l = 0; l < spec.depth(); ++l) {
    for (std::size_t k = 0; k < weights.layers[l].filters.size(); ++k) {
      eff[l].push_back(weights.layers[l].filters[k].cwiseProduct(
          crisp.layers[l].heads[k].cast<double>()));
    }
  }
  const ForwardCache cache = forward_effective(spec, eff, weights, stack_signals(data, indices));
  std::vector<int> hits(static_cast<std::size_t>(data.classes), 0);
  std::vector<int> totals(static_cast<std::size_t>(data.classes), 0);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const int y = data.records[static_cast<std::size_t>(indices[i])].label;
    Eigen::Index pred = 0;
    cache.logits().row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
    ++totals[static_cast<std::size_t>(y)];
    if (pred == y) ++hits[static_cast<std::size_t>(y)];
  }
  double sum = 0.0;
  int present = 0;
  for (std::size_t y = 0; y < totals.size(); ++y) {
    if (totals[y] == 0) continue;
    sum += static_cast<double>(hits[y]) / totals[y];
    ++present;
  }
  return present == 0 ? 0.0 : 100.0 * sum / present;
}

double crisp_access_penalty(const MaskStack& masks) {
  const TopoState topo = phi_forward(masks);
  return static_cast<double>(masks.kept()) - static_cast<double>(effective_mask(masks, topo).kept());
}

TrainResult train(const NetworkSpec& spec, const PruneConfig& config, const Dataset& data,
                  std::uint64_t seed, bool freeze_attention) {
  spec.validate_classifier();
  config.validate();
  TrainResult result;
  MaskedWeights weights = init_weights(spec, seed, data.adjacency);
  const Split split = stratified_split(data);
  if (split.train.empty()) throw InputError("dataset has no training records");

  std::mt19937_64 shuffle_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Adam adam(config.momentum, config.beta2);
  LrState lr{config.lr0, std::nullopt};
  std::vector<int> order = split.train;
  double temperature = config.pruning_enabled() ? config.anneal.temperature(0) : 1.0;
  MaskedWeights last_good = weights;
  double last_temperature = temperature;
  // Settle-phase selection: lowest training objective after an epoch.
  const Batch train_set{stack_signals(data, split.train), gather_labels(data, split.train)};
  std::optional<double> best_total;
  MaskedWeights best;
  double best_temperature = temperature;

  try {
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      temperature = config.pruning_enabled() ? config.anneal.temperature(epoch) : 1.0;
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      EpochMetrics row;
      row.epoch = epoch + 1;
      row.nu = lr.nu;
      const int left = config.epochs - epoch;
      const double settle = left <= config.settle_epochs
                                ? static_cast<double>(left) / (config.settle_epochs + 1)
                                : 1.0;
      std::size_t seen = 0;
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t stop =
            std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
        const std::vector<int> idx(order.begin() + static_cast<long>(start),
                                   order.begin() + static_cast<long>(stop));
        const Batch batch{stack_signals(data, idx), gather_labels(data, idx)};
        Evaluation ev = backward(spec, weights, batch, temperature, config);
        if (freeze_attention) {
          for (auto& layer : ev.grad.layers) {
            for (auto& a : layer.attention) a.setZero();
          }
        }
        clip_global_norm(ev.grad, config.clip_norm);
        adam.step(weights, ev.grad, lr.nu * settle);
        const double n = static_cast<double>(idx.size());
        row.ce += ev.loss.ce * n;
        row.budget += ev.loss.budget * n;
        row.access_penalty += ev.loss.access_penalty * n;
        row.total += ev.loss.total * n;
        seen += idx.size();
      }
      const double n = static_cast<double>(seen);
      row.ce /= n;
      row.budget /= n;
      row.access_penalty /= n;
      row.total /= n;
      lr = lr_update(lr, row.total,
                     config.lr_max.value_or(std::numeric_limits<double>::infinity()));

      const MaskStack raw =
          config.pruning_enabled()
              ? crisp_masks(spec, weights, temperature, config.binarize_threshold)
              : deploy_masks(spec, weights, temperature, config).crisp;
      const TopoReport report = consistency_report(raw);
      row.kept_count = report.total_kept;
      row.percent_ac = report.percent_ac;
      result.metrics.push_back(row);
      // Weights the optimizer produced may already be non-finite.
      for (const auto& layer : weights.layers) {
        for (const auto& w : layer.filters) {
          if (!w.allFinite()) throw NumericError("non-finite weights after epoch " + std::to_string(epoch + 1));
        }
      }
      last_good = weights;
      last_temperature = temperature;
      if (left <= config.settle_epochs) {
        const double total = total_loss(spec, weights, train_set, temperature, config).total;
        if (!best_total || total <= *best_total) {
          best_total = total;
          best = weights;
          best_temperature = temperature;
          result.selected_epoch = epoch + 1;
        }
      }
    }
  } catch (const NumericError& e) {
    result.failure = e.what();
  }

  if (best_total) {
    result.weights = std::move(best);
    temperature = best_temperature;
  } else {
    result.weights = std::move(last_good);
    temperature = last_temperature;
    result.selected_epoch = static_cast<int>(result.metrics.size());
  }
  result.temperature = temperature;
  const MaskStack raw = config.pruning_enabled()
                            ? crisp_masks(spec, result.weights, temperature, config.binarize_threshold)
                            : deploy_masks(spec, result.weights, temperature, config).crisp;
  result.raw_report = consistency_report(raw);
  result.masks = deploy_masks(spec, result.weights, temperature, config);
  result.report = consistency_report(result.masks.crisp);
  try {
    result.train_accuracy =
        mean_class_accuracy(spec, result.weights, result.masks.crisp, data, split.train);
    result.test_accuracy =
        mean_class_accuracy(spec, result.weights, result.masks.crisp, data, split.test);
  } catch (const NumericError& e) {
    // Even the last finite weights can overflow on evaluation.
    if (!result.failure) result.failure = e.what();
  }
  return result;
}

json topo_report_to_json(const TopoReport& report) {
  json layers = json::array();
  for (const LayerTopoReport& l : report.per_layer) {
    layers.push_back({{"kept", l.kept}, {"ac_kept", l.ac_kept}});
  }
  return json{{"total_kept", report.total_kept},
              {"ac_kept", report.ac_kept},
              {"percent_ac", report.percent_ac},
              {"per_layer", std::move(layers)}};
}

TopoReport topo_report_from_json(const json& doc) {
  TopoReport report;
  report.total_kept = doc.at("total_kept").get<std::size_t>();
  report.ac_kept = doc.at("ac_kept").get<std::size_t>();
  report.percent_ac = doc.at("percent_ac").get<double>();
  for (const json& l : doc.at("per_layer")) {
    report.per_layer.push_back({l.at("kept").get<std::size_t>(), l.at("ac_kept").get<std::size_t>()});
  }
  return report;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json weights = json::array();
  json soft = json::array();
  json crisp = json::array();
  for (std::size_t l = 0; l < ckpt.weights.layers.size(); ++l) {
    json filters = json::array();
    json attention = json::array();
    json soft_l = json::array();
    json crisp_l = json::array();
    for (const Matrix& m : ckpt.weights.layers[l].filters) filters.push_back(detail::matrix_to_json(m));
    for (const Matrix& m : ckpt.weights.layers[l].attention) attention.push_back(detail::matrix_to_json(m));
    for (const Matrix& m : ckpt.soft_masks[l]) soft_l.push_back(detail::matrix_to_json(m));
    for (const BinaryMatrix& m : ckpt.crisp_masks.layers[l].heads) crisp_l.push_back(detail::binary_to_json(m));
    weights.push_back({{"filters", std::move(filters)}, {"attention", std::move(attention)}});
    soft.push_back(std::move(soft_l));
    crisp.push_back(std::move(crisp_l));
  }
  const json doc = {{"format", "tcprune-checkpoint/1"},
                    {"spec", network_to_json(ckpt.spec)},
                    {"weights", std::move(weights)},
                    {"temperature", ckpt.temperature},
                    {"binarize_threshold", ckpt.binarize_threshold},
                    {"tc_enabled", ckpt.tc_enabled},
                    {"target", ckpt.target ? json(*ckpt.target) : json(nullptr)},
                    {"soft_masks", std::move(soft)},
                    {"crisp_masks", std::move(crisp)},
                    {"topo_report", topo_report_to_json(ckpt.topo_report)},
                    {"rng_seed", ckpt.rng_seed}};
  detail::write_file_atomic(path, doc.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string what = "checkpoint " + path.string();
  const json doc = detail::parse_json(detail::read_file(path), what);
  Checkpoint ckpt;
  try {
    if (doc.at("format") != "tcprune-checkpoint/1") throw InputError(what + ": unknown format");
    ckpt.spec = network_from_json(doc.at("spec"));
    ckpt.temperature = doc.at("temperature").get<double>();
    ckpt.binarize_threshold = doc.at("binarize_threshold").get<double>();
    ckpt.tc_enabled = doc.at("tc_enabled").get<bool>();
    if (!doc.at("target").is_null()) ckpt.target = doc.at("target").get<double>();
    ckpt.rng_seed = doc.at("rng_seed").get<std::uint64_t>();
    ckpt.topo_report = topo_report_from_json(doc.at("topo_report"));
    const json& weights = doc.at("weights");
    const json& soft = doc.at("soft_masks");
    const json& crisp = doc.at("crisp_masks");
    const std::size_t depth = ckpt.spec.layers.size();
    if (weights.size() != depth || soft.size() != depth || crisp.size() != depth) {
      throw InputError(what + ": layer count does not match spec");
    }
    ckpt.soft_masks.resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      const std::string where = what + ": layer " + std::to_string(l);
      LayerParams params;
      for (const json& m : weights[l].at("filters")) params.filters.push_back(detail::matrix_from_json(m, where));
      for (const json& m : weights[l].at("attention")) params.attention.push_back(detail::matrix_from_json(m, where));
      ckpt.weights.layers.push_back(std::move(params));
      for (const json& m : soft[l]) ckpt.soft_masks[l].push_back(detail::matrix_from_json(m, where));
      MaskLayer layer;
      layer.row_tiling = ckpt.spec.row_tiling(static_cast<int>(l));
      for (const json& m : crisp[l]) layer.heads.push_back(detail::binary_from_json(m, where));
      ckpt.crisp_masks.layers.push_back(std::move(layer));
      const LayerSpec& ls = ckpt.spec.layers[l];
      if (ckpt.soft_masks[l].size() != static_cast<std::size_t>(ls.heads) ||
          ckpt.crisp_masks.layers[l].heads.size() != static_cast<std::size_t>(ls.heads)) {
        throw InputError(where + ": mask head count does not match spec");
      }
      for (int k = 0; k < ls.heads; ++k) {
        const Matrix& s = ckpt.soft_masks[l][static_cast<std::size_t>(k)];
        const BinaryMatrix& c = ckpt.crisp_masks.layers[l].heads[static_cast<std::size_t>(k)];
        if (s.rows() != ls.in_dim || s.cols() != ls.out_dim || c.rows() != ls.in_dim ||
            c.cols() != ls.out_dim) {
          throw InputError(where + ": mask shape does not match spec");
        }
      }
    }
    ckpt.weights.check(ckpt.spec);
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(what + ": " + e.what());
  } catch (const json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
  return ckpt;
}

std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::string out = "epoch,ce,budget,access_penalty,total,nu,kept_count,percent_ac\n";
  char buf[512];
  for (const EpochMetrics& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%zu,%.6f\n", r.epoch, r.ce,
                  r.budget, r.access_penalty, r.total, r.nu, r.kept_count, r.percent_ac);
    out += buf;
  }
  return out;
}

}  // namespace tcprune
