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

#include "tcprune/data.hpp"
#include "tcprune/loss.hpp"
#include "tcprune/network.hpp"
#include "tcprune/topo.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tcprune {

struct EpochMetrics {
  int epoch = 0;
  double ce = 0.0;
  double budget = 0.0;
  double access_penalty = 0.0;
  double total = 0.0;
  double nu = 0.0;
  std::size_t kept_count = 0;  // crisp kept connections before gating
  double percent_ac = 100.0;   // of those crisp masks
};

/// Final masks of a run. Under TC the soft masks are psi(W) gated by the
/// accessibility of the binarized masks, so only accessible and
/// co-accessible connections survive; crisp = binarize(soft).
struct DeployedMasks {
  LayerTensors soft;
  MaskStack crisp;
};

DeployedMasks deploy_masks(const NetworkSpec& spec, const MaskedWeights& weights,
                           double temperature, const PruneConfig& config);

/// Mean over classes of per-class accuracy, evaluating W (.) crisp mask.
double mean_class_accuracy(const NetworkSpec& spec, const MaskedWeights& weights,
                           const MaskStack& crisp, const Dataset& data,
                           const std::vector<int>& indices);

/// Kept connections minus accessible-and-co-accessible ones, computed
/// through the phi passes on crisp masks (the crisp access penalty).
double crisp_access_penalty(const MaskStack& masks);

struct TrainResult {
  MaskedWeights weights;  // last finite weights
  double temperature = 1.0;
  DeployedMasks masks;
  TopoReport report;      // oracle audit of masks.crisp
  TopoReport raw_report;  // oracle audit before gating
  std::vector<EpochMetrics> metrics;
  int selected_epoch = 0;  // epoch whose weights are deployed
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::optional<std::string> failure;  // set when training hit a non-finite value
};

/// Annealed masked training with Adam, adaptive global learning rate and
/// global-norm clipping. Single-threaded and bit-reproducible for a seed.
/// With settle_epochs > 0 the deployed weights are those of the settle-phase
/// epoch with the lowest objective on the whole training split.
TrainResult train(const NetworkSpec& spec, const PruneConfig& config, const Dataset& data,
                  std::uint64_t seed, bool freeze_attention = false);

struct Checkpoint {
  NetworkSpec spec;
  MaskedWeights weights;
  double temperature = 1.0;
  double binarize_threshold = 0.5;
  bool tc_enabled = false;
  std::optional<double> target;
  LayerTensors soft_masks;
  MaskStack crisp_masks;
  TopoReport topo_report;
  std::uint64_t rng_seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws InputError on any malformed or inconsistent content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

nlohmann::json topo_report_to_json(const TopoReport& report);
TopoReport topo_report_from_json(const nlohmann::json& doc);

/// epoch,ce,budget,access_penalty,total,nu,kept_count,percent_ac
std::string metrics_csv(const std::vector<EpochMetrics>& rows);

}  // namespace tcprune
