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

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace tcprune {

struct NetworkConfig {
  std::string preset;  // "toy" or "fpha-like"; empty when layers are explicit
  NetworkSpec spec;    // explicit layers (unused with a preset)
  bool freeze_attention = false;
};

struct DataConfig {
  std::optional<SyntheticConfig> generate;
  std::string file;
};

struct RunConfig {
  NetworkConfig network;
  PruneConfig prune;
  std::optional<double> target_rate;  // percent of prunable weights removed
  DataConfig data;
  std::uint64_t seed = 1;
  std::string output = "run";
  nlohmann::json source;  // canonical form, for hashing
};

/// Validates and converts a config document. Unknown fields, wrong types and
/// out-of-range values are all collected into one ConfigError.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

/// Desk-scale presets. toy: gcn_block(4 heads, 8 channels) -> dense(32) ->
/// dense(classes). fpha-like: gcn_block(16 heads, 32 channels) ->
/// gcn_block(1 head, 128 filters) -> dense(classes).
NetworkSpec preset_network(const std::string& name, int joints, int chunks, int classes);
SyntheticConfig preset_data(const std::string& name);

/// Network for the run, with presets expanded against the dataset.
NetworkSpec resolve_network(const RunConfig& config, const Dataset& data);

/// Budget c = round((1 - rate/100) * total) for a rate, or the explicit
/// count; empty when the run does not prune.
std::optional<double> resolve_target(const RunConfig& config, std::size_t total);

Dataset load_or_generate(const RunConfig& config);

nlohmann::json network_to_json(const NetworkSpec& spec);
NetworkSpec network_from_json(const nlohmann::json& doc);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& doc);

}  // namespace tcprune
