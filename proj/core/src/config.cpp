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

#include "tcprune/config.hpp"

#include "json_util.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace tcprune {

using detail::json;

namespace {

// Collects field-level diagnostics while reading one JSON object.
class Reader {
 public:
  Reader(const json& obj, std::string path, std::vector<std::string>& errors)
      : obj_(obj), path_(std::move(path)), errors_(errors) {
    if (!obj_.is_object()) fail(path_, "expected an object");
  }

  // Reports every key not listed in `known`.
  void allow(std::initializer_list<const char*> known) {
    if (!obj_.is_object()) return;
    std::set<std::string> names(known.begin(), known.end());
    for (const auto& item : obj_.items()) {
      if (!names.contains(item.key())) fail(field(item.key()), "unknown field");
    }
  }

  bool has(const char* key) const {
    return obj_.is_object() && obj_.contains(key) && !obj_.at(key).is_null();
  }

  const json& at(const char* key) const { return obj_.at(key); }
  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    if (!obj_.at(key).is_number()) return fail(field(key), "expected a number");
    out = obj_.at(key).get<double>();
  }

  void integer(const char* key, int& out) {
    if (!has(key)) return;
    if (!obj_.at(key).is_number_integer()) return fail(field(key), "expected an integer");
    out = obj_.at(key).get<int>();
  }

  void seed(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    if (!obj_.at(key).is_number_unsigned()) {
      return fail(field(key), "expected a non-negative integer");
    }
    out = obj_.at(key).get<std::uint64_t>();
  }

  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    if (!obj_.at(key).is_boolean()) return fail(field(key), "expected true or false");
    out = obj_.at(key).get<bool>();
  }

  void string(const char* key, std::string& out) {
    if (!has(key)) return;
    if (!obj_.at(key).is_string()) return fail(field(key), "expected a string");
    out = obj_.at(key).get<std::string>();
  }

  void fail(const std::string& where, const std::string& what) {
    errors_.push_back(where + ": " + what);
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string>& errors_;
};

LayerSpec parse_layer(const json& obj, const std::string& path, std::vector<std::string>& errors) {
  Reader r(obj, path, errors);
  r.allow({"kind", "in_dim", "out_dim", "activation", "heads", "nodes"});
  LayerSpec layer;
  std::string kind = "dense";
  std::string act = "relu";
  r.string("kind", kind);
  r.string("activation", act);
  r.integer("in_dim", layer.in_dim);
  r.integer("out_dim", layer.out_dim);
  r.integer("heads", layer.heads);
  r.integer("nodes", layer.nodes);
  if (auto k = parse_layer_kind(kind)) {
    layer.kind = *k;
  } else {
    r.fail(r.field("kind"), "expected gcn_block or dense");
  }
  if (auto a = parse_activation(act)) {
    layer.activation = *a;
  } else {
    r.fail(r.field("activation"), "expected relu, identity or softmax_logits");
  }
  if (!r.has("in_dim")) r.fail(r.field("in_dim"), "required");
  if (!r.has("out_dim")) r.fail(r.field("out_dim"), "required");
  return layer;
}

SyntheticConfig parse_generate(const json& obj, std::vector<std::string>& errors) {
  Reader r(obj, "data.generate", errors);
  r.allow({"preset", "classes", "sequences_per_class", "joints", "frames", "chunks",
           "noise_sigma", "seed", "topology", "knn_k", "self_loops"});
  SyntheticConfig cfg;
  std::string preset;
  r.string("preset", preset);
  if (!preset.empty()) {
    if (preset == "toy" || preset == "fpha-like") {
      cfg = preset_data(preset);
    } else {
      r.fail("data.generate.preset", "expected toy or fpha-like");
    }
  }
  r.integer("classes", cfg.classes);
  r.integer("sequences_per_class", cfg.sequences_per_class);
  r.integer("joints", cfg.joints);
  r.integer("frames", cfg.frames);
  r.integer("chunks", cfg.chunks);
  r.number("noise_sigma", cfg.noise_sigma);
  r.seed("seed", cfg.seed);
  r.integer("knn_k", cfg.knn_k);
  r.boolean("self_loops", cfg.self_loops);
  std::string topology = to_string(cfg.topology);
  r.string("topology", topology);
  if (auto t = parse_topology(topology)) {
    cfg.topology = *t;
  } else {
    r.fail("data.generate.topology", "expected chain, star or knn");
  }
  if (cfg.classes < 2) r.fail("data.generate.classes", "must be >= 2");
  if (cfg.sequences_per_class < 2) r.fail("data.generate.sequences_per_class", "must be >= 2");
  if (cfg.joints < 1) r.fail("data.generate.joints", "must be >= 1");
  if (cfg.chunks < 1) r.fail("data.generate.chunks", "must be >= 1");
  if (cfg.frames < cfg.chunks) r.fail("data.generate.frames", "must be >= chunks");
  if (!(cfg.noise_sigma >= 0.0)) r.fail("data.generate.noise_sigma", "must be >= 0");
  if (cfg.topology == GraphTopology::knn && (cfg.knn_k < 1 || cfg.knn_k >= cfg.joints)) {
    r.fail("data.generate.knn_k", "must satisfy 0 < k < joints");
  }
  return cfg;
}

}  // namespace

NetworkSpec preset_network(const std::string& name, int joints, int chunks, int classes) {
  const int channels = 3 * chunks;
  NetworkSpec spec;
  if (name == "toy") {
    spec.layers = {
        {LayerKind::gcn_block, channels, 8, Activation::relu, 4, joints},
        {LayerKind::dense, joints * 8, 32, Activation::relu, 1, 1},
        {LayerKind::dense, 32, classes, Activation::softmax_logits, 1, 1},
    };
  } else if (name == "fpha-like") {
    spec.layers = {
        {LayerKind::gcn_block, channels, 32, Activation::relu, 16, joints},
        {LayerKind::gcn_block, 32, 128, Activation::relu, 1, joints},
        {LayerKind::dense, joints * 128, classes, Activation::softmax_logits, 1, 1},
    };
  } else {
    throw ConfigError({"network.preset: unknown preset '" + name + "'"});
  }
  return spec;
}

SyntheticConfig preset_data(const std::string& name) {
  SyntheticConfig cfg;
  if (name == "fpha-like") {
    cfg.classes = 45;
    cfg.sequences_per_class = 26;
    cfg.joints = 21;
    cfg.frames = 64;
    cfg.chunks = 32;
  } else if (name == "toy") {
    // Keeps the 99% budget above 100 connections.
    cfg.joints = 40;
  } else {
    throw ConfigError({"data.generate.preset: unknown preset '" + name + "'"});
  }
  return cfg;
}

json network_to_json(const NetworkSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) {
    json item = {{"kind", to_string(l.kind)},
                 {"in_dim", l.in_dim},
                 {"out_dim", l.out_dim},
                 {"activation", to_string(l.activation)}};
    if (l.kind == LayerKind::gcn_block) {
      item["heads"] = l.heads;
      item["nodes"] = l.nodes;
    }
    layers.push_back(std::move(item));
  }
  return json{{"layers", std::move(layers)}};
}

NetworkSpec network_from_json(const json& doc) {
  std::vector<std::string> errors;
  NetworkSpec spec;
  if (!doc.is_object() || !doc.contains("layers") || !doc.at("layers").is_array()) {
    throw ConfigError({"network.layers: expected an array"});
  }
  const json& layers = doc.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    spec.layers.push_back(parse_layer(layers[i], "network.layers[" + std::to_string(i) + "]", errors));
  }
  if (!errors.empty()) throw ConfigError(std::move(errors));
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ConfigError({std::string("network: ") + e.what()});
  }
  return spec;
}

RunConfig parse_run_config(const json& doc) {
  std::vector<std::string> errors;
  RunConfig cfg;
  Reader root(doc, "", errors);
  root.allow({"network", "prune", "data", "seed", "output"});
  root.seed("seed", cfg.seed);
  root.string("output", cfg.output);

  if (!root.has("network")) {
    errors.push_back("network: required");
  } else {
    Reader net(root.at("network"), "network", errors);
    net.allow({"preset", "layers", "attention"});
    net.string("preset", cfg.network.preset);
    std::string attention = "learned";
    net.string("attention", attention);
    if (attention == "fixed") {
      cfg.network.freeze_attention = true;
    } else if (attention != "learned") {
      net.fail("network.attention", "expected learned or fixed");
    }
    if (net.has("layers") == !cfg.network.preset.empty()) {
      net.fail("network", "give exactly one of preset or layers");
    } else if (net.has("layers")) {
      if (!net.at("layers").is_array()) {
        net.fail("network.layers", "expected an array");
      } else {
        const json& layers = net.at("layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
          cfg.network.spec.layers.push_back(
              parse_layer(layers[i], "network.layers[" + std::to_string(i) + "]", errors));
        }
      }
    } else if (cfg.network.preset != "toy" && cfg.network.preset != "fpha-like") {
      net.fail("network.preset", "expected toy or fpha-like");
    }
  }

  if (root.has("prune")) {
    Reader pr(root.at("prune"), "prune", errors);
    pr.allow({"target_rate", "target_count", "lambda", "eta", "tc", "anneal",
              "binarize_threshold", "epochs", "batch_size", "lr0", "lr_max", "settle_epochs", "momentum", "beta2",
              "ste_slope", "clip_norm"});
    PruneConfig& p = cfg.prune;
    if (pr.has("target_rate") && pr.has("target_count")) {
      pr.fail("prune", "give at most one of target_rate and target_count");
    }
    if (pr.has("target_rate")) {
      double rate = 0.0;
      pr.number("target_rate", rate);
      if (!(rate >= 0.0 && rate < 100.0)) pr.fail("prune.target_rate", "must lie in [0, 100)");
      cfg.target_rate = rate;
    }
    if (pr.has("target_count")) {
      double count = 0.0;
      pr.number("target_count", count);
      p.target = count;
    }
    pr.number("lambda", p.lambda);
    pr.number("eta", p.eta);
    pr.boolean("tc", p.tc_enabled);
    pr.number("binarize_threshold", p.binarize_threshold);
    pr.integer("epochs", p.epochs);
    pr.integer("batch_size", p.batch_size);
    pr.number("lr0", p.lr0);
    if (pr.has("lr_max")) {
      double v = 0.0;
      pr.number("lr_max", v);
      p.lr_max = v;
    }
    pr.integer("settle_epochs", p.settle_epochs);
    pr.number("momentum", p.momentum);
    pr.number("beta2", p.beta2);
    pr.number("ste_slope", p.ste_slope);
    pr.number("clip_norm", p.clip_norm);
    if (pr.has("anneal")) {
      Reader an(pr.at("anneal"), "prune.anneal", errors);
      an.allow({"t0", "decay", "t_min"});
      an.number("t0", p.anneal.t0);
      an.number("decay", p.anneal.decay);
      an.number("t_min", p.anneal.t_min);
    }
    try {
      p.validate();
    } catch (const ConfigError& e) {
      errors.insert(errors.end(), e.diagnostics().begin(), e.diagnostics().end());
    }
  }

  if (!root.has("data")) {
    errors.push_back("data: required");
  } else {
    Reader data(root.at("data"), "data", errors);
    data.allow({"generate", "file"});
    if (data.has("generate") == data.has("file")) {
      data.fail("data", "give exactly one of generate or file");
    } else if (data.has("generate")) {
      cfg.data.generate = parse_generate(data.at("generate"), errors);
    } else {
      data.string("file", cfg.data.file);
    }
  }

  if (!errors.empty()) throw ConfigError(std::move(errors));
  cfg.source = doc;
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = detail::parse_json(detail::read_file(path), "config " + path.string());
  } catch (const InputError& e) {
    throw ConfigError({e.what()});
  }
  return parse_run_config(doc);
}

NetworkSpec resolve_network(const RunConfig& config, const Dataset& data) {
  NetworkSpec spec = config.network.preset.empty()
                         ? config.network.spec
                         : preset_network(config.network.preset, data.joints, data.chunks,
                                          data.classes);
  try {
    spec.validate_classifier();
  } catch (const Error& e) {
    throw ConfigError({std::string("network: ") + e.what()});
  }
  if (spec.input_width() != data.signal_width()) {
    throw ConfigError({"network.layers[0]: input width " + std::to_string(spec.input_width()) +
                       " does not match data signal width " +
                       std::to_string(data.signal_width())});
  }
  if (spec.num_classes() != data.classes) {
    throw ConfigError({"network: output width " + std::to_string(spec.num_classes()) +
                       " does not match " + std::to_string(data.classes) + " classes"});
  }
  return spec;
}

std::optional<double> resolve_target(const RunConfig& config, std::size_t total) {
  if (config.prune.target) return config.prune.target;
  if (config.target_rate && *config.target_rate > 0.0) {
    return std::round((1.0 - *config.target_rate / 100.0) * static_cast<double>(total));
  }
  return std::nullopt;
}

Dataset load_or_generate(const RunConfig& config) {
  if (config.data.generate) return gen_synthetic(*config.data.generate);
  return load_dataset(config.data.file);
}

std::string config_hash(const json& doc) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : doc.dump()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tcprune
