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

#include "tcprune/data.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace tcprune {

using detail::json;

ChunkedDescriptor temporal_chunking(const SkeletonSequence& seq, int chunks) {
  if (chunks <= 0) throw Error("temporal_chunking: chunk count must be positive");
  const int frames = static_cast<int>(seq.frames.size());
  if (frames < chunks) {
    std::ostringstream msg;
    msg << "temporal_chunking: sequence has " << frames << " frames, at least " << chunks
        << " required for " << chunks << " chunks";
    throw InputError(msg.str());
  }
  ChunkedDescriptor out;
  out.chunks = chunks;
  out.signal = Matrix::Zero(3 * chunks, seq.joints);
  for (int m = 0; m < chunks; ++m) {
    const long begin = static_cast<long>(m) * frames / chunks;
    const long end = static_cast<long>(m + 1) * frames / chunks;
    Matrix sum = Matrix::Zero(seq.joints, 3);
    for (long t = begin; t < end; ++t) {
      const Matrix& frame = seq.frames[static_cast<std::size_t>(t)];
      if (frame.rows() != seq.joints || frame.cols() != 3) {
        throw InputError("temporal_chunking: frame " + std::to_string(t) + " is not joints x 3");
      }
      sum += frame;
    }
    sum /= static_cast<double>(end - begin);
    out.signal.middleRows(3 * m, 3) = sum.transpose();
  }
  return out;
}

SkeletonGraph build_adjacency(int joints, GraphTopology topology, const Matrix& coords, int k,
                              bool self_loops) {
  if (joints <= 0) throw Error("build_adjacency: joint count must be positive");
  Matrix adj = Matrix::Zero(joints, joints);
  auto link = [&](int a, int b) {
    adj(a, b) = 1.0;
    adj(b, a) = 1.0;
  };
  switch (topology) {
    case GraphTopology::chain:
      for (int j = 0; j + 1 < joints; ++j) link(j, j + 1);
      break;
    case GraphTopology::star:
      for (int j = 1; j < joints; ++j) link(0, j);
      break;
    case GraphTopology::knn: {
      if (k <= 0 || k >= joints) {
        throw Error("build_adjacency: knn needs 0 < k < J (k=" + std::to_string(k) +
                    ", J=" + std::to_string(joints) + ")");
      }
      if (coords.rows() != joints) throw ShapeError("build_adjacency: coords must have J rows");
      for (int a = 0; a < joints; ++a) {
        std::vector<int> order(static_cast<std::size_t>(joints));
        std::iota(order.begin(), order.end(), 0);
        order.erase(order.begin() + a);
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
          return (coords.row(x) - coords.row(a)).squaredNorm() <
                 (coords.row(y) - coords.row(a)).squaredNorm();
        });
        for (int i = 0; i < k; ++i) link(a, order[static_cast<std::size_t>(i)]);
      }
      break;
    }
  }
  if (self_loops) adj.diagonal().setOnes();
  return SkeletonGraph{std::move(adj)};
}

Matrix rest_pose(int joints) {
  // Five finger-like rays around a wrist at the origin.
  Matrix pose(joints, 3);
  for (int j = 0; j < joints; ++j) {
    const int ray = j % 5;
    const int depth = j / 5 + 1;
    const double angle = std::numbers::pi * (0.2 + 0.15 * ray);
    pose(j, 0) = depth * std::cos(angle);
    pose(j, 1) = depth * std::sin(angle);
    pose(j, 2) = 0.1 * ray;
  }
  return pose;
}

std::vector<SkeletonSequence> gen_sequences(const SyntheticConfig& config) {
  if (config.classes <= 0 || config.sequences_per_class < 0 || config.joints <= 0 ||
      config.frames <= 0) {
    throw Error("gen_synthetic: counts must be positive");
  }
  if (!config.class_order.empty()) {
    std::vector<int> sorted = config.class_order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(static_cast<std::size_t>(config.classes));
    std::iota(expect.begin(), expect.end(), 0);
    if (sorted != expect) throw Error("gen_synthetic: class_order must be a permutation");
  }
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> freq_dist(0.5, 3.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp_dist(0.5, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);

  const int classes = config.classes;
  const int joints = config.joints;
  // Class motion parameters, drawn in a fixed order.
  std::vector<double> freq(static_cast<std::size_t>(classes * joints));
  std::vector<double> amp(freq.size());
  std::vector<double> phase(freq.size() * 3);
  for (int y = 0; y < classes; ++y) {
    for (int j = 0; j < joints; ++j) {
      const std::size_t idx = static_cast<std::size_t>(y * joints + j);
      freq[idx] = freq_dist(rng);
      amp[idx] = amp_dist(rng);
      for (int d = 0; d < 3; ++d) phase[idx * 3 + static_cast<std::size_t>(d)] = phase_dist(rng);
    }
  }

  const Matrix rest = rest_pose(joints);
  std::vector<SkeletonSequence> out;
  for (int y = 0; y < classes; ++y) {
    for (int s = 0; s < config.sequences_per_class; ++s) {
      SkeletonSequence seq;
      seq.joints = joints;
      seq.label = config.class_order.empty() ? y : config.class_order[static_cast<std::size_t>(y)];
      for (int t = 0; t < config.frames; ++t) {
        const double tau = static_cast<double>(t) / config.frames;
        Matrix frame(joints, 3);
        for (int j = 0; j < joints; ++j) {
          const std::size_t idx = static_cast<std::size_t>(y * joints + j);
          for (int d = 0; d < 3; ++d) {
            const double clean =
                rest(j, d) + amp[idx] * std::sin(2.0 * std::numbers::pi * freq[idx] * tau +
                                                  phase[idx * 3 + static_cast<std::size_t>(d)]);
            frame(j, d) = clean + config.noise_sigma * noise(rng);
          }
        }
        seq.frames.push_back(std::move(frame));
      }
      out.push_back(std::move(seq));
    }
  }
  return out;
}

Dataset gen_synthetic(const SyntheticConfig& config) {
  Dataset data;
  data.classes = config.classes;
  data.joints = config.joints;
  data.chunks = config.chunks;
  data.seed = config.seed;
  data.adjacency = build_adjacency(config.joints, config.topology, rest_pose(config.joints),
                                   config.knn_k, config.self_loops)
                       .adjacency;
  for (const SkeletonSequence& seq : gen_sequences(config)) {
    data.records.push_back(Record{seq.label, temporal_chunking(seq, config.chunks).signal});
  }
  return data;
}

namespace {

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

}  // namespace

bool operator==(const Dataset& a, const Dataset& b) {
  if (a.classes != b.classes || a.joints != b.joints || a.chunks != b.chunks ||
      a.seed != b.seed || a.records.size() != b.records.size() ||
      !same_matrix(a.adjacency, b.adjacency)) {
    return false;
  }
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    if (a.records[i].label != b.records[i].label ||
        !same_matrix(a.records[i].signal, b.records[i].signal)) {
      return false;
    }
  }
  return true;
}

Split stratified_split(const Dataset& data) {
  Split split;
  std::vector<int> seen(static_cast<std::size_t>(std::max(data.classes, 0)), 0);
  for (int i = 0; i < static_cast<int>(data.records.size()); ++i) {
    const int y = data.records[static_cast<std::size_t>(i)].label;
    int& n = seen.at(static_cast<std::size_t>(y));
    (n % 2 == 0 ? split.train : split.test).push_back(i);
    ++n;
  }
  return split;
}

Matrix stack_signals(const Dataset& data, const std::vector<int>& indices) {
  Matrix out(static_cast<Eigen::Index>(indices.size()), data.signal_width());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Matrix& s = data.records.at(static_cast<std::size_t>(indices[i])).signal;
    out.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(s.data(), s.size());
  }
  return out;
}

std::vector<int> gather_labels(const Dataset& data, const std::vector<int>& indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(data.records.at(static_cast<std::size_t>(i)).label);
  return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  json records = json::array();
  for (const Record& r : data.records) {
    records.push_back(
        {{"label", r.label},
         {"signal", std::vector<double>(r.signal.data(), r.signal.data() + r.signal.size())}});
  }
  json adjacency = json::array();
  for (Eigen::Index i = 0; i < data.adjacency.rows(); ++i) {
    std::vector<int> row;
    for (Eigen::Index j = 0; j < data.adjacency.cols(); ++j) {
      row.push_back(data.adjacency(i, j) != 0.0 ? 1 : 0);
    }
    adjacency.push_back(std::move(row));
  }
  const json doc = {
      {"header",
       {{"classes", data.classes}, {"J", data.joints}, {"M", data.chunks}, {"seed", data.seed}}},
      {"adjacency", std::move(adjacency)},
      {"records", std::move(records)}};
  detail::write_file_atomic(path, doc.dump() + "\n");
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string what = "dataset " + path.string();
  const json doc = detail::parse_json(detail::read_file(path), what);
  Dataset data;
  try {
    const json& header = doc.at("header");
    data.classes = header.at("classes").get<int>();
    data.joints = header.at("J").get<int>();
    data.chunks = header.at("M").get<int>();
    data.seed = header.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw InputError(what + ": bad header: " + e.what());
  }
  if (data.classes < 0 || data.joints < 0 || data.chunks < 0) {
    throw InputError(what + ": negative header field");
  }
  const json& adj = doc.contains("adjacency") ? doc.at("adjacency") : json::array();
  data.adjacency = Matrix::Zero(data.joints, data.joints);
  if (!adj.is_array() || adj.size() != static_cast<std::size_t>(data.joints)) {
    throw InputError(what + ": adjacency must be a J x J array");
  }
  for (int i = 0; i < data.joints; ++i) {
    const json& row = adj[static_cast<std::size_t>(i)];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(data.joints)) {
      throw InputError(what + ": adjacency row " + std::to_string(i) + " has wrong length");
    }
    for (int j = 0; j < data.joints; ++j) {
      const json& v = row[static_cast<std::size_t>(j)];
      if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
        throw InputError(what + ": adjacency entry (" + std::to_string(i) + ", " +
                         std::to_string(j) + ") must be 0 or 1");
      }
      data.adjacency(i, j) = v.get<int>();
    }
  }
  if (!doc.contains("records") || !doc.at("records").is_array()) {
    throw InputError(what + ": missing records array");
  }
  const std::size_t expected = static_cast<std::size_t>(3 * data.chunks * data.joints);
  const json& records = doc.at("records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const std::string where = what + ": record " + std::to_string(i);
    const json& rec = records[i];
    if (!rec.is_object() || !rec.contains("label") || !rec.contains("signal") ||
        !rec.at("label").is_number_integer() || !rec.at("signal").is_array()) {
      throw InputError(where + ": expected {label: int, signal: array}");
    }
    Record r;
    r.label = rec.at("label").get<int>();
    if (r.label < 0 || r.label >= data.classes) throw InputError(where + ": label out of range");
    const json& sig = rec.at("signal");
    if (sig.size() != expected) {
      throw InputError(where + ": signal has " + std::to_string(sig.size()) +
                       " entries, expected " + std::to_string(expected));
    }
    r.signal.resize(3 * data.chunks, data.joints);
    for (std::size_t e = 0; e < expected; ++e) {
      if (!sig[e].is_number()) throw InputError(where + ": non-numeric signal entry");
      r.signal.data()[e] = sig[e].get<double>();
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

std::optional<GraphTopology> parse_topology(const std::string& name) {
  if (name == "chain") return GraphTopology::chain;
  if (name == "star") return GraphTopology::star;
  if (name == "knn") return GraphTopology::knn;
  return std::nullopt;
}

std::string to_string(GraphTopology topology) {
  switch (topology) {
    case GraphTopology::chain:
      return "chain";
    case GraphTopology::star:
      return "star";
    case GraphTopology::knn:
      return "knn";
  }
  return "chain";
}

}  // namespace tcprune
