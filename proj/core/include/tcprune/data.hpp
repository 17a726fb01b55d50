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

#include "tcprune/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tcprune {

/// A sequence of skeleton frames; each frame is joints x 3.
struct SkeletonSequence {
  int joints = 0;
  std::vector<Matrix> frames;
  int label = 0;
};

/// Graph signal U of shape (3M) x J: row 3*m + d holds coordinate d of the
/// chunk-m average, column j the joint. Column j is the joint's descriptor.
struct ChunkedDescriptor {
  Matrix signal;
  int chunks = 0;

  Vector joint_descriptor(int joint) const { return signal.col(joint); }
};

/// Splits the frames into M contiguous chunks by frame index (chunk m covers
/// [floor(m*F/M), floor((m+1)*F/M))) and averages each joint per chunk.
ChunkedDescriptor temporal_chunking(const SkeletonSequence& seq, int chunks);

enum class GraphTopology { chain, star, knn };

struct SkeletonGraph {
  Matrix adjacency;  // J x J, symmetric 0/1
};

/// chain: j -- j+1. star: joint 0 -- every other joint. knn: each joint
/// linked to its k nearest joints in `coords` (J x 3), then symmetrized.
SkeletonGraph build_adjacency(int joints, GraphTopology topology, const Matrix& coords = Matrix(),
                              int k = 1, bool self_loops = false);

struct SyntheticConfig {
  int classes = 6;
  int sequences_per_class = 40;
  int joints = 16;
  int frames = 32;
  int chunks = 8;
  double noise_sigma = 0.5;
  std::uint64_t seed = 7;
  GraphTopology topology = GraphTopology::chain;
  int knn_k = 2;
  bool self_loops = false;
  /// Optional relabeling: class y is stored as class_order[y].
  std::vector<int> class_order;
};

struct Record {
  int label = 0;
  Matrix signal;  // (3M) x J
};

struct Dataset {
  int classes = 0;
  int joints = 0;
  int chunks = 0;
  std::uint64_t seed = 0;
  Matrix adjacency;  // J x J
  std::vector<Record> records;

  int signal_width() const { return 3 * chunks * joints; }
};

/// Exact equality of headers, adjacency and every record.
bool operator==(const Dataset& a, const Dataset& b);

/// Rest pose used by the generator (J x 3); also feeds knn adjacency.
Matrix rest_pose(int joints);

/// Raw sequences: joint j of class y follows
/// rest_j + a_{y,j} * sin(2 pi f_{y,j} t / F + phase_{y,j,d}) plus N(0, sigma^2).
std::vector<SkeletonSequence> gen_sequences(const SyntheticConfig& config);

/// gen_sequences + temporal chunking + adjacency.
Dataset gen_synthetic(const SyntheticConfig& config);

/// Stratified half split: within each class, even positions train, odd test.
struct Split {
  std::vector<int> train;
  std::vector<int> test;
};
Split stratified_split(const Dataset& data);

/// Inputs as batch rows (row-major signal flattening) and labels.
Matrix stack_signals(const Dataset& data, const std::vector<int>& indices);
std::vector<int> gather_labels(const Dataset& data, const std::vector<int>& indices);

/// JSON dataset file. save writes through a temporary and renames; load throws
/// InputError with a line or record index and never returns partial data.
void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);

std::optional<GraphTopology> parse_topology(const std::string& name);
std::string to_string(GraphTopology topology);

}  // namespace tcprune
