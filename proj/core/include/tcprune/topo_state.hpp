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

#include <vector>

namespace tcprune {

/// Per-level accessibility (phi_r) and co-accessibility (phi_l) indicators.
///
/// Levels are numbered 0..L for an L-layer stack: level 0 is the input
/// channels, level l the output neurons of layer l. phi_r[0] and phi_l[L]
/// are all-ones by definition.
struct TopoState {
  std::vector<BinaryVector> phi_r;
  std::vector<BinaryVector> phi_l;
};

}  // namespace tcprune
