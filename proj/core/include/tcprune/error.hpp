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

#include <stdexcept>
#include <string>
#include <vector>

namespace tcprune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched dimensions between a spec and the tensors handed to it.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in weights, activations, losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed dataset/checkpoint files.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration. Carries one diagnostic per offending field.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics)
      : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& items) {
    std::string out = "invalid configuration:";
    for (const auto& item : items) out += "\n  " + item;
    return out;
  }

  std::vector<std::string> diagnostics_;
};

}  // namespace tcprune
