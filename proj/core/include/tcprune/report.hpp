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

#include "tcprune/config.hpp"
#include "tcprune/topo.hpp"
#include "tcprune/train.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tcprune {

/// Process exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitInput = 2, kExitNumeric = 3 };

/// One row of the pruning table plus provenance, stored as summary.json in a run
/// directory.
struct RunSummary {
  std::optional<double> requested_rate;  // percent; empty for explicit targets
  std::optional<bool> tc;                // empty when the run does not prune
  std::size_t parameter_count = 0;       // crisp kept connections at the end
  std::size_t total_parameters = 0;
  double realized_rate = 0.0;  // percent of prunable weights removed
  double percent_ac = 100.0;
  double raw_percent_ac = 100.0;  // before accessibility gating
  double accuracy = 0.0;          // test, mean class accuracy in percent
  double train_accuracy = 0.0;
  double access_penalty = 0.0;    // crisp, of the deployed masks
  std::optional<double> target;
  std::uint64_t seed = 0;
  int selected_epoch = 0;  // epoch whose weights were deployed
  std::string config_hash;
  double wall_seconds = 0.0;
  std::string status = "ok";  // ok | numeric_failure | error | incomplete
  std::string error;
  std::string run_dir;

  bool complete() const { return status == "ok"; }
};

nlohmann::json summary_to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& doc);

struct TrainOutcome {
  int exit_code = kExitOk;
  RunSummary summary;
};

/// Trains one configuration and writes checkpoint.json, metrics.csv and
/// summary.json into `out_dir`. Config problems raise ConfigError; a
/// non-finite loss yields kExitNumeric with the last finite checkpoint kept.
TrainOutcome run_train(const RunConfig& config, const std::filesystem::path& out_dir,
                       std::ostream& log);

enum class TcMode { both, on, off };

struct SweepOptions {
  std::vector<double> rates;
  TcMode tc = TcMode::both;
  std::vector<std::uint64_t> seeds;  // empty: the config seed
  std::filesystem::path out;
  int jobs = 1;
};

/// Parses "50,75,88"; duplicates are dropped with a warning, values outside
/// [0, 100) raise ConfigError.
std::vector<double> parse_rates(const std::string& text, std::vector<std::string>& warnings);

/// Every rate x TC mode x seed (rate 0 is a single unpruned baseline per
/// seed). Failed runs are recorded and the sweep continues. Writes sweep.csv
/// and sweep.md into options.out.
std::vector<RunSummary> run_sweep(const RunConfig& base, const SweepOptions& options,
                                  std::ostream& log);

struct AuditResult {
  TopoReport oracle;
  TopoReport phi;
  std::size_t phi_disagreements = 0;
  std::size_t product_disagreements = 0;
  bool stored_masks_match = true;  // stored crisp masks == binarize(stored soft masks)
  double crisp_access_penalty = 0.0;

  bool consistent_internally() const {
    return phi_disagreements == 0 && product_disagreements == 0 && stored_masks_match;
  }
};

/// Binarizes the stored soft masks and cross-checks the oracle, phi passes
/// and mask products.
AuditResult audit_checkpoint(const Checkpoint& ckpt);
nlohmann::json audit_to_json(const AuditResult& audit);

enum class ReportFormat { markdown, csv };

/// Reads summary.json from each directory (or from its immediate
/// subdirectories). A directory without a readable summary or metrics file
/// becomes an incomplete row.
std::vector<RunSummary> collect_runs(const std::vector<std::filesystem::path>& dirs);

/// Rows sorted by requested rate then TC (NA, off, on) then seed; columns
/// rate, TC, parameters, %A-C, accuracy. With several seeds a mean +- std
/// block per (rate, TC) follows.
std::string render_report(std::vector<RunSummary> rows, ReportFormat format);

}  // namespace tcprune
