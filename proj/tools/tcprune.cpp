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
#include "tcprune/error.hpp"
#include "tcprune/report.hpp"
#include "tcprune/train.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace tcprune;

void print_diagnostics(const ConfigError& e) {
  std::cerr << "error: invalid configuration\n";
  for (const std::string& d : e.diagnostics()) std::cerr << "  " << d << "\n";
}

// Runs a command body and maps failures onto the exit-code contract.
template <class F>
int guarded(F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    print_diagnostics(e);
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw ConfigError({"--seeds: '" + item + "' is not an integer"});
    seeds.push_back(v);
  }
  return seeds;
}

void print_topo(const TopoReport& r, const char* label) {
  std::cout << label << ": kept " << r.total_kept << ", accessible and co-accessible "
            << r.ac_kept << ", percent_ac " << r.percent_ac << "\n";
  for (std::size_t l = 0; l < r.per_layer.size(); ++l) {
    const LayerTopoReport& p = r.per_layer[l];
    std::cout << "  layer " << l << ": kept " << p.kept << ", accessible and co-accessible "
              << p.ac_kept << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topologically consistent magnitude pruning"};
  app.require_subcommand(1);

  std::string train_config, train_out;
  std::optional<std::uint64_t> train_seed;
  auto* train_cmd = app.add_subcommand("train", "Train one masked network");
  train_cmd->add_option("--config", train_config, "JSON run configuration")->required();
  train_cmd->add_option("--seed", train_seed, "Override the config seed");
  train_cmd->add_option("--out", train_out, "Run directory (default: config output)");

  std::string sweep_config, sweep_rates = "50,75,88,95,99", sweep_tc = "both", sweep_seeds,
                            sweep_out;
  int sweep_jobs = 1;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train over pruning rates with and without TC");
  sweep_cmd->add_option("--config", sweep_config, "JSON run configuration")->required();
  sweep_cmd->add_option("--rates", sweep_rates, "Comma-separated pruning rates in percent");
  sweep_cmd->add_option("--tc", sweep_tc, "both | on | off")
      ->check(CLI::IsMember({"both", "on", "off"}));
  sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated seeds (default: config seed)");
  sweep_cmd->add_option("--jobs", sweep_jobs, "Parallel runs")->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--out", sweep_out, "Sweep directory (default: config output)");

  std::string audit_path;
  bool audit_json = false;
  auto* audit_cmd = app.add_subcommand("audit", "Check a checkpoint's topological consistency");
  audit_cmd->add_option("--checkpoint", audit_path, "checkpoint.json")->required();
  audit_cmd->add_flag("--json", audit_json, "Print the report as JSON");

  std::vector<std::string> report_dirs;
  std::string report_format = "md";
  auto* report_cmd = app.add_subcommand("report", "Merge run directories into one table");
  report_cmd->add_option("dirs", report_dirs, "Run or sweep directories")->required();
  report_cmd->add_option("--format", report_format, "md | csv")
      ->check(CLI::IsMember({"md", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  if (train_cmd->parsed()) {
    return guarded([&] {
      RunConfig config = load_run_config(train_config);
      if (train_seed) {
        config.seed = *train_seed;
        config.source["seed"] = *train_seed;
      }
      const std::filesystem::path out = train_out.empty() ? config.output : train_out;
      const TrainOutcome outcome = run_train(config, out, std::cout);
      if (outcome.exit_code == kExitNumeric) {
        std::cerr << "numeric failure: " << outcome.summary.error
                  << " (checkpoint of the last finite epoch written)\n";
      }
      return outcome.exit_code;
    });
  }
  if (sweep_cmd->parsed()) {
    return guarded([&] {
      const RunConfig config = load_run_config(sweep_config);
      std::vector<std::string> warnings;
      SweepOptions options;
      options.rates = parse_rates(sweep_rates, warnings);
      for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
      options.tc = sweep_tc == "on" ? TcMode::on : (sweep_tc == "off" ? TcMode::off : TcMode::both);
      options.seeds = parse_seeds(sweep_seeds);
      options.jobs = sweep_jobs;
      options.out = sweep_out.empty() ? config.output : sweep_out;
      const std::vector<RunSummary> rows = run_sweep(config, options, std::cerr);
      std::cout << render_report(rows, ReportFormat::markdown);
      return kExitOk;
    });
  }
  if (audit_cmd->parsed()) {
    return guarded([&] {
      Checkpoint ckpt;
      try {
        ckpt = load_checkpoint(audit_path);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw InputError(std::string("corrupt checkpoint: ") + e.what());
      }
      const AuditResult audit = audit_checkpoint(ckpt);
      if (audit_json) {
        std::cout << audit_to_json(audit).dump(2) << "\n";
      } else {
        print_topo(audit.oracle, "oracle");
        print_topo(audit.phi, "phi");
        std::cout << "phi disagreements: " << audit.phi_disagreements
                  << ", product disagreements: " << audit.product_disagreements
                  << ", stored masks match: " << (audit.stored_masks_match ? "yes" : "no")
                  << ", access penalty: " << audit.crisp_access_penalty << "\n";
      }
      if (!audit.consistent_internally()) {
        std::cerr << "internal consistency failure: oracle and phi disagree\n";
        return kExitNumeric;
      }
      return kExitOk;
    });
  }
  return guarded([&] {
    std::vector<std::filesystem::path> dirs(report_dirs.begin(), report_dirs.end());
    for (const auto& d : dirs) {
      if (!std::filesystem::exists(d)) throw InputError("no such run directory: " + d.string());
    }
    const std::vector<RunSummary> rows = collect_runs(dirs);
    std::cout << render_report(rows,
                               report_format == "csv" ? ReportFormat::csv : ReportFormat::markdown);
    return kExitOk;
  });
}
