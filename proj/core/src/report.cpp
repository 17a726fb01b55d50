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

#include "tcprune/report.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace tcprune {

using detail::json;
namespace fs = std::filesystem;

namespace {

std::string format_number(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string rate_label(double rate) {
  std::string s = format_number(rate, 2);
  return s;
}

int tc_rank(const std::optional<bool>& tc) { return !tc ? 0 : (*tc ? 2 : 1); }

std::string tc_label(const std::optional<bool>& tc) { return !tc ? "NA" : (*tc ? "yes" : "no"); }

std::string run_dir_name(std::optional<double> rate, std::optional<bool> tc, std::uint64_t seed) {
  std::ostringstream name;
  name << "rate_" << (rate ? format_number(*rate, 2) : std::string("none")) << "_tc_"
       << (!tc ? "na" : (*tc ? "on" : "off")) << "_seed_" << seed;
  return name.str();
}

}  // namespace

json summary_to_json(const RunSummary& s) {
  return json{{"requested_rate", s.requested_rate ? json(*s.requested_rate) : json(nullptr)},
              {"tc_enabled", s.tc ? json(*s.tc) : json(nullptr)},
              {"parameter_count", s.parameter_count},
              {"total_parameters", s.total_parameters},
              {"realized_rate", s.realized_rate},
              {"percent_ac", s.percent_ac},
              {"raw_percent_ac", s.raw_percent_ac},
              {"accuracy_percent", s.accuracy},
              {"train_accuracy_percent", s.train_accuracy},
              {"access_penalty", s.access_penalty},
              {"target", s.target ? json(*s.target) : json(nullptr)},
              {"seed", s.seed},
              {"selected_epoch", s.selected_epoch},
              {"config_hash", s.config_hash},
              {"wall_seconds", s.wall_seconds},
              {"status", s.status},
              {"error", s.error}};
}

RunSummary summary_from_json(const json& doc) {
  RunSummary s;
  if (!doc.at("requested_rate").is_null()) s.requested_rate = doc.at("requested_rate").get<double>();
  if (!doc.at("tc_enabled").is_null()) s.tc = doc.at("tc_enabled").get<bool>();
  s.parameter_count = doc.at("parameter_count").get<std::size_t>();
  s.total_parameters = doc.at("total_parameters").get<std::size_t>();
  s.realized_rate = doc.at("realized_rate").get<double>();
  s.percent_ac = doc.at("percent_ac").get<double>();
  s.raw_percent_ac = doc.at("raw_percent_ac").get<double>();
  s.accuracy = doc.at("accuracy_percent").get<double>();
  s.train_accuracy = doc.at("train_accuracy_percent").get<double>();
  s.access_penalty = doc.at("access_penalty").get<double>();
  if (!doc.at("target").is_null()) s.target = doc.at("target").get<double>();
  s.seed = doc.at("seed").get<std::uint64_t>();
  s.selected_epoch = doc.value("selected_epoch", 0);
  s.config_hash = doc.at("config_hash").get<std::string>();
  s.wall_seconds = doc.at("wall_seconds").get<double>();
  s.status = doc.at("status").get<std::string>();
  s.error = doc.at("error").get<std::string>();
  return s;
}

TrainOutcome run_train(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  const Dataset data = load_or_generate(config);
  const NetworkSpec spec = resolve_network(config, data);
  PruneConfig prune = config.prune;
  prune.target = resolve_target(config, spec.prunable_count());
  if (prune.target && *prune.target > static_cast<double>(spec.prunable_count())) {
    throw ConfigError({"prune.target_count: exceeds the " +
                       std::to_string(spec.prunable_count()) + " prunable weights"});
  }

  const TrainResult result = train(spec, prune, data, config.seed, config.network.freeze_attention);

  fs::create_directories(out_dir);
  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.weights = result.weights;
  ckpt.temperature = result.temperature;
  ckpt.binarize_threshold = prune.binarize_threshold;
  ckpt.tc_enabled = prune.tc_enabled && prune.pruning_enabled();
  ckpt.target = prune.target;
  ckpt.soft_masks = result.masks.soft;
  ckpt.crisp_masks = result.masks.crisp;
  ckpt.topo_report = result.report;
  ckpt.rng_seed = config.seed;
  save_checkpoint(out_dir / "checkpoint.json", ckpt);
  detail::write_file_atomic(out_dir / "metrics.csv", metrics_csv(result.metrics));

  TrainOutcome outcome;
  RunSummary& s = outcome.summary;
  s.requested_rate = config.target_rate;
  if (prune.pruning_enabled()) s.tc = prune.tc_enabled;
  s.total_parameters = spec.prunable_count();
  s.parameter_count = result.masks.crisp.kept();
  s.realized_rate = 100.0 * (1.0 - static_cast<double>(s.parameter_count) /
                                       static_cast<double>(s.total_parameters));
  s.percent_ac = result.report.percent_ac;
  s.raw_percent_ac = result.raw_report.percent_ac;
  s.accuracy = result.test_accuracy;
  s.train_accuracy = result.train_accuracy;
  s.access_penalty = crisp_access_penalty(result.masks.crisp);
  s.target = prune.target;
  s.seed = config.seed;
  s.selected_epoch = result.selected_epoch;
  s.config_hash = config_hash(config.source);
  s.run_dir = out_dir.string();
  if (result.failure) {
    s.status = "numeric_failure";
    s.error = *result.failure;
    outcome.exit_code = kExitNumeric;
  }
  s.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  detail::write_file_atomic(out_dir / "summary.json", summary_to_json(s).dump(2) + "\n");

  log << "run " << out_dir.string() << ": kept " << s.parameter_count << "/" << s.total_parameters
      << " (" << format_number(s.realized_rate, 2) << "% pruned), %A-C "
      << format_number(s.percent_ac, 2) << ", accuracy " << format_number(s.accuracy, 2) << "%";
  if (result.failure) log << " [numeric failure: " << *result.failure << "]";
  log << "\n";
  return outcome;
}

std::vector<double> parse_rates(const std::string& text, std::vector<std::string>& warnings) {
  std::vector<double> rates;
  std::vector<std::string> errors;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) {
      errors.push_back("--rates: '" + item + "' is not a number");
      continue;
    }
    if (!(value >= 0.0 && value < 100.0)) {
      errors.push_back("--rates: " + item + " is outside [0, 100)");
      continue;
    }
    if (std::find(rates.begin(), rates.end(), value) != rates.end()) {
      warnings.push_back("duplicate rate " + item + " ignored");
      continue;
    }
    rates.push_back(value);
  }
  if (rates.empty() && errors.empty()) errors.push_back("--rates: no rates given");
  if (!errors.empty()) throw ConfigError(std::move(errors));
  return rates;
}

std::vector<RunSummary> run_sweep(const RunConfig& base, const SweepOptions& options,
                                  std::ostream& log) {
  struct Job {
    RunConfig config;
    fs::path dir;
  };
  std::vector<Job> jobs;
  const std::vector<std::uint64_t> seeds =
      options.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : options.seeds;
  for (double rate : options.rates) {
    std::vector<std::optional<bool>> modes;
    if (rate == 0.0) {
      modes.push_back(std::nullopt);
    } else {
      if (options.tc != TcMode::on) modes.push_back(false);
      if (options.tc != TcMode::off) modes.push_back(true);
    }
    for (const auto& mode : modes) {
      for (std::uint64_t seed : seeds) {
        Job job{base, {}};
        job.config.prune.target.reset();
        job.config.target_rate = rate;
        job.config.seed = seed;
        if (mode) job.config.prune.tc_enabled = *mode;
        job.config.source["seed"] = seed;
        job.config.source["prune"]["target_rate"] = rate;
        job.config.source["prune"].erase("target_count");
        if (mode) job.config.source["prune"]["tc"] = *mode;
        job.dir = options.out / run_dir_name(rate, mode, seed);
        jobs.push_back(std::move(job));
      }
    }
  }

  std::vector<RunSummary> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      std::ostringstream local;
      RunSummary row;
      try {
        row = run_train(jobs[i].config, jobs[i].dir, local).summary;
      } catch (const std::exception& e) {
        row.requested_rate = jobs[i].config.target_rate;
        row.tc = jobs[i].config.prune.tc_enabled;
        row.seed = jobs[i].config.seed;
        row.status = "error";
        row.error = e.what();
        local << "run " << jobs[i].dir.string() << " failed: " << e.what() << "\n";
      }
      row.run_dir = jobs[i].dir.string();
      rows[i] = std::move(row);
      const std::lock_guard<std::mutex> lock(log_mutex);
      log << local.str() << std::flush;
    }
  };
  const int workers = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  fs::create_directories(options.out);
  detail::write_file_atomic(options.out / "sweep.csv", render_report(rows, ReportFormat::csv));
  detail::write_file_atomic(options.out / "sweep.md", render_report(rows, ReportFormat::markdown));
  return rows;
}

AuditResult audit_checkpoint(const Checkpoint& ckpt) {
  MaskStack masks;
  for (int l = 0; l < ckpt.spec.depth(); ++l) {
    MaskLayer layer;
    layer.row_tiling = ckpt.spec.row_tiling(l);
    for (const Matrix& soft : ckpt.soft_masks[static_cast<std::size_t>(l)]) {
      layer.heads.push_back(binarize(soft, ckpt.binarize_threshold).mask);
    }
    masks.layers.push_back(std::move(layer));
  }
  AuditResult audit;
  const ConnectionFlags oracle = reachability_oracle(masks);
  const ConnectionFlags phi = flags_from_phi(masks, phi_forward(masks));
  const ConnectionFlags products = flags_from_products(masks, sa_sc_products(masks));
  audit.oracle = report_from_flags(masks, oracle);
  audit.phi = report_from_flags(masks, phi);
  audit.phi_disagreements = count_disagreements(masks, oracle, phi);
  audit.product_disagreements = count_disagreements(masks, oracle, products);
  audit.crisp_access_penalty = crisp_access_penalty(masks);
  for (int l = 0; l < masks.depth(); ++l) {
    for (std::size_t k = 0; k < masks.layers[l].heads.size(); ++k) {
      const BinaryMatrix& stored = ckpt.crisp_masks.layers[l].heads[k];
      if (!(stored == masks.layers[l].heads[k])) audit.stored_masks_match = false;
    }
  }
  return audit;
}

json audit_to_json(const AuditResult& audit) {
  return json{{"oracle", topo_report_to_json(audit.oracle)},
              {"phi", topo_report_to_json(audit.phi)},
              {"percent_ac", audit.oracle.percent_ac},
              {"total_kept", audit.oracle.total_kept},
              {"phi_disagreements", audit.phi_disagreements},
              {"product_disagreements", audit.product_disagreements},
              {"stored_masks_match", audit.stored_masks_match},
              {"crisp_access_penalty", audit.crisp_access_penalty},
              {"internally_consistent", audit.consistent_internally()}};
}

std::vector<RunSummary> collect_runs(const std::vector<fs::path>& dirs) {
  std::vector<RunSummary> rows;
  auto read_one = [&rows](const fs::path& dir) {
    RunSummary row;
    row.run_dir = dir.string();
    try {
      row = summary_from_json(
          detail::parse_json(detail::read_file(dir / "summary.json"), "summary"));
      row.run_dir = dir.string();
      if (!fs::exists(dir / "metrics.csv")) {
        row.status = "incomplete";
        row.error = "missing metrics.csv";
      }
    } catch (const std::exception& e) {
      row.status = "incomplete";
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  };
  for (const fs::path& dir : dirs) {
    if (fs::exists(dir / "summary.json") || fs::exists(dir / "metrics.csv") ||
        fs::exists(dir / "checkpoint.json")) {
      read_one(dir);
      continue;
    }
    std::vector<fs::path> children;
    if (fs::is_directory(dir)) {
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) children.push_back(entry.path());
      }
    }
    std::sort(children.begin(), children.end());
    if (children.empty()) {
      read_one(dir);
    } else {
      for (const fs::path& child : children) read_one(child);
    }
  }
  return rows;
}

std::string render_report(std::vector<RunSummary> rows, ReportFormat format) {
  std::stable_sort(rows.begin(), rows.end(), [](const RunSummary& a, const RunSummary& b) {
    const double ra = a.requested_rate.value_or(a.realized_rate);
    const double rb = b.requested_rate.value_or(b.realized_rate);
    if (ra != rb) return ra < rb;
    if (tc_rank(a.tc) != tc_rank(b.tc)) return tc_rank(a.tc) < tc_rank(b.tc);
    return a.seed < b.seed;
  });
  std::set<std::uint64_t> seeds;
  for (const RunSummary& r : rows) seeds.insert(r.seed);
  const bool csv = format == ReportFormat::csv;

  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    if (csv) {
      for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
      out << "\n";
    } else {
      out << "|";
      for (const std::string& c : cells) out << " " << c << " |";
      out << "\n";
    }
  };
  const std::vector<std::string> header = {"rate", "TC", "parameters", "%A-C", "accuracy"};
  emit(header);
  if (!csv) out << "|---|---|---|---|---|\n";
  for (const RunSummary& r : rows) {
    if (!r.complete()) {
      emit({r.requested_rate ? rate_label(*r.requested_rate) : "?", tc_label(r.tc),
            "incomplete", "incomplete", "incomplete"});
      continue;
    }
    emit({rate_label(r.realized_rate), tc_label(r.tc), std::to_string(r.parameter_count),
          format_number(r.percent_ac, 2), format_number(r.accuracy, 2)});
  }
  if (seeds.size() <= 1) return out.str();

  // Mean and standard deviation per (requested rate, TC) over complete runs.
  std::map<std::pair<double, int>, std::vector<const RunSummary*>> groups;
  for (const RunSummary& r : rows) {
    if (!r.complete()) continue;
    groups[{r.requested_rate.value_or(r.realized_rate), tc_rank(r.tc)}].push_back(&r);
  }
  auto stat = [](const std::vector<const RunSummary*>& g, auto field, int precision) {
    double mean = 0.0;
    for (const RunSummary* r : g) mean += field(*r);
    mean /= static_cast<double>(g.size());
    double var = 0.0;
    for (const RunSummary* r : g) var += (field(*r) - mean) * (field(*r) - mean);
    const double sd = g.size() > 1 ? std::sqrt(var / static_cast<double>(g.size() - 1)) : 0.0;
    return format_number(mean, precision) + " ± " + format_number(sd, precision);
  };
  out << (csv ? "\n" : "\nMean ± std over seeds\n\n");
  emit(header);
  if (!csv) out << "|---|---|---|---|---|\n";
  for (const auto& [key, g] : groups) {
    emit({stat(g, [](const RunSummary& r) { return r.realized_rate; }, 2),
          tc_label(g.front()->tc),
          stat(g, [](const RunSummary& r) { return static_cast<double>(r.parameter_count); }, 1),
          stat(g, [](const RunSummary& r) { return r.percent_ac; }, 2),
          stat(g, [](const RunSummary& r) { return r.accuracy; }, 2)});
  }
  return out.str();
}

}  // namespace tcprune
