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

#include "scratch.hpp"
#include "tcprune/config.hpp"
#include "tcprune/error.hpp"
#include "tcprune/report.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

namespace tcprune {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing_util::scratch_dir;

RunConfig small_config(double rate, bool tc, int epochs = 30) {
  json doc = json::parse(R"({
    "network": {"preset": "toy"},
    "prune": {"lr0": 0.003, "batch_size": 1000,
              "anneal": {"t0": 0.02, "decay": 0.95, "t_min": 0.005}},
    "data": {"generate": {"classes": 3, "sequences_per_class": 6, "joints": 5,
                          "frames": 8, "chunks": 4, "seed": 3}},
    "seed": 4
  })");
  doc["prune"]["target_rate"] = rate;
  doc["prune"]["tc"] = tc;
  doc["prune"]["epochs"] = epochs;
  return parse_run_config(doc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(RunTrain, WritesArtifacts) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  const TrainOutcome out = run_train(small_config(80, true), dir / "run", log);
  EXPECT_EQ(out.exit_code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "run" / "checkpoint.json"));
  EXPECT_TRUE(fs::exists(dir / "run" / "summary.json"));
  const std::string csv = slurp(dir / "run" / "metrics.csv");
  EXPECT_EQ(csv.rfind("epoch,ce,budget,access_penalty,total,nu,kept_count,percent_ac\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
  const RunSummary& s = out.summary;
  EXPECT_EQ(s.total_parameters, 4u * 12 * 8 + 40u * 32 + 32u * 3);
  EXPECT_EQ(s.target, std::round(0.2 * s.total_parameters));
  EXPECT_EQ(s.tc, true);
  EXPECT_EQ(s.requested_rate, 80.0);
  EXPECT_NE(log.str().find("kept"), std::string::npos);

  const RunSummary back = summary_from_json(json::parse(slurp(dir / "run" / "summary.json")));
  EXPECT_EQ(back.parameter_count, s.parameter_count);
  EXPECT_EQ(back.accuracy, s.accuracy);
  EXPECT_EQ(back.config_hash, s.config_hash);
}

TEST(RunTrain, IdenticalRunsGiveIdenticalMetrics) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  run_train(small_config(90, false), dir / "a", log);
  run_train(small_config(90, false), dir / "b", log);
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(slurp(dir / "a" / "checkpoint.json"), slurp(dir / "b" / "checkpoint.json"));
}

TEST(RunTrain, TargetAboveCapacityRejected) {
  RunConfig cfg = small_config(50, true);
  cfg.target_rate.reset();
  cfg.prune.target = 1e9;
  std::ostringstream log;
  EXPECT_THROW(run_train(cfg, scratch_dir() / "x", log), ConfigError);
}

TEST(Audit, TcCheckpointIsFullyConnected) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  const TrainOutcome out = run_train(small_config(90, true, 60), dir / "run", log);
  const AuditResult audit = audit_checkpoint(load_checkpoint(dir / "run" / "checkpoint.json"));
  EXPECT_TRUE(audit.consistent_internally());
  EXPECT_EQ(audit.oracle.percent_ac, 100.0);
  EXPECT_EQ(audit.crisp_access_penalty, 0.0);
  EXPECT_EQ(audit.oracle.total_kept, out.summary.parameter_count);
  const json j = audit_to_json(audit);
  EXPECT_EQ(j.at("percent_ac"), 100.0);
  EXPECT_EQ(j.at("internally_consistent"), true);
}

Checkpoint dead_hidden_checkpoint() {
  Checkpoint c;
  c.spec.layers = {{LayerKind::dense, 2, 2, Activation::relu, 1, 1},
                   {LayerKind::dense, 2, 1, Activation::softmax_logits, 1, 1}};
  Matrix s0(2, 2);
  s0 << 0.9, 0.8, 0.1, 0.2;
  Matrix s1(2, 1);
  s1 << 0.7, 0.3;
  c.soft_masks = {{s0}, {s1}};
  BinaryMatrix m0(2, 2);
  m0 << 1, 1, 0, 0;
  BinaryMatrix m1(2, 1);
  m1 << 1, 0;
  c.crisp_masks = MaskStack::from_layers({m0, m1});
  return c;
}

TEST(Audit, DeadHiddenNeuron) {
  const AuditResult audit = audit_checkpoint(dead_hidden_checkpoint());
  EXPECT_TRUE(audit.consistent_internally());
  EXPECT_EQ(audit.oracle.total_kept, 3u);
  EXPECT_EQ(audit.oracle.ac_kept, 2u);
  EXPECT_NEAR(audit.oracle.percent_ac, 200.0 / 3.0, 1e-12);
  EXPECT_EQ(audit.crisp_access_penalty, 1.0);
}

TEST(Audit, DetectsStaleStoredMasks) {
  Checkpoint c = dead_hidden_checkpoint();
  c.crisp_masks.layers[1].heads[0](1, 0) = 1;
  const AuditResult audit = audit_checkpoint(c);
  EXPECT_FALSE(audit.stored_masks_match);
  EXPECT_FALSE(audit.consistent_internally());
}

TEST(Audit, PenaltyZeroIffFullyConnected) {
  for (int trial = 0; trial < 64; ++trial) {
    Checkpoint c = dead_hidden_checkpoint();
    for (int bit = 0; bit < 6; ++bit) {
      const double v = (trial >> bit) & 1 ? 0.9 : 0.1;
      if (bit < 4) {
        c.soft_masks[0][0](bit / 2, bit % 2) = v;
        c.crisp_masks.layers[0].heads[0](bit / 2, bit % 2) = v > 0.5;
      } else {
        c.soft_masks[1][0](bit - 4, 0) = v;
        c.crisp_masks.layers[1].heads[0](bit - 4, 0) = v > 0.5;
      }
    }
    const AuditResult a = audit_checkpoint(c);
    EXPECT_TRUE(a.consistent_internally());
    EXPECT_EQ(a.crisp_access_penalty == 0.0, a.oracle.percent_ac == 100.0) << "trial " << trial;
  }
}

TEST(Rates, ParseAndDedupe) {
  std::vector<std::string> warnings;
  EXPECT_EQ(parse_rates("50,75,50,99", warnings), (std::vector<double>{50, 75, 99}));
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("50"), std::string::npos);
  EXPECT_THROW(parse_rates("50,abc", warnings), ConfigError);
  EXPECT_THROW(parse_rates("100", warnings), ConfigError);
  EXPECT_THROW(parse_rates("-1", warnings), ConfigError);
  EXPECT_THROW(parse_rates("", warnings), ConfigError);
}

RunSummary row(double rate, std::optional<bool> tc, std::uint64_t seed, std::size_t kept,
               double ac, double acc) {
  RunSummary r;
  r.requested_rate = rate;
  r.tc = tc;
  r.seed = seed;
  r.parameter_count = kept;
  r.total_parameters = 1000;
  r.realized_rate = 100.0 * (1.0 - kept / 1000.0);
  r.percent_ac = ac;
  r.accuracy = acc;
  return r;
}

TEST(Report, SortedRowsAndLabels) {
  const std::string md = render_report(
      {row(95, true, 1, 50, 100, 80), row(0, std::nullopt, 1, 1000, 100, 90),
       row(95, false, 1, 50, 60, 70)},
      ReportFormat::markdown);
  EXPECT_EQ(md,
            "| rate | TC | parameters | %A-C | accuracy |\n"
            "|---|---|---|---|---|\n"
            "| 0.00 | NA | 1000 | 100.00 | 90.00 |\n"
            "| 95.00 | no | 50 | 60.00 | 70.00 |\n"
            "| 95.00 | yes | 50 | 100.00 | 80.00 |\n");
}

TEST(Report, MeanAndStdAcrossSeeds) {
  const std::string csv =
      render_report({row(50, true, 1, 500, 100, 80), row(50, true, 2, 502, 100, 90)},
                    ReportFormat::csv);
  EXPECT_NE(csv.find("49.90 ± 0.14,yes,501.0 ± 1.4,100.00 ± 0.00,85.00 ± 7.07"),
            std::string::npos)
      << csv;
}

TEST(Report, IncompleteRunsAreMarked) {
  const auto dir = scratch_dir();
  std::ostringstream log;
  run_train(small_config(80, false, 5), dir / "sweep" / "good", log);
  fs::create_directories(dir / "sweep" / "broken");
  {
    std::ofstream(dir / "sweep" / "broken" / "summary.json") << "{\"truncated";
  }
  fs::create_directories(dir / "sweep" / "nometrics");
  fs::copy_file(dir / "sweep" / "good" / "summary.json", dir / "sweep" / "nometrics" / "summary.json");

  const std::vector<RunSummary> rows = collect_runs({dir / "sweep"});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].status, "incomplete");  // broken
  EXPECT_TRUE(rows[1].complete());          // good
  EXPECT_EQ(rows[2].status, "incomplete");  // nometrics
  const std::string md = render_report(rows, ReportFormat::markdown);
  EXPECT_NE(md.find("incomplete"), std::string::npos);
}

TEST(Sweep, BaselineAndModes) {
  const auto dir = scratch_dir();
  SweepOptions opt;
  opt.rates = {0, 80};
  opt.seeds = {1, 2};
  opt.out = dir;
  std::ostringstream log;
  const std::vector<RunSummary> rows = run_sweep(small_config(80, true, 5), opt, log);
  ASSERT_EQ(rows.size(), 6u);  // 2 baselines + 2 modes x 2 seeds
  int baselines = 0;
  for (const RunSummary& r : rows) {
    EXPECT_TRUE(r.complete()) << r.error;
    if (!r.tc) {
      ++baselines;
      EXPECT_EQ(r.parameter_count, r.total_parameters);
      EXPECT_EQ(r.percent_ac, 100.0);
    }
  }
  EXPECT_EQ(baselines, 2);
  EXPECT_TRUE(fs::exists(dir / "rate_0.00_tc_na_seed_1" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "rate_80.00_tc_off_seed_2" / "summary.json"));
  EXPECT_TRUE(fs::exists(dir / "sweep.md"));
  EXPECT_EQ(collect_runs({dir}).size(), 6u);
}

TEST(Sweep, ParallelMatchesSerial) {
  const auto dir = scratch_dir();
  SweepOptions opt;
  opt.rates = {90};
  opt.seeds = {1, 2};
  opt.tc = TcMode::on;
  std::ostringstream log;
  opt.out = dir / "serial";
  run_sweep(small_config(90, true, 5), opt, log);
  opt.out = dir / "parallel";
  opt.jobs = 2;
  run_sweep(small_config(90, true, 5), opt, log);
  for (const char* run : {"rate_90.00_tc_on_seed_1", "rate_90.00_tc_on_seed_2"}) {
    EXPECT_EQ(slurp(dir / "serial" / run / "metrics.csv"),
              slurp(dir / "parallel" / run / "metrics.csv"));
  }
}

}  // namespace
}  // namespace tcprune
