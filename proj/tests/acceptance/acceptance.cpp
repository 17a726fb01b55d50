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

// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
#include "tcprune/config.hpp"
#include "tcprune/loss.hpp"
#include "tcprune/report.hpp"
#include "tcprune/topo.hpp"
#include "tcprune/train.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

namespace fs = std::filesystem;
using namespace tcprune;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void print(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " " << id << " " << name << ": " << o.detail
            << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

// Per-connection agreement of oracle, phi passes and mask products.
std::size_t disagreements(const MaskStack& masks) {
  const ConnectionFlags oracle = reachability_oracle(masks);
  const ConnectionFlags phi = flags_from_phi(masks, phi_forward(masks));
  const ConnectionFlags prod = flags_from_products(masks, sa_sc_products(masks));
  // Compare raw flags too, not only the kept A-C verdict.
  std::size_t bad = count_disagreements(masks, oracle, phi) + count_disagreements(masks, oracle, prod);
  for (std::size_t l = 0; l < oracle.accessible.size(); ++l) {
    for (std::size_t k = 0; k < oracle.accessible[l].size(); ++k) {
      for (const ConnectionFlags* other : {&phi, &prod}) {
        bad += (oracle.accessible[l][k].array() != other->accessible[l][k].array()).count();
        bad += (oracle.coaccessible[l][k].array() != other->coaccessible[l][k].array()).count();
      }
    }
  }
  return bad;
}

MaskStack stack_from_bits(const std::vector<int>& widths, std::uint64_t bits) {
  std::vector<BinaryMatrix> layers;
  int pos = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    BinaryMatrix m(widths[l], widths[l + 1]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (bits >> pos++) & 1u;
    layers.push_back(std::move(m));
  }
  return MaskStack::from_layers(std::move(layers));
}

int connections(const std::vector<int>& widths) {
  int n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1];
  return n;
}

Outcome exhaustive_oracle() {
  const auto t0 = Clock::now();
  std::size_t bad = 0;
  std::size_t masks = 0;
  // 2-2-2-1 has ten connections; 2-2-2-2 has the twelve that make 4096 masks.
  for (const std::vector<int>& widths : {std::vector<int>{2, 2, 2, 1}, std::vector<int>{2, 2, 2, 2}}) {
    const std::uint64_t count = 1ull << connections(widths);
    for (std::uint64_t bits = 0; bits < count; ++bits) {
      bad += disagreements(stack_from_bits(widths, bits));
      ++masks;
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 5.0, std::to_string(masks) + " masks (1024 on 2-2-2-1, 4096 on 2-2-2-2), " +
                                      std::to_string(bad) + " disagreements, " + fmt(secs) + " s"};
}

Outcome random_oracle() {
  const auto t0 = Clock::now();
  const std::vector<int> widths{8, 16, 16, 8, 4};
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> density(0.05, 0.95);
  std::size_t bad = 0;
  std::size_t partial = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::bernoulli_distribution keep(density(rng));
    std::vector<BinaryMatrix> layers;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      BinaryMatrix m(widths[l], widths[l + 1]);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng);
      layers.push_back(std::move(m));
    }
    const MaskStack masks = MaskStack::from_layers(std::move(layers));
    bad += disagreements(masks);
    partial += !consistency_report(masks).consistent();
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0, "500 masks (" + std::to_string(partial) +
                                       " with dead connections), " + std::to_string(bad) +
                                       " disagreements, " + fmt(secs) + " s"};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  NetworkSpec spec;
  spec.layers = {{LayerKind::dense, 3, 5, Activation::relu, 1, 1},
                 {LayerKind::dense, 5, 4, Activation::relu, 1, 1},
                 {LayerKind::dense, 4, 2, Activation::softmax_logits, 1, 1}};
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    Batch batch{Matrix(8, 3), {}};
    for (Eigen::Index i = 0; i < batch.inputs.size(); ++i) batch.inputs.data()[i] = n(rng);
    for (int i = 0; i < 8; ++i) batch.labels.push_back(static_cast<int>(rng() % 2));
    const MaskedWeights w = init_weights(spec, seed);
    for (bool tc : {true, false}) {
      PruneConfig cfg;
      cfg.target = 12.0;
      cfg.lambda = 10.0;
      cfg.eta = 1.0;
      cfg.tc_enabled = tc;
      cfg.gate_mode = GateMode::smooth;
      const double temp = 0.1;
      const Evaluation ev = backward(spec, w, batch, temp, cfg);
      const double h = 1e-6;
      for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const Matrix& f = w.layers[l].filters[0];
        for (Eigen::Index i = 0; i < f.size(); ++i) {
          MaskedWeights p = w;
          MaskedWeights m = w;
          p.layers[l].filters[0].data()[i] += h;
          m.layers[l].filters[0].data()[i] -= h;
          const double fd = (total_loss(spec, p, batch, temp, cfg).total -
                             total_loss(spec, m, batch, temp, cfg).total) /
                            (2 * h);
          const double an = ev.grad.layers[l].filters[0].data()[i];
          const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
          worst = std::max(worst, std::abs(fd - an) / denom);
          ++checked;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 60.0, std::to_string(checked) + " partials, max relative error " +
                                           fmt(worst * 1e6, 3) + "e-6, " + fmt(secs) + " s"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tcprune acceptance suite"};
  fs::path work = "acceptance_runs";
  fs::path config_path;
  int jobs = 1;
  app.add_option("--work-dir", work, "Directory for sweep outputs");
  app.add_option("--config", config_path, "Toy run configuration")->required()->check(CLI::ExistingFile);
  app.add_option("--jobs", jobs, "Parallel sweep runs")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  print(1, "exhaustive oracle equivalence", exhaustive_oracle());
  print(2, "randomized oracle equivalence", random_oracle());
  print(3, "gradient fidelity", gradient_check());

  const RunConfig base = load_run_config(config_path);
  SweepOptions opt;
  opt.rates = {50, 75, 88, 95, 99};
  opt.seeds = {1, 2, 3, 4, 5};
  opt.tc = TcMode::both;
  opt.jobs = jobs;
  opt.out = work / "sweep";
  fs::remove_all(opt.out);
  std::ostringstream log;
  const auto sweep_start = Clock::now();
  const std::vector<RunSummary> rows = run_sweep(base, opt, log);
  const double sweep_secs = seconds_since(sweep_start);
  std::cerr << log.str();

  std::size_t errors = 0;
  for (const RunSummary& r : rows) errors += !r.complete();

  // 4: every TC run fully accessible and co-accessible, verified by the oracle.
  {
    Outcome o{true, ""};
    int runs = 0;
    int full = 0;
    for (const RunSummary& r : rows) {
      if (!r.tc || !*r.tc) continue;
      ++runs;
      bool ok = r.complete();
      if (ok) {
        const AuditResult a = audit_checkpoint(load_checkpoint(fs::path(r.run_dir) / "checkpoint.json"));
        ok = a.oracle.percent_ac == 100.0 && r.percent_ac == 100.0;
      }
      full += ok;
    }
    o.pass = runs == 25 && full == runs;
    o.detail = std::to_string(full) + "/" + std::to_string(runs) + " TC runs at percent_ac 100";
    print(4, "TC postcondition", o);
  }

  // 5: without TC, high rates leave dead connections in at least 4 of 5 seeds.
  {
    Outcome o{true, ""};
    for (double rate : {95.0, 99.0}) {
      int broken = 0;
      int runs = 0;
      for (const RunSummary& r : rows) {
        if (r.requested_rate != rate || !r.tc || *r.tc) continue;
        ++runs;
        broken += r.complete() && r.percent_ac < 100.0;
      }
      o.pass = o.pass && runs == 5 && broken >= 4;
      o.detail += (o.detail.empty() ? "" : ", ") + fmt(rate, 0) + "%: " + std::to_string(broken) +
                  "/" + std::to_string(runs) + " below 100";
    }
    print(5, "disconnection without TC", o);
  }

  // 6: kept count within 1% of the budget for every run.
  {
    double worst = 0.0;
    std::string where;
    bool ok = errors == 0;
    for (const RunSummary& r : rows) {
      if (!r.complete() || !r.target) continue;
      const double rel = std::abs(static_cast<double>(r.parameter_count) - *r.target) /
                         std::max(*r.target, 1.0);
      if (rel > worst) {
        worst = rel;
        where = fmt(*r.requested_rate, 0) + "% " + (r.tc && *r.tc ? "TC" : "no-TC") + " seed " +
                std::to_string(r.seed) + " kept " + std::to_string(r.parameter_count) + " for c=" +
                fmt(*r.target, 0);
      }
    }
    ok = ok && worst <= 0.01;
    print(6, "budget adherence",
          {ok, "worst relative deviation " + fmt(100 * worst, 2) + "%" +
                   (where.empty() ? "" : " (" + where + ")")});
  }

  // 7: at 99%, TC mean accuracy >= no-TC mean accuracy.
  {
    double tc = 0.0;
    double no = 0.0;
    int ntc = 0;
    int nno = 0;
    for (const RunSummary& r : rows) {
      if (r.requested_rate != 99.0 || !r.tc || !r.complete()) continue;
      (*r.tc ? tc : no) += r.accuracy;
      ++(*r.tc ? ntc : nno);
    }
    const bool ok = ntc == 5 && nno == 5 && tc / ntc >= no / nno;
    print(7, "generalization at 99%",
          {ok, "mean accuracy TC " + fmt(ntc ? tc / ntc : 0, 2) + "% vs no-TC " +
                   fmt(nno ? no / nno : 0, 2) + "%"});
  }

  // 8: crisp access penalty is zero exactly when the audit reports 100.
  {
    int checked = 0;
    int agree = 0;
    for (const RunSummary& r : rows) {
      if (!r.complete()) continue;
      const AuditResult a = audit_checkpoint(load_checkpoint(fs::path(r.run_dir) / "checkpoint.json"));
      ++checked;
      agree += a.consistent_internally() &&
               ((a.crisp_access_penalty == 0.0) == (a.oracle.percent_ac == 100.0)) &&
               a.crisp_access_penalty == r.access_penalty;
    }
    print(8, "access penalty and audit agree",
          {checked == static_cast<int>(rows.size()) && agree == checked,
           std::to_string(agree) + "/" + std::to_string(checked) + " checkpoints"});
  }

  // 9: repeating a sweep run reproduces its metrics byte for byte.
  {
    RunConfig again = base;
    again.target_rate = 95.0;
    again.prune.target.reset();
    again.prune.tc_enabled = true;
    again.seed = 3;
    std::ostringstream quiet;
    const fs::path rerun = work / "rerun";
    fs::remove_all(rerun);
    run_train(again, rerun, quiet);
    const std::string a = slurp(opt.out / "rate_95.00_tc_on_seed_3" / "metrics.csv");
    const std::string b = slurp(rerun / "metrics.csv");
    print(9, "determinism", {!a.empty() && a == b,
                             a == b ? std::to_string(a.size()) + " identical bytes"
                                    : std::string("metrics differ")});
  }

  print(10, "sweep wall time",
        {errors == 0 && rows.size() == 50 && sweep_secs < 1800.0,
         std::to_string(rows.size()) + " runs, " + std::to_string(errors) + " failed, " +
             fmt(sweep_secs, 1) + " s"});

  std::cout << render_report(rows, ReportFormat::markdown);
  return failures == 0 ? 0 : 1;
}
