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

#include "tcprune/error.hpp"
#include "tcprune/topo.hpp"

#include <gtest/gtest.h>

#include <random>

namespace tcprune {
namespace {

BinaryMatrix bm(std::initializer_list<std::initializer_list<int>> rows) {
  BinaryMatrix m(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (int v : row) m(r, c++) = static_cast<std::uint8_t>(v);
    ++r;
  }
  return m;
}

BinaryVector bv(std::initializer_list<int> v) {
  BinaryVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (int x : v) out(i++) = static_cast<std::uint8_t>(x);
  return out;
}

MaskStack dead_hidden() {
  return MaskStack::from_layers({bm({{1, 0}, {1, 0}}), bm({{0}, {1}})});
}

MaskStack random_stack(const std::vector<int>& dims, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(p);
  std::vector<BinaryMatrix> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    BinaryMatrix m(dims[l], dims[l + 1]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? 1 : 0;
    layers.push_back(m);
  }
  return MaskStack::from_layers(std::move(layers));
}

TEST(PhiForward, DeadHiddenExample) {
  const TopoState t = phi_forward(dead_hidden());
  ASSERT_EQ(t.phi_r.size(), 3u);
  EXPECT_EQ(t.phi_r[1], bv({1, 0}));
  EXPECT_EQ(t.phi_l[1], bv({0, 1}));
  EXPECT_EQ(t.phi_r[0], bv({1, 1}));
  EXPECT_EQ(t.phi_l[2], bv({1}));
}

TEST(PhiForward, AllOnesAndAllZeros) {
  const MaskStack ones = MaskStack::from_layers(
      {BinaryMatrix::Ones(3, 4), BinaryMatrix::Ones(4, 2), BinaryMatrix::Ones(2, 2)});
  const TopoState a = phi_forward(ones);
  for (const auto& v : a.phi_r) EXPECT_EQ(v.cast<int>().sum(), v.size());
  for (const auto& v : a.phi_l) EXPECT_EQ(v.cast<int>().sum(), v.size());

  const MaskStack zeros = MaskStack::from_layers(
      {BinaryMatrix::Zero(3, 4), BinaryMatrix::Zero(4, 2), BinaryMatrix::Zero(2, 2)});
  const TopoState z = phi_forward(zeros);
  for (int l = 1; l <= 3; ++l) EXPECT_EQ(z.phi_r[l].cast<int>().sum(), 0);
  for (int l = 0; l <= 2; ++l) EXPECT_EQ(z.phi_l[l].cast<int>().sum(), 0);
}

TEST(PhiForward, RejectsNonBinary) {
  BinaryMatrix m = BinaryMatrix::Ones(2, 2);
  m(0, 1) = 2;
  EXPECT_THROW(phi_forward(MaskStack::from_layers({m, BinaryMatrix::Ones(2, 1)})), Error);
}

TEST(Oracle, DeadHiddenHasNoAcConnection) {
  const ConnectionFlags f = reachability_oracle(dead_hidden());
  const TopoReport r = consistency_report(dead_hidden());
  EXPECT_EQ(r.total_kept, 3u);
  EXPECT_EQ(r.ac_kept, 0u);
  EXPECT_EQ(r.percent_ac, 0.0);
  // hidden 0 is reached but leads nowhere; hidden 1 leads out but is unreached.
  EXPECT_EQ(f.accessible[0][0](0, 0), 1);
  EXPECT_EQ(f.coaccessible[0][0](0, 0), 0);
  EXPECT_EQ(f.accessible[1][0](1, 0), 0);
  EXPECT_EQ(f.coaccessible[1][0](1, 0), 1);
}

TEST(Oracle, SinglePathIsConsistent) {
  const MaskStack m = MaskStack::from_layers({bm({{1, 0}, {0, 0}}), bm({{1}, {0}})});
  const TopoReport r = consistency_report(m);
  EXPECT_EQ(r.total_kept, 2u);
  EXPECT_EQ(r.ac_kept, 2u);
  EXPECT_EQ(r.percent_ac, 100.0);
}

TEST(Report, FullAndEmpty) {
  const MaskStack full =
      MaskStack::from_layers({BinaryMatrix::Ones(3, 5), BinaryMatrix::Ones(5, 2)});
  EXPECT_EQ(consistency_report(full).percent_ac, 100.0);
  EXPECT_EQ(consistency_report(full).total_kept, 25u);
  const MaskStack empty =
      MaskStack::from_layers({BinaryMatrix::Zero(3, 5), BinaryMatrix::Zero(5, 2)});
  const TopoReport r = consistency_report(empty);
  EXPECT_EQ(r.total_kept, 0u);
  EXPECT_EQ(r.percent_ac, 100.0);
  EXPECT_TRUE(r.consistent());
}

TEST(Products, IdentityChain) {
  const BinaryMatrix eye = BinaryMatrix::Identity(2, 2);
  const MaskStack m = MaskStack::from_layers({eye, eye, bm({{1}, {1}})});
  const SaScProducts p = sa_sc_products(m);
  EXPECT_EQ(p.sa[2], eye);
  const ConnectionFlags f = flags_from_products(m, p);
  EXPECT_EQ(f.accessible[2][0], bm({{1}, {1}}));
  EXPECT_EQ(consistency_report(m).percent_ac, 100.0);
}

TEST(Products, FirstProductIsFirstMask) {
  const BinaryMatrix m1 = bm({{1, 0, 1}, {0, 0, 1}});
  const MaskStack m = MaskStack::from_layers({m1, BinaryMatrix::Ones(3, 2)});
  const SaScProducts p = sa_sc_products(m);
  EXPECT_EQ(p.sa[1], m1);
  const ConnectionFlags f = flags_from_products(m, p);
  // Column 1 of M1 is zero: nothing leaving hidden neuron 1 is accessible.
  EXPECT_EQ(f.accessible[1][0].row(1).cast<int>().sum(), 0);
  EXPECT_EQ(f.accessible[1][0].row(0).cast<int>().sum(), 2);
}

TEST(Effective, Examples) {
  const MaskStack full =
      MaskStack::from_layers({BinaryMatrix::Ones(3, 5), BinaryMatrix::Ones(5, 2)});
  const MaskStack e = effective_mask(full, phi_forward(full));
  EXPECT_EQ(e.layers[0].heads[0], full.layers[0].heads[0]);
  const MaskStack d = effective_mask(dead_hidden(), phi_forward(dead_hidden()));
  EXPECT_EQ(d.kept(), 0u);
}

// Exhaustive and randomized three-way agreement live in the acceptance suite;
// here a moderate random sweep keeps the unit run fast.
TEST(Equivalence, RandomStacksAgree) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const MaskStack m = random_stack({4, 6, 5, 3}, 0.3, rng);
    const ConnectionFlags oracle = reachability_oracle(m);
    EXPECT_EQ(count_disagreements(m, oracle, flags_from_phi(m, phi_forward(m))), 0u);
    EXPECT_EQ(count_disagreements(m, oracle, flags_from_products(m, sa_sc_products(m))), 0u);
  }
}

TEST(Equivalence, HeadsAndTilingAgree) {
  std::mt19937_64 rng(42);
  std::bernoulli_distribution keep(0.25);
  for (int trial = 0; trial < 100; ++trial) {
    MaskStack m;
    MaskLayer gcn;
    for (int k = 0; k < 3; ++k) {
      BinaryMatrix h(4, 3);
      for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = keep(rng);
      gcn.heads.push_back(h);
    }
    MaskLayer dense;
    dense.row_tiling = 5;
    BinaryMatrix d(15, 4);
    for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] = keep(rng);
    dense.heads.push_back(d);
    m.layers = {gcn, dense};
    const ConnectionFlags oracle = reachability_oracle(m);
    EXPECT_EQ(count_disagreements(m, oracle, flags_from_phi(m, phi_forward(m))), 0u);
    EXPECT_EQ(count_disagreements(m, oracle, flags_from_products(m, sa_sc_products(m))), 0u);
  }
}

TEST(Effective, SingleApplicationIsConsistentAndIdempotent) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 300; ++trial) {
    const MaskStack m = random_stack({5, 7, 6, 4}, 0.25, rng);
    const TopoState t = phi_forward(m);
    const MaskStack e = effective_mask(m, t);
    const TopoReport r = consistency_report(e);
    EXPECT_TRUE(r.percent_ac == 100.0 || r.total_kept == 0);
    EXPECT_GE(r.percent_ac, consistency_report(m).percent_ac);
    const MaskStack again = effective_mask(e, phi_forward(e));
    for (int l = 0; l < m.depth(); ++l) {
      EXPECT_EQ(again.layers[l].heads[0], e.layers[l].heads[0]);
    }
    // phi on the gated network agrees with the original phi on surviving neurons.
    const TopoState te = phi_forward(e);
    for (int level = 1; level < m.depth(); ++level) {
      for (Eigen::Index i = 0; i < te.phi_r[level].size(); ++i) {
        const bool survives = t.phi_r[level](i) && t.phi_l[level](i);
        if (survives) {
          EXPECT_EQ(te.phi_r[level](i), 1);
          EXPECT_EQ(te.phi_l[level](i), 1);
        }
      }
    }
  }
}

TEST(Oracle, AddingConnectionNeverBreaksAc) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 300; ++trial) {
    MaskStack m = random_stack({4, 5, 5, 3}, 0.3, rng);
    const ConnectionFlags before = reachability_oracle(m);
    std::uniform_int_distribution<int> layer_dist(0, m.depth() - 1);
    const int l = layer_dist(rng);
    BinaryMatrix& h = m.layers[l].heads[0];
    std::uniform_int_distribution<Eigen::Index> idx(0, h.size() - 1);
    h.data()[idx(rng)] = 1;
    const ConnectionFlags after = reachability_oracle(m);
    for (int k = 0; k < m.depth(); ++k) {
      const BinaryMatrix was = before.accessible[k][0].cwiseMin(before.coaccessible[k][0]);
      const BinaryMatrix now = after.accessible[k][0].cwiseMin(after.coaccessible[k][0]);
      EXPECT_TRUE(((was.cast<int>() - now.cast<int>()).array() <= 0).all());
    }
  }
}

TEST(MaskStack, ValidateAndWidths) {
  const MaskStack m = dead_hidden();
  EXPECT_EQ(m.level_width(0), 2);
  EXPECT_EQ(m.level_width(2), 1);
  EXPECT_EQ(m.kept(), 3u);
  const MaskStack bad = MaskStack::from_layers({BinaryMatrix::Ones(2, 3), BinaryMatrix::Ones(2, 1)});
  EXPECT_THROW(bad.validate(), Error);
}

}  // namespace
}  // namespace tcprune
