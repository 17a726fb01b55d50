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
#include "tcprune/mask.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

namespace tcprune {
namespace {

Matrix scalar(double w) { return Matrix::Constant(1, 1, w); }

TEST(Psi, ZeroMapsToZero) { EXPECT_DOUBLE_EQ(MaskFn{1.0}(0.0), 0.0); }

TEST(Psi, ClosedFormAtThree) {
  // 2*sigmoid(9) - 1, evaluated at 30 digits.
  EXPECT_NEAR(MaskFn{1.0}(3.0), 0.99975321084802753654, 1e-15);
  EXPECT_NEAR(psi_apply(scalar(3.0), 1.0)(0, 0), 0.99975321084802753654, 1e-15);
}

TEST(Psi, Symmetric) {
  EXPECT_EQ(MaskFn{1.0}(-3.0), MaskFn{1.0}(3.0));
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> w(-50.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = w(rng);
    for (double t : {1e-3, 0.1, 1.0, 10.0}) EXPECT_EQ(MaskFn{t}(x), MaskFn{t}(-x));
  }
}

TEST(Psi, BoundedBelowOne) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> w(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = MaskFn{1e-2}(w(rng));
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_LT(MaskFn{1e-6}(1e6), 1.0);
}

TEST(Psi, MonotoneInMagnitude) {
  const MaskFn f{0.5};
  double prev = -1.0;
  for (double x = 0.0; x < 6.0; x += 0.01) {
    const double v = f(x);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(Psi, AnnealingMonotonicity) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> w(-3.0, 3.0);
  std::uniform_real_distribution<double> t(1e-3, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = w(rng);
    double t1 = t(rng), t2 = t(rng);
    if (t1 > t2) std::swap(t1, t2);
    EXPECT_GE(MaskFn{t1}(x), MaskFn{t2}(x));
  }
}

TEST(Psi, ColdLimit) {
  EXPECT_GT(MaskFn{1e-8}(0.01), 0.999);
  EXPECT_EQ(MaskFn{1e-8}(0.0), 0.0);
}

TEST(Psi, RejectsNonFiniteWithLocation) {
  Matrix w = Matrix::Zero(2, 3);
  w(1, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    psi_apply(w, 1.0, "layer 4");
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("layer 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("(1, 2)"), std::string::npos) << msg;
  }
  EXPECT_THROW(psi_grad(w, 1.0), NumericError);
}

TEST(PsiGrad, Examples) {
  EXPECT_DOUBLE_EQ(MaskFn{1.0}.derivative(0.0), 0.0);
  EXPECT_NEAR(MaskFn{1.0}.derivative(1.0), 0.78644773296592741015, 1e-14);
  EXPECT_NEAR(psi_grad(scalar(1.0), 1.0)(0, 0), 0.78644773296592741015, 1e-14);
  const double h = 1e-5;
  const MaskFn f{1.0};
  const double fd = (f(0.5 + h) - f(0.5 - h)) / (2 * h);
  EXPECT_LT(std::abs(fd - f.derivative(0.5)), 1e-6);
}

TEST(PsiGrad, MatchesCentralDifferences) {
  // Entries where psi is saturated have derivatives below the rounding floor of
  // the difference quotient; those are compared in absolute terms.
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> w(-5.0, 5.0);
  int checked = 0;
  for (double t : {0.1, 1.0, 10.0}) {
    const MaskFn f{t};
    for (int i = 0; i < 1000; ++i) {
      const double x = w(rng);
      const double h = 1e-6 * std::max(1.0, std::abs(x));
      const double fd = (f(x + h) - f(x - h)) / (2 * h);
      const double an = f.derivative(x);
      const double scale = std::max(std::abs(fd), std::abs(an));
      if (scale < 1e-6) {
        EXPECT_LT(std::abs(fd - an), 1e-9) << "x=" << x << " T=" << t;
        continue;
      }
      EXPECT_LT(std::abs(fd - an), 1e-5 * scale + 1e-9) << "x=" << x << " T=" << t;
      ++checked;
    }
  }
  EXPECT_GT(checked, 2000);
}

TEST(Anneal, GeometricWithFloor) {
  const AnnealSchedule s{1.0, 0.5, 0.1};
  EXPECT_DOUBLE_EQ(s.temperature(0), 1.0);
  EXPECT_DOUBLE_EQ(s.temperature(1), 0.5);
  EXPECT_DOUBLE_EQ(s.temperature(3), 0.125);
  EXPECT_DOUBLE_EQ(s.temperature(4), 0.1);
  EXPECT_DOUBLE_EQ(s.temperature(100), 0.1);
  const AnnealSchedule d;
  for (int e = 1; e < 1000; ++e) EXPECT_LE(d.temperature(e), d.temperature(e - 1));
}

TEST(Anneal, ValidateRejectsBadSchedules) {
  EXPECT_THROW((AnnealSchedule{0.0, 0.9, 0.01}.validate()), Error);
  EXPECT_THROW((AnnealSchedule{1.0, 1.0, 0.01}.validate()), Error);
  EXPECT_THROW((AnnealSchedule{1.0, 0.9, 0.0}.validate()), Error);
  EXPECT_NO_THROW(AnnealSchedule{}.validate());
}

TEST(Binarize, Examples) {
  Matrix a(1, 2);
  a << 0.99, 0.01;
  const BinarizeResult r = binarize(a, 0.5);
  EXPECT_EQ(r.mask(0, 0), 1);
  EXPECT_EQ(r.mask(0, 1), 0);
  EXPECT_EQ(r.ones, 1u);

  const BinarizeResult tie = binarize(scalar(0.5), 0.5);
  EXPECT_EQ(tie.mask(0, 0), 1);

  const BinarizeResult zeros = binarize(Matrix::Zero(3, 4), 0.5);
  EXPECT_EQ(zeros.ones, 0u);
  EXPECT_EQ(zeros.mask.rows(), 3);
  EXPECT_EQ(zeros.mask.cast<int>().sum(), 0);
}

TEST(Binarize, ThresholdOutsideOpenIntervalRejected) {
  EXPECT_THROW(binarize(scalar(0.5), 0.0), Error);
  EXPECT_THROW(binarize(scalar(0.5), 1.0), Error);
}

}  // namespace
}  // namespace tcprune
