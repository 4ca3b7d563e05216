//
// Copyright 2026 The HPTR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//


#include "hptr/datagen.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hptr/direction_net.h"
#include "hptr/resilience.h"
#include "hptr/robust1d.h"
#include "test_util.h"

namespace hptr {
namespace {

Eigen::MatrixXd Covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows());
}

double SpectralNorm(const Eigen::MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m)
      .eigenvalues()
      .cwiseAbs()
      .maxCoeff();
}

Eigen::Matrix2d TestSigma() {
  Eigen::Matrix2d sigma;
  sigma << 2.0, 0.6, 0.6, 1.0;
  return sigma;
}

TEST(GenerateTest, SameSeedIsIdentical) {
  const std::vector<FamilySpec> families = {
      GaussianFamily{Eigen::Vector2d(1, 2), TestSigma()},
      SubGaussianBoundedFamily{Eigen::Vector2d::Zero(), TestSigma(), 2.0},
      StudentTFamily{6.0, Eigen::Vector2d::Zero(), TestSigma()},
      LinearModelFamily{Eigen::Vector2d(1, -1), TestSigma()},
      CovBoundedFamily{Eigen::Vector2d::Zero(), 0.5 * Eigen::Matrix2d::Identity(), 3.0},
      HardPairFamily{0.2, 4, 2}};
  for (const FamilySpec& family : families) {
    const Dataset a = *Generate(family, 3000, 42);
    const Dataset b = *Generate(family, 3000, 42);
    const Dataset c = *Generate(family, 3000, 43);
    EXPECT_EQ(a.rows, b.rows) << FamilyName(family);
    EXPECT_NE(a.rows, c.rows) << FamilyName(family);
    EXPECT_EQ(a.n(), 3000);
    EXPECT_EQ(a.d(), FamilyDimension(family));
    EXPECT_EQ(a.labeled(), std::holds_alternative<LinearModelFamily>(family));
    EXPECT_EQ(a.seed, 42u);
    EXPECT_FALSE(a.provenance.corrupted);
  }
}

TEST(GenerateTest, PrefixDoesNotDependOnN) {
  const GaussianFamily family{Eigen::Vector2d::Zero(), TestSigma()};
  const Dataset small = *Generate(family, 1500, 9);
  const Dataset large = *Generate(family, 5000, 9);
  EXPECT_EQ(small.rows, large.rows.topRows(1500));
}

TEST(GenerateTest, GaussianCovariance) {
  const int n = 100000;
  const Dataset data = *Generate(GaussianFamily{Eigen::Vector2d(1, -1), TestSigma()}, n, 3);
  EXPECT_LE(SpectralNorm(Covariance(data.rows) - TestSigma()),
            5 * SpectralNorm(TestSigma()) / std::sqrt(n));
  EXPECT_LE((data.rows.colwise().mean().transpose() - Eigen::Vector2d(1, -1)).norm(),
            5 * std::sqrt(2.0 / n) * 1.5);
}

TEST(GenerateTest, BoundedAndCovBoundedMatchCovariance) {
  const int n = 100000;
  for (const FamilySpec& family :
       {FamilySpec(SubGaussianBoundedFamily{Eigen::Vector2d::Zero(), TestSigma(), 2.0}),
        FamilySpec(StudentTFamily{8.0, Eigen::Vector2d::Zero(), TestSigma()})}) {
    const Dataset data = *Generate(family, n, 5);
    EXPECT_LE(SpectralNorm(Covariance(data.rows) - TestSigma()),
              10 * SpectralNorm(TestSigma()) / std::sqrt(n))
        << FamilyName(family);
    EXPECT_EQ(FamilyReference(family).sigma, TestSigma());
  }
  const Eigen::Matrix2d sigma = 0.5 * Eigen::Matrix2d::Identity();
  const Dataset data = *Generate(CovBoundedFamily{Eigen::Vector2d::Zero(), sigma, 3.0}, n, 5);
  // Heavy tails: only a loose check on the spread.
  EXPECT_LE(SpectralNorm(Covariance(data.rows) - sigma), 0.15);
}

TEST(GenerateTest, StudentFourthMoment) {
  const int n = 1000000;
  const Dataset data = *Generate(
      StudentTFamily{8.0, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1)}, n, 7);
  const Eigen::ArrayXd x = data.rows.col(0).array();
  const double m2 = x.square().mean();
  const double m4 = x.square().square().mean();
  EXPECT_NEAR(m4 / (m2 * m2), 4.5, 0.45);
}

TEST(GenerateTest, IndependentNoiseResiduals) {
  const int n = 200000;
  LinearModelFamily family;
  family.beta = Eigen::Vector2d(2.0, -1.0);
  family.sigma_x = TestSigma();
  family.gamma = 0.5;
  const Dataset data = *Generate(family, n, 11);
  const Eigen::VectorXd residual = *data.labels - data.rows * family.beta;
  EXPECT_NEAR(residual.mean(), 0.0, 5 * 0.5 / std::sqrt(n));
  EXPECT_NEAR(std::sqrt(residual.squaredNorm() / n), 0.5, 0.01);
  const Eigen::VectorXd cross = data.rows.transpose() * residual / n;
  EXPECT_LE(cross.norm(), 5 * 0.5 * std::sqrt(3.0 / n));
  const Reference ref = FamilyReference(family);
  EXPECT_EQ(ref.beta, family.beta);
  EXPECT_EQ(ref.gamma, 0.5);
}

TEST(GenerateTest, DependentNoiseIsUncorrelatedWithInputs) {
  const int n = 400000;
  LinearModelFamily family;
  family.beta = Eigen::Vector2d(1.0, 1.0);
  family.sigma_x = Eigen::Matrix2d::Identity();
  family.coupling_kind = NoiseCoupling::kDependent;
  family.coupling = 1.0;
  const Dataset data = *Generate(family, n, 13);
  const Eigen::VectorXd residual = *data.labels - data.rows * family.beta;
  const Eigen::ArrayXd x0 = data.rows.col(0).array() * residual.array();
  const double se = std::sqrt((x0 - x0.mean()).square().mean() / n);
  EXPECT_NEAR(x0.mean(), 0.0, 5 * se);
  EXPECT_NEAR(std::sqrt(residual.squaredNorm() / n), family.gamma, 0.02);
  // The noise magnitude depends on the input norm.
  const Eigen::ArrayXd norms = data.rows.rowwise().norm().array();
  const Eigen::ArrayXd abs_res = residual.array().abs();
  const double corr = ((norms - norms.mean()) * (abs_res - abs_res.mean())).mean();
  EXPECT_GT(std::abs(corr), 0.01);
}

TEST(GenerateTest, InvalidSpecs) {
  Eigen::Matrix2d bad;
  bad << 1, 2, 2, 1;
  EXPECT_EQ(ErrorKind(Generate(GaussianFamily{Eigen::Vector2d::Zero(), bad}, 10, 1)),
            "domain-error");
  EXPECT_EQ(ErrorKind(Generate(GaussianFamily{Eigen::Vector3d::Zero(), TestSigma()}, 10, 1)),
            "domain-error");
  EXPECT_EQ(ErrorKind(Generate(StudentTFamily{2.0, Eigen::Vector2d::Zero(), TestSigma()}, 10, 1)),
            "domain-error");
  EXPECT_EQ(ErrorKind(Generate(CovBoundedFamily{Eigen::Vector2d::Zero(), 2 * TestSigma(), 3.0}, 10, 1)),
            "domain-error");
  EXPECT_EQ(ErrorKind(Generate(GaussianFamily{Eigen::Vector2d::Zero(), TestSigma()}, 0, 1)),
            "domain-error");
}

TEST(HardPairTest, GapAndTotalVariation) {
  for (double alpha : {0.05, 0.1, 0.25, 0.4}) {
    for (int k : {3, 4, 8}) {
      const RealPmf one = *HardPair(alpha, k, 1);
      const RealPmf two = *HardPair(alpha, k, 2);
      double total = 0;
      for (const auto& [x, p] : one.atoms) total += p;
      EXPECT_NEAR(total, 1.0, 1e-15);
      EXPECT_NEAR(std::abs(one.Mean() - two.Mean()),
                  2 * std::pow(alpha, 1 - 1.0 / k), 1e-14);
      EXPECT_NEAR(TotalVariation(one, two), alpha, 1e-15);
    }
  }
}

TEST(HardPairTest, QuarterFourthAtoms) {
  const RealPmf pmf = *HardPair(0.25, 4, 1);
  std::vector<std::pair<double, double>> atoms = pmf.atoms;
  std::sort(atoms.begin(), atoms.end());
  ASSERT_EQ(atoms.size(), 3u);
  // The third atom sits at -alpha^(-1/k) so that the mean gap is
  // 2 alpha^(1 - 1/k).
  EXPECT_NEAR(atoms[0].first, -std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(atoms[0].second, 0.25, 1e-15);
  EXPECT_EQ(atoms[1], std::make_pair(-1.0, 0.375));
  EXPECT_EQ(atoms[2], std::make_pair(1.0, 0.375));
}

TEST(HardPairTest, Errors) {
  EXPECT_EQ(ErrorKind(HardPair(0.5, 4, 1)), "invalid-parameter");
  EXPECT_EQ(ErrorKind(HardPair(0.1, 2, 1)), "invalid-parameter");
  EXPECT_EQ(ErrorKind(HardPair(0.1, 4, 3)), "invalid-parameter");
}

TEST(HardPairTest, SamplesSeparateUnderTrimmedMean) {
  const int n = 10000;
  const double alpha = 0.1;
  const int k = 4;
  const int tail = TrimCount(kTwoSidedTailFraction, alpha, n);
  auto trimmed_mean = [&](int side) {
    const Dataset data = *Generate(HardPairFamily{alpha, k, side}, n, 3);
    const Eigen::VectorXd x = data.rows.col(0);
    return TrimmedMeanVar(std::vector<double>(x.data(), x.data() + n), tail)->mean;
  };
  const double gap = trimmed_mean(2) - trimmed_mean(1);
  const double target = 2 * std::pow(alpha, 1 - 1.0 / k);
  EXPECT_GT(gap, 0.6 * target);
  EXPECT_LT(gap, 1.2 * target);
}

TEST(HardPairTest, CorruptionMapsOneSideToTheOther) {
  // Replacing the far atom records by their mirror turns a side-1 sample into
  // a side-2 sample; the fraction changed concentrates at alpha.
  const int n = 10000;
  const double alpha = 0.2;
  const Dataset data = *Generate(HardPairFamily{alpha, 4, 1}, n, 8);
  const double far = std::pow(alpha, -0.25);
  int changed = 0;
  Dataset mapped = data;
  for (int i = 0; i < n; ++i) {
    if (std::abs(data.rows(i, 0) + far) < 1e-12) {
      mapped.rows(i, 0) = far;
      ++changed;
    }
  }
  EXPECT_NEAR(changed / double(n), alpha, 3 * std::sqrt(alpha * (1 - alpha) / n));
  for (int i = 0; i < n; ++i) {
    const double x = mapped.rows(i, 0);
    EXPECT_TRUE(x == 1.0 || x == -1.0 || std::abs(x - far) < 1e-12);
  }
}

TEST(ResilienceRateTest, CleanGaussianCertificatesFollowTheRate) {
  const double alpha = 0.2;
  const int d = 1;
  const int n = static_cast<int>(200 * d / (alpha * alpha));
  const GaussianFamily family{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)};
  const RhoCalibration cal =
      *CalibrateRhoConstant(family, Task::kMean, alpha, n, 20, 2, 0, 0.9, 1);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, d, 2, 0);
  const double rate = alpha * std::sqrt(std::log(1 / alpha));
  int within = 0;
  for (int seed = 0; seed < 50; ++seed) {
    const Dataset data = *Generate(family, n, 1000 + seed);
    const ResilienceCertificate cert = *CertifyResilience(
        Task::kMean, data, alpha, FamilyReference(family), net,
        SubsetMode{SubsetModeKind::kSampled, 2000, static_cast<uint64_t>(seed)});
    within += *cert.rho[0] <= cal.constant * rate;
  }
  EXPECT_GE(within, 45);
}

}  // namespace
}  // namespace hptr
