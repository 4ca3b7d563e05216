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


#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "hptr/datagen.h"
#include "hptr/hptr.h"
#include "hptr/resilience.h"
#include "hptr/robust1d.h"
#include "hptr/scores.h"
#include "test_util.h"

namespace hptr {
namespace {

Dataset Column(std::vector<double> values) {
  Dataset data;
  data.rows = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
  return data;
}

Dataset Gaussian(int n, int d, uint64_t seed) {
  GaussianFamily family{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d)};
  return *Generate(family, n, seed);
}

TEST(ProposeTest, MeanConstants) {
  absl::StatusOr<Proposal> p = ProposeFromRho(Task::kMean, 0.02, 0.1, 1000);
  ASSERT_OK(p);
  EXPECT_NEAR(p->sensitivity, 0.022, 1e-15);
  EXPECT_NEAR(*p->tau, 0.84, 1e-14);
}

TEST(ProposeTest, PcaHasNoThreshold) {
  absl::StatusOr<Proposal> p = ProposeFromRho(Task::kPca, 0.05, 0.1, 1000);
  ASSERT_OK(p);
  EXPECT_NEAR(p->sensitivity, 0.04, 1e-15);
  EXPECT_FALSE(p->tau.has_value());
}

TEST(ProposeTest, FamilyRates) {
  Calibration cal;
  cal.family = FamilyClass::kSubGaussian;
  cal.constant = 1.0;
  absl::StatusOr<Proposal> p = ProposeParams(Task::kMean, cal, 0.1, 1000);
  ASSERT_OK(p);
  EXPECT_NEAR(p->rho, 0.1517, 1e-4);
  EXPECT_NEAR(p->rho, 0.1 * std::sqrt(std::log(10.0)), 1e-15);
  cal.family = FamilyClass::kHypercontractive;
  cal.k = 4;
  cal.kappa = 2.0;
  cal.zeta = 0.1;
  p = ProposeParams(Task::kMean, cal, 0.1, 1000);
  ASSERT_OK(p);
  EXPECT_NEAR(p->rho, 4 * 2.0 * std::pow(0.1, 0.75) * std::pow(0.1, -0.25), 1e-12);
  cal.family = FamilyClass::kCovBounded;
  p = ProposeParams(Task::kMean, cal, 0.09, 1000);
  ASSERT_OK(p);
  EXPECT_NEAR(p->rho, 0.3, 1e-15);
  EXPECT_EQ(ErrorKind(ProposeParams(Task::kPca, cal, 0.1, 1000)),
            "invalid-parameter");
  EXPECT_EQ(ErrorKind(ProposeParams(Task::kMean, cal, 0.5, 1000)),
            "invalid-parameter");
}

TEST(ConfigTest, KStarFormula) {
  EXPECT_EQ(KStar(1.0, 1e-6, 0.05), static_cast<int>(std::ceil(2.0 * std::log(4.0 / 5e-8))));
  MechanismConfig config;
  config.eps = 2.0;
  config.delta = 1e-3;
  config.zeta = 0.1;
  EXPECT_EQ(config.k_star(), static_cast<int>(std::ceil(std::log(4e4))));
  EXPECT_EQ(config.EffectiveMarginCap(), 4 * config.k_star());
  config.margin_cap = 7;
  EXPECT_EQ(config.EffectiveMarginCap(), 7);
}

TEST(ConfigTest, Validation) {
  MechanismConfig config;
  config.tau = 1.0;
  EXPECT_OK(ValidateConfig(config));
  MechanismConfig bad = config;
  bad.eps = 0.0;
  EXPECT_EQ(ErrorKind(ValidateConfig(bad)), "invalid-parameter");
  bad = config;
  bad.delta = 1.0;
  EXPECT_EQ(ErrorKind(ValidateConfig(bad)), "invalid-parameter");
  bad = config;
  bad.tau.reset();
  EXPECT_EQ(ErrorKind(ValidateConfig(bad)), "invalid-parameter");
}

TEST(SafetyTest, ZeroMarginPassRate) {
  constexpr int kTrials = 1'000'000;
  const double eps = 1.0, delta = 0.1;
  Rng rng(2);
  int passes = 0;
  for (int i = 0; i < kTrials; ++i) passes += SafetyTest(0, eps, delta, rng)->pass;
  EXPECT_NEAR(PassProbability(0, eps, delta), delta / 4, 1e-15);
  EXPECT_NEAR(static_cast<double>(passes) / kTrials, delta / 4,
              ThreeSe(delta / 4, kTrials));
}

TEST(SafetyTest, LargeMarginFailsRarely) {
  constexpr int kTrials = 1'000'000;
  const double eps = 1.0, delta = 1e-6, zeta = 0.05;
  const int margin = static_cast<int>(
      std::ceil((2 / eps) * (std::log(2 / delta) + std::log(2 / zeta))));
  EXPECT_LE(1.0 - PassProbability(margin, eps, delta), zeta / 2);
  Rng rng(3);
  int fails = 0;
  for (int i = 0; i < kTrials; ++i) fails += !SafetyTest(margin, eps, delta, rng)->pass;
  EXPECT_LE(static_cast<double>(fails) / kTrials, zeta / 2);
}

TEST(SafetyTest, NoiselessLimitIsDeterministic) {
  const double eps = 1e12, delta = 1e-3;
  Rng rng(1);
  const double threshold = SafetyThreshold(eps, delta);
  EXPECT_LT(threshold, 1.0);
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(SafetyTest(1, eps, delta, rng)->pass);
  }
  // Without noise the threshold is 0 and every margin passes.
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(SafetyThreshold(inf, delta), 0.0);
  EXPECT_EQ(PassProbability(0, inf, delta), 1.0);
  EXPECT_TRUE(SafetyTest(0, inf, delta, rng)->pass);
  EXPECT_EQ(ErrorKind(SafetyTest(-1, 1.0, delta, rng)), "invalid-parameter");
}

MechanismConfig ThresholdConfig(double sensitivity, double tau) {
  MechanismConfig config;
  config.task = Task::kEuclideanMean;
  config.alpha = 0.1;
  config.eps = 1.0;
  config.delta = 1e-3;
  config.sensitivity = sensitivity;
  config.tau = tau;
  return config;
}

TEST(ReleaseLawTest, HugeSensitivityIsUniformOnSupport) {
  const MechanismConfig config = ThresholdConfig(1e15, 1.0);
  absl::StatusOr<DiscretePMF> law =
      ReleaseLawFromScores({0.1, 0.9, 1.5, 0.5, 3.0}, config);
  ASSERT_OK(law);
  ASSERT_EQ(law->atoms.size(), 6u);
  EXPECT_EQ(law->atoms[0].first, kBottom);
  EXPECT_EQ(law->atoms[0].second, 0.0);
  const std::vector<double> expected = {1 / 3.0, 1 / 3.0, 0, 1 / 3.0, 0};
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(law->atoms[i + 1].second, expected[i], 1e-12);
}

TEST(ReleaseLawTest, MassRatioFollowsScoreGap) {
  const MechanismConfig config = ThresholdConfig(0.05, 100.0);
  for (double r : {2.0, 10.0, 1000.0}) {
    const double gap = 4 * config.sensitivity * std::log(r) / config.eps;
    const DiscretePMF law = *ReleaseLawFromScores({0.2, 0.2 + gap, 0.2 + 2 * gap}, config);
    EXPECT_GE(law.atoms[1].second / law.atoms[2].second, r * (1 - 1e-9));
    EXPECT_GE(law.atoms[1].second / law.atoms[3].second, r * (1 - 1e-9));
  }
}

TEST(ReleaseLawTest, EmptySupport) {
  EXPECT_EQ(ErrorKind(ReleaseLawFromScores({2.0, 3.0}, ThresholdConfig(1, 1))),
            "empty-support");
}

TEST(ReleaseLawTest, SupportGrowsWithThreshold) {
  const Dataset data = Gaussian(300, 2, 4);
  MechanismConfig config = ThresholdConfig(0.01, 0.1);
  config.task = Task::kMean;
  config.grid.points_per_axis = 31;
  config.grid = *AutoGrid(data, config);
  const Eigen::MatrixXd points = *CandidatePoints(config, 2);
  std::vector<bool> previous(points.cols(), false);
  for (double tau : {0.1, 0.2, 0.5, 1.0, 4.0}) {
    config.tau = tau;
    const DiscretePMF law = *ReleaseLaw(data, config, points);
    for (int g = 0; g < points.cols(); ++g) {
      const bool inside = law.atoms[g + 1].second > 0.0;
      if (previous[g]) EXPECT_TRUE(inside);
      previous[g] = inside;
    }
  }
}

TEST(ReleaseSampleTest, FrequenciesMatchClosedForm) {
  const Dataset data = Column({-2, -1, 0, 1, 2, 0.5, -0.5});
  MechanismConfig config = ThresholdConfig(0.25, 1.2);
  config.grid.center = Eigen::VectorXd::Zero(1);
  config.grid.half_widths = Eigen::VectorXd::Constant(1, 1.0);
  config.grid.points_per_axis = 5;
  // No trimming at this size; the score is |theta - sample mean| = |theta|.
  const std::vector<double> grid = {-1.0, -0.5, 0.0, 0.5, 1.0};
  std::vector<double> weights;
  double total = 0;
  for (double g : grid) {
    weights.push_back(std::exp(-config.eps / (4 * config.sensitivity) * std::abs(g)));
    total += weights.back();
  }
  constexpr int kDraws = 100'000;
  std::vector<int> counts(5, 0);
  Rng rng(5);
  for (int i = 0; i < kDraws; ++i) {
    const Eigen::VectorXd out = *ReleaseSample(data, config, rng);
    const int k = static_cast<int>(std::lround((out(0) + 1.0) / 0.5));
    ASSERT_NEAR(out(0), grid[k], 1e-12);
    ++counts[k];
  }
  for (int k = 0; k < 5; ++k) {
    const double p = weights[k] / total;
    EXPECT_NEAR(counts[k] / double(kDraws), p, ThreeSe(p, kDraws));
  }
}

TEST(ReleaseSampleTest, EmptySupportIsReported) {
  const Dataset data = Column({5, 5.1, 4.9, 5.2});
  MechanismConfig config = ThresholdConfig(0.25, 0.1);
  config.grid.center = Eigen::VectorXd::Zero(1);
  config.grid.half_widths = Eigen::VectorXd::Constant(1, 1.0);
  config.grid.points_per_axis = 5;
  Rng rng(1);
  EXPECT_EQ(ErrorKind(ReleaseSample(data, config, rng)), "empty-support");
}

TEST(ComposeTest, OutputLawWeightsRelease) {
  MechanismConfig config = ThresholdConfig(1.0, 1.0);
  config.delta = 0.1;
  DiscretePMF release{{{kBottom, 0.0}, {0, 0.25}, {1, 0.75}}};
  const DiscretePMF out = ComposeOutputLaw(3, config, release, 2);
  const double pass = PassProbability(3, config.eps, config.delta);
  EXPECT_NEAR(out.atoms[0].second, 1 - pass, 1e-15);
  EXPECT_NEAR(out.atoms[2].second, 0.75 * pass, 1e-15);
  const DiscretePMF aborted = ComposeOutputLaw(
      50, config, absl::FailedPreconditionError("empty-support: x"), 2);
  EXPECT_EQ(aborted.atoms.size(), 3u);
  EXPECT_EQ(aborted.atoms[0].second, 1.0);
}

TEST(RunTest, ZeroMarginAbortsAtTheStatedRate) {
  // Sensitivity far below any one-swap change leaves a certified margin of 0.
  const Dataset data = Gaussian(20, 1, 3);
  MechanismConfig config = ThresholdConfig(1e-9, 1.0);
  config.task = Task::kMean;
  config.delta = 0.1;
  config.grid.points_per_axis = 11;
  EXPECT_EQ(MarginCertified(data, config).value, 0);
  constexpr int kTrials = 40'000;
  Rng rng(6);
  int aborts = 0;
  for (int i = 0; i < kTrials; ++i) {
    const Transcript t = *hptr::Run(data, config, MarginMode::kCertified, rng);
    EXPECT_EQ(t.margin, 0);
    aborts += !t.output.has_value();
  }
  const double expected = 1 - config.delta / 4;
  EXPECT_NEAR(aborts / double(kTrials), expected, ThreeSe(expected, kTrials));
}

TEST(RunTest, CertifiedGaussianInstancePasses) {
  const int n = 2000;
  const double alpha = 0.1;
  const Dataset data = Gaussian(n, 1, 10);
  MechanismConfig config;
  config.task = Task::kMean;
  config.alpha = alpha;
  config.eps = 1.0;
  config.delta = 1e-6;
  config.zeta = 0.05;
  config.net_size = 32;
  const DirectionNet net = *ScoreNet(config, 1);
  Reference ref;
  ref.mean = Eigen::VectorXd::Zero(1);
  ref.sigma = Eigen::MatrixXd::Identity(1, 1);
  const double rho = *CertifyResilience(Task::kMean, data, alpha, ref, net,
                                        SubsetMode{SubsetModeKind::kExtremal, 0, 0})
                          ->rho[0];
  const Proposal proposal = *ProposeFromRho(Task::kMean, rho, alpha, n);
  config.sensitivity = proposal.sensitivity;
  config.tau = proposal.tau;
  config.grid.points_per_axis = 201;
  config.grid = *AutoGrid(data, config);
  const MarginResult margin = MarginCertified(data, config);
  EXPECT_GE(margin.value, config.k_star());
  Rng rng(11);
  const Transcript t = *hptr::Run(data, config, MarginMode::kCertified, rng);
  ASSERT_TRUE(t.pass);
  ASSERT_TRUE(t.output.has_value());
  EXPECT_GT(t.feasible_count, 0);
  EXPECT_GT(t.pmf_entropy, 0.0);
  Eigen::VectorXd trimmed(1);
  for (int j = 0; j < 1; ++j) {
    const Eigen::VectorXd col = data.rows.col(j);
    trimmed(j) = TrimmedMeanVar(std::vector<double>(col.data(), col.data() + n),
                                TrimCount(kTwoSidedTailFraction, alpha, n))
                     ->mean;
  }
  const double diameter = 2.0 * config.grid.half_widths.norm() /
                          (config.grid.points_per_axis - 1);
  EXPECT_LE((*t.output - trimmed).norm(), diameter + 32 * rho);
}

TEST(RunTest, ExactModeNeedsAnAlphabet) {
  MechanismConfig config = ThresholdConfig(1.0, 1.0);
  Rng rng(1);
  EXPECT_EQ(ErrorKind(hptr::Run(Column({0, 1, 0}), config, MarginMode::kExact, rng)),
            "invalid-parameter");
}

TEST(RunTest, SameSeedSameTranscript) {
  const Dataset data = Gaussian(500, 2, 2);
  MechanismConfig config = ThresholdConfig(0.02, 1.0);
  config.task = Task::kMean;
  config.eps = 5.0;
  config.grid.points_per_axis = 21;
  Rng a(9), b(9);
  const Transcript ta = *hptr::Run(data, config, MarginMode::kCertified, a);
  const Transcript tb = *hptr::Run(data, config, MarginMode::kCertified, b);
  EXPECT_EQ(ta.noisy_margin, tb.noisy_margin);
  EXPECT_EQ(ta.output.has_value(), tb.output.has_value());
  if (ta.output) EXPECT_EQ(*ta.output, *tb.output);
}

TEST(TaskScorerTest, MatchesStandaloneScores) {
  const Dataset data = Gaussian(200, 2, 8);
  MechanismConfig config = ThresholdConfig(1.0, 1.0);
  config.task = Task::kMean;
  config.net_size = 16;
  const TaskScorer scorer = *TaskScorer::Build(data, config);
  const Eigen::Vector2d theta(0.3, 0.1);
  EXPECT_NEAR(scorer(theta), *MeanScore(data, theta, config.alpha, scorer.net()),
              1e-12);
  config.task = Task::kPca;
  config.tau.reset();
  const TaskScorer pca = *TaskScorer::Build(data, config);
  EXPECT_NEAR(pca(Eigen::Vector2d(1, 0)),
              *PcaScore(data, Eigen::Vector2d(1, 0), config.alpha, pca.net()), 1e-12);
}

TEST(PcaReleaseTest, PureDpOnTinySphereUniverse) {
  // Records from a three-point alphabet in the plane, n = 3.
  const std::vector<Eigen::Vector2d> alphabet = {
      Eigen::Vector2d(1.0, 0.2), Eigen::Vector2d(-0.3, 1.0), Eigen::Vector2d(0.7, 0.7)};
  const int n = 3;
  MechanismConfig config;
  config.task = Task::kPca;
  config.alpha = 0.1;
  config.eps = 1.0;
  config.net_size = 8;
  config.grid.sphere_size = 12;
  const Eigen::MatrixXd points = *CandidatePoints(config, 2);
  std::vector<Dataset> universe;
  for (int code = 0; code < 27; ++code) {
    Dataset data;
    data.rows.resize(n, 2);
    for (int i = 0, rest = code; i < n; ++i, rest /= 3) {
      data.rows.row(i) = alphabet[rest % 3].transpose();
    }
    universe.push_back(data);
  }
  std::vector<NeighborPair> pairs;
  for (int a = 0; a < 27; ++a) {
    for (int b = a + 1; b < 27; ++b) {
      if (HammingDistance(universe[a], universe[b]) == 1) pairs.push_back({a, b, 1});
    }
  }
  // Global sensitivity of the score over the universe.
  std::vector<std::vector<double>> scores;
  for (const Dataset& data : universe) {
    scores.push_back(TaskScorer::Build(data, config)->ScoreAll(points, Execution::kSerial));
  }
  double sensitivity = 0;
  for (const NeighborPair& p : pairs) {
    for (int g = 0; g < points.cols(); ++g) {
      sensitivity = std::max(sensitivity,
                             std::abs(scores[p.left][g] - scores[p.right][g]));
    }
  }
  ASSERT_GT(sensitivity, 0.0);
  config.sensitivity = sensitivity;
  std::vector<DiscretePMF> laws;
  for (const Dataset& data : universe) laws.push_back(*ReleaseLaw(data, config, points));
  const DpReport report = *VerifyDp(laws, pairs, config.eps / 2, 0.0);
  EXPECT_TRUE(report.pass) << report.worst_delta;
  // Halving the sensitivity breaks the guarantee somewhere.
  config.sensitivity = sensitivity / 4;
  laws.clear();
  for (const Dataset& data : universe) laws.push_back(*ReleaseLaw(data, config, points));
  EXPECT_FALSE(VerifyDp(laws, pairs, config.eps / 2, 0.0)->pass);
}

}  // namespace
}  // namespace hptr
