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


#include "hptr/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "test_util.h"

namespace hptr {
namespace {

DiscretePMF Law(std::vector<std::pair<int64_t, double>> atoms) {
  return DiscretePMF{std::move(atoms)};
}

Dataset Scalar(double value) {
  Dataset data;
  data.rows = Eigen::MatrixXd::Constant(1, 1, value);
  return data;
}

TEST(LaplaceTest, TailFrequencyMatchesClosedForm) {
  constexpr int kDraws = 1'000'000;
  const double scale = 1.7;
  Rng rng(11);
  for (double q : {0.05, 0.25}) {
    const double cut = scale * std::log(1.0 / (2.0 * q));
    int hits = 0;
    Rng local(DeriveSeed(11, static_cast<uint64_t>(q * 100)));
    for (int i = 0; i < kDraws; ++i) {
      if (*SampleLaplace(scale, local) >= cut) ++hits;
    }
    EXPECT_NEAR(static_cast<double>(hits) / kDraws, q, ThreeSe(q, kDraws));
  }
}

TEST(LaplaceTest, MedianIsZero) {
  constexpr int kDraws = 1'000'000;
  Rng rng(3);
  int positive = 0;
  for (int i = 0; i < kDraws; ++i) positive += *SampleLaplace(1.0, rng) > 0.0;
  EXPECT_NEAR(static_cast<double>(positive) / kDraws, 0.5,
              ThreeSe(0.5, kDraws));
}

TEST(LaplaceTest, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(*SampleLaplace(2.0, a), *SampleLaplace(2.0, b));
  }
}

TEST(LaplaceTest, RejectsNonPositiveScale) {
  Rng rng(1);
  EXPECT_EQ(ErrorKind(SampleLaplace(0.0, rng)), "invalid-parameter");
  EXPECT_EQ(ErrorKind(SampleLaplace(-1.0, rng)), "invalid-parameter");
}

TEST(LaplaceTest, CdfMatchesDensityIntegral) {
  EXPECT_DOUBLE_EQ(LaplaceCdf(0.0, 3.0), 0.5);
  EXPECT_NEAR(LaplaceCdf(2.0, 1.0), 1.0 - 0.5 * std::exp(-2.0), 1e-15);
  EXPECT_NEAR(LaplaceCdf(-2.0, 1.0), 0.5 * std::exp(-2.0), 1e-15);
}

TEST(HockeyStickTest, IdenticalLawsGiveZero) {
  const DiscretePMF p = Law({{0, 0.2}, {1, 0.5}, {kBottom, 0.3}});
  for (double eps : {0.0, 0.5, 3.0}) EXPECT_EQ(*HockeyStickDelta(p, p, eps), 0.0);
}

TEST(HockeyStickTest, DisjointSupportsGiveOne) {
  EXPECT_DOUBLE_EQ(
      *HockeyStickDelta(Law({{0, 1.0}, {1, 0.0}}), Law({{0, 0.0}, {1, 1.0}}), 0.0),
      1.0);
}

TEST(HockeyStickTest, RandomizedResponseIsTight) {
  const double eps = 1.3;
  const double hi = std::exp(eps) / (1.0 + std::exp(eps));
  const DiscretePMF p = Law({{0, hi}, {1, 1.0 - hi}});
  const DiscretePMF q = Law({{0, 1.0 - hi}, {1, hi}});
  EXPECT_NEAR(*HockeyStickDelta(p, q, eps), 0.0, 1e-15);
  EXPECT_GT(*HockeyStickDelta(p, q, eps - 0.01), 0.0);
}

TEST(HockeyStickTest, ZeroEpsIsTotalVariation) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(6), b(6);
    double sa = 0, sb = 0;
    for (int i = 0; i < 6; ++i) {
      a[i] = UniformOpen(rng);
      b[i] = UniformOpen(rng);
      sa += a[i];
      sb += b[i];
    }
    DiscretePMF p, q;
    double tv = 0.0;
    for (int i = 0; i < 6; ++i) {
      p.atoms.emplace_back(i, a[i] / sa);
      q.atoms.emplace_back(i, b[i] / sb);
      tv += 0.5 * std::abs(a[i] / sa - b[i] / sb);
    }
    EXPECT_NEAR(*HockeyStickDelta(p, q, 0.0), tv, 1e-12);
  }
}

TEST(HockeyStickTest, NonIncreasingInEps) {
  const DiscretePMF p = Law({{0, 0.7}, {1, 0.2}, {2, 0.1}});
  const DiscretePMF q = Law({{0, 0.1}, {1, 0.3}, {2, 0.6}});
  double previous = 1.0;
  for (double eps = 0.0; eps < 3.0; eps += 0.1) {
    const double value = *HockeyStickDelta(p, q, eps);
    EXPECT_LE(value, previous + 1e-15);
    previous = value;
  }
}

TEST(HockeyStickTest, MismatchedUniversesAreSchemaErrors) {
  EXPECT_EQ(ErrorKind(HockeyStickDelta(Law({{0, 1.0}}), Law({{1, 1.0}}), 0.0)),
            "schema-error");
}

TEST(PmfTest, ValidationCatchesBadLaws) {
  EXPECT_OK(ValidatePmf(Law({{0, 0.5}, {kBottom, 0.5}})));
  EXPECT_EQ(ErrorKind(ValidatePmf(Law({{0, 0.5}, {0, 0.5}}))), "schema-error");
  EXPECT_EQ(ErrorKind(ValidatePmf(Law({{0, 0.5}, {1, 0.4}}))), "schema-error");
  EXPECT_EQ(ErrorKind(ValidatePmf(Law({{0, -0.1}, {1, 1.1}}))), "schema-error");
}

TEST(VerifyDpTest, ExponentialMechanismIsPure) {
  // Three candidates, score |c - x| over x in {0, 1, 2}: sensitivity 1 per
  // record change on this universe of single-record datasets.
  const std::vector<double> candidates = {0.0, 1.0, 2.0};
  const double eps = 0.8;
  PmfMechanism mechanism = [&](const Dataset& data) -> absl::StatusOr<DiscretePMF> {
    std::vector<double> scores;
    for (double c : candidates) scores.push_back(std::abs(c - data.rows(0, 0)));
    absl::StatusOr<std::vector<double>> pmf = ExpMechPmf(scores, eps / 2.0);
    if (!pmf.ok()) return pmf.status();
    DiscretePMF law;
    for (size_t i = 0; i < pmf->size(); ++i) law.atoms.emplace_back(i, (*pmf)[i]);
    return law;
  };
  // Neighbors differ by one record; with one record every pair is neighbor,
  // and the score changes by at most 2, so verify at the matching budget.
  std::vector<Dataset> universe = {Scalar(0), Scalar(1)};
  absl::StatusOr<DpReport> report = VerifyDp(mechanism, universe, eps, 0.0);
  ASSERT_OK(report);
  EXPECT_TRUE(report->pass);
  EXPECT_LE(report->worst_delta, 1e-12);
}

TEST(VerifyDpTest, ConstantMechanismPassesAtZero) {
  PmfMechanism constant = [](const Dataset&) -> absl::StatusOr<DiscretePMF> {
    return Law({{0, 0.3}, {1, 0.7}});
  };
  absl::StatusOr<DpReport> report =
      VerifyDp(constant, {Scalar(0), Scalar(1), Scalar(2)}, 0.0, 0.0);
  ASSERT_OK(report);
  EXPECT_TRUE(report->pass);
  EXPECT_EQ(report->worst_delta, 0.0);
}

TEST(VerifyDpTest, IdentityMechanismFailsEverywhere) {
  PmfMechanism identity = [](const Dataset& data) -> absl::StatusOr<DiscretePMF> {
    const bool one = data.rows(0, 0) > 0.5;
    return Law({{0, one ? 0.0 : 1.0}, {1, one ? 1.0 : 0.0}});
  };
  for (double eps : {0.0, 1.0, 50.0}) {
    absl::StatusOr<DpReport> report =
        VerifyDp(identity, {Scalar(0), Scalar(1)}, eps, 0.5);
    ASSERT_OK(report);
    EXPECT_FALSE(report->pass);
    EXPECT_DOUBLE_EQ(report->worst_delta, 1.0);
  }
}

TEST(VerifyDpTest, EmptyUniverseIsRejected) {
  PmfMechanism any = [](const Dataset&) -> absl::StatusOr<DiscretePMF> {
    return Law({{0, 1.0}});
  };
  EXPECT_EQ(ErrorKind(VerifyDp(any, {}, 1.0, 0.0)), "invalid-parameter");
}

TEST(VerifyDpTest, WorstPairIsOrdered) {
  std::vector<DiscretePMF> laws = {Law({{0, 0.9}, {1, 0.1}}),
                                   Law({{0, 0.1}, {1, 0.9}})};
  absl::StatusOr<DpReport> report = VerifyDp(laws, {{0, 1, 1}}, 0.0, 0.0);
  ASSERT_OK(report);
  EXPECT_NEAR(report->worst_delta,
              *HockeyStickDelta(laws[report->worst_pair.left],
                                laws[report->worst_pair.right], 0.0),
              1e-15);
}

TEST(ExpMechTest, EqualScoresGiveUniform) {
  const std::vector<double> pmf = *ExpMechPmf({3.0, 3.0, 3.0, 3.0}, 2.0);
  for (double p : pmf) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(ExpMechTest, TwoCandidateClosedForm) {
  const double c = 1.7, s = 0.9;
  const std::vector<double> pmf = *ExpMechPmf({0.0, s}, c);
  EXPECT_NEAR(pmf[0], 1.0 / (1.0 + std::exp(-c * s)), 1e-12);
  EXPECT_NEAR(pmf[1], std::exp(-c * s) / (1.0 + std::exp(-c * s)), 1e-12);
}

TEST(ExpMechTest, ZeroCoefficientIsUniform) {
  const std::vector<double> pmf = *ExpMechPmf({0.0, 5.0, -7.0}, 0.0);
  for (double p : pmf) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(ExpMechTest, ShiftInvariant) {
  const std::vector<double> scores = {0.3, 1.1, 2.5, 0.0};
  std::vector<double> shifted = scores;
  for (double& s : shifted) s += 1234.5;
  const std::vector<double> a = *ExpMechPmf(scores, 3.0);
  const std::vector<double> b = *ExpMechPmf(shifted, 3.0);
  for (size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(ExpMechTest, LargeCoefficientDoesNotUnderflow) {
  const std::vector<double> pmf = *ExpMechPmf({1000.0, 1000.5}, 1e4);
  EXPECT_DOUBLE_EQ(pmf[0], 1.0);
}

TEST(ExpMechTest, Errors) {
  Rng rng(1);
  EXPECT_EQ(ErrorKind(ExpMechPmf({}, 1.0)), "invalid-parameter");
  EXPECT_EQ(ErrorKind(ExpMechPmf({0.0, std::nan("")}, 1.0)), "invalid-score");
  EXPECT_EQ(ErrorKind(ExpMechFinite<int>({}, {}, 1.0, rng)), "invalid-parameter");
}

TEST(ExpMechTest, SamplingFrequenciesMatchPmf) {
  constexpr int kDraws = 200'000;
  const std::vector<double> scores = {0.0, 0.5, 1.0, 2.0, 4.0};
  const std::vector<double> pmf = *ExpMechPmf(scores, 1.0);
  const std::vector<char> names = {'a', 'b', 'c', 'd', 'e'};
  std::vector<int> counts(5, 0);
  Rng rng(9);
  for (int i = 0; i < kDraws; ++i) {
    ++counts[*ExpMechFinite(names, scores, 1.0, rng) - 'a'];
  }
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(static_cast<double>(counts[i]) / kDraws, pmf[i],
                ThreeSe(pmf[i], kDraws));
  }
}

TEST(ClassicPtrTest, ZeroMarginAbortFrequency) {
  constexpr int kTrials = 1'000'000;
  const double eps = 1.0, delta = 0.02;
  Rng rng(4);
  int aborts = 0;
  const Dataset data = Scalar(0);
  for (int i = 0; i < kTrials; ++i) {
    absl::StatusOr<std::optional<double>> out = ClassicPtr(
        [](const Dataset&) { return 0.0; }, data, 1.0,
        [](const Dataset&) { return 0; }, eps, delta, rng);
    aborts += !out->has_value();
  }
  const double expected = 1.0 - delta / 2.0;
  EXPECT_NEAR(static_cast<double>(aborts) / kTrials, expected,
              ThreeSe(expected, kTrials));
}

TEST(ClassicPtrTest, LargeMarginNeverAborts) {
  constexpr int kTrials = 1'000'000;
  const double eps = 1.0, delta = 1e-6;
  const int margin = static_cast<int>(
      std::ceil((2.0 / eps) * (std::log(1.0 / delta) + 40.0)));
  Rng rng(8);
  const Dataset data = Scalar(0);
  int aborts = 0;
  for (int i = 0; i < kTrials; ++i) {
    aborts += !ClassicPtr([](const Dataset&) { return 0.0; }, data, 1.0,
                          [&](const Dataset&) { return margin; }, eps, delta,
                          rng)
                   ->has_value();
  }
  EXPECT_EQ(aborts, 0);
}

TEST(ClassicPtrTest, ReleaseIsLaplaceAroundValue) {
  constexpr int kTrials = 200'000;
  const double eps = 2.0, sensitivity = 0.5, scale = 2.0 * sensitivity / eps;
  Rng rng(12);
  const Dataset data = Scalar(0);
  int inside = 0, released = 0;
  for (int i = 0; i < kTrials; ++i) {
    std::optional<double> out =
        *ClassicPtr([](const Dataset&) { return 0.0; }, data, sensitivity,
                    [](const Dataset&) { return 1000; }, eps, 1e-6, rng);
    ASSERT_TRUE(out.has_value());
    ++released;
    inside += std::abs(*out) <= scale;
  }
  const double expected = 1.0 - std::exp(-1.0);
  EXPECT_NEAR(static_cast<double>(inside) / released, expected,
              ThreeSe(expected, released));
}

TEST(ClassicPtrTest, RejectsNonPositiveSensitivity) {
  Rng rng(1);
  EXPECT_EQ(ErrorKind(ClassicPtr([](const Dataset&) { return 0.0; }, Scalar(0),
                                 0.0, [](const Dataset&) { return 0; }, 1.0,
                                 1e-3, rng)),
            "invalid-parameter");
}

}  // namespace
}  // namespace hptr
