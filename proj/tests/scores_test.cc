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


#include "hptr/scores.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hptr/robust1d.h"
#include "test_util.h"

namespace hptr {
namespace {

Dataset FromColumn(std::vector<double> values) {
  Dataset data;
  data.rows = Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
  return data;
}

Dataset GaussianData(int n, const Eigen::MatrixXd& sigma, uint64_t seed) {
  const int d = static_cast<int>(sigma.rows());
  const Eigen::MatrixXd root = sigma.llt().matrixL();
  Rng rng(seed);
  std::normal_distribution<double> normal;
  Dataset data;
  data.rows.resize(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd g(d);
    for (int j = 0; j < d; ++j) g(j) = normal(rng);
    data.rows.row(i) = (root * g).transpose();
  }
  return data;
}

// Sorted-copy oracle for the two-sided trimmed mean and population variance.
std::pair<double, double> OracleTrim(std::vector<double> v, int tail) {
  std::sort(v.begin(), v.end());
  const int m = static_cast<int>(v.size()) - 2 * tail;
  double mean = 0.0;
  for (int i = tail; i < tail + m; ++i) mean += v[i];
  mean /= m;
  double var = 0.0;
  for (int i = tail; i < tail + m; ++i) var += (v[i] - mean) * (v[i] - mean);
  return {mean, var / m};
}

DirectionNet CustomNet(const Eigen::MatrixXd& elements) {
  DirectionNet net;
  net.kind = NetKind::kVector;
  net.d = static_cast<int>(elements.rows());
  net.elements = elements;
  return net;
}

TEST(MeanScoreTest, OneDimensionalExample) {
  const Dataset data = FromColumn({-2, -1, 0, 1, 2});
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  absl::StatusOr<ProjectedScoreModel> model =
      ProjectedScoreModel::Build(data.rows, net, 1, /*normalize=*/true);
  ASSERT_OK(model);
  EXPECT_NEAR(model->Evaluate(Eigen::VectorXd::Constant(1, 1.0)), std::sqrt(1.5),
              1e-12);
  EXPECT_NEAR(model->Evaluate(Eigen::VectorXd::Zero(1)), 0.0, 1e-15);
}

TEST(MeanScoreTest, TrimmedMeanScoresZero) {
  const Dataset data = FromColumn({0.3, -1.2, 4.0, 2.2, 0.1, -0.7, 9.0});
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  const double mean = OracleTrim({0.3, -1.2, 4.0, 2.2, 0.1, -0.7, 9.0}, 1).first;
  ProjectedScoreModel model = *ProjectedScoreModel::Build(data.rows, net, 1, true);
  EXPECT_NEAR(model.Evaluate(Eigen::VectorXd::Constant(1, mean)), 0.0, 1e-14);
}

TEST(MeanScoreTest, PerDirectionMatchesOracle) {
  const Dataset data = GaussianData(301, Eigen::Matrix2d::Identity(), 8);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 32, 0);
  const double alpha = 0.2;
  const int tail = TrimCount(kTwoSidedTailFraction, alpha, data.n());
  const Eigen::Vector2d theta(0.3, -0.4);
  ProjectedScoreModel model = *ProjectedScoreModel::Build(data.rows, net, tail, true);
  const std::vector<double> per = model.PerDirection(theta);
  double best = -1e300;
  for (int j = 0; j < net.size(); ++j) {
    const Eigen::VectorXd z = data.rows * net.elements.col(j);
    const auto [mean, var] =
        OracleTrim(std::vector<double>(z.data(), z.data() + z.size()), tail);
    const double expected = (net.elements.col(j).dot(theta) - mean) / std::sqrt(var);
    EXPECT_NEAR(per[j], expected, 1e-12);
    best = std::max(best, expected);
  }
  EXPECT_NEAR(*MeanScore(data, theta, alpha, net), best, 1e-12);
}

TEST(MeanScoreTest, NetRefinementConverges) {
  Eigen::Matrix2d sigma;
  sigma << 2.0, 0.6, 0.6, 0.5;
  const Dataset data = GaussianData(200, sigma, 3);
  const int tail = TrimCount(kTwoSidedTailFraction, 0.1, data.n());
  const Eigen::Vector2d theta(0.4, 0.25);
  // Dense brute force over random directions.
  Rng rng(77);
  std::normal_distribution<double> normal;
  double dense = -1e300;
  for (int k = 0; k < 100000; ++k) {
    Eigen::Vector2d v(normal(rng), normal(rng));
    v.normalize();
    const Eigen::VectorXd z = data.rows * v;
    const auto [mean, var] =
        OracleTrim(std::vector<double>(z.data(), z.data() + z.size()), tail);
    dense = std::max(dense, (v.dot(theta) - mean) / std::sqrt(var));
  }
  double previous = -1e300;
  double last = 0.0;
  for (int k = 2; k <= 12; ++k) {
    const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 1 << k, 0);
    last = ProjectedScoreModel::Build(data.rows, net, tail, true)->Evaluate(theta);
    EXPECT_GE(last, previous - 1e-12);
    previous = last;
  }
  EXPECT_NEAR(last, dense, 1e-3);
}

TEST(MeanScoreTest, ZeroSpreadIsDegenerate) {
  const Dataset data = FromColumn({1, 1, 1, 1, 1});
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  EXPECT_EQ(ErrorKind(MeanScore(data, Eigen::VectorXd::Zero(1), 0.2, net)),
            "degenerate-direction");
}

TEST(EuclideanScoreTest, OneDimensionalExample) {
  const Dataset data = FromColumn({-2, -1, 0, 1, 2});
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  ProjectedScoreModel model = *ProjectedScoreModel::Build(data.rows, net, 1, false);
  EXPECT_NEAR(model.Evaluate(Eigen::VectorXd::Constant(1, 1.0)), 1.0, 1e-15);
  EXPECT_NEAR(model.Evaluate(Eigen::VectorXd::Zero(1)), 0.0, 1e-15);
}

TEST(EuclideanScoreTest, LipschitzInCandidate) {
  const Dataset data = GaussianData(150, Eigen::Matrix3d::Identity(), 5);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 3, 64, 9);
  ProjectedScoreModel model = *ProjectedScoreModel::Build(data.rows, net, 5, false);
  Rng rng(6);
  std::normal_distribution<double> normal;
  for (int k = 0; k < 500; ++k) {
    Eigen::Vector3d a(normal(rng), normal(rng), normal(rng));
    Eigen::Vector3d b = a + 0.3 * Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    EXPECT_LE(std::abs(model.Evaluate(a) - model.Evaluate(b)),
              (a - b).norm() + 1e-12);
  }
}

Dataset Labeled(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Dataset data;
  data.rows = x;
  data.labels = y;
  return data;
}

TEST(LrScoreTest, HandInstances) {
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  Eigen::VectorXd y(5);
  y << 1, -1, 1, -1, 0;
  RegressionScoreModel model = *RegressionScoreModel::Build(
      Labeled(Eigen::MatrixXd::Ones(5, 1), y), net, 1, 1.0);
  // Middle of {-1,-1,0,1,1} is {-1,0,1}, in both directions.
  EXPECT_EQ(model.PerDirection(Eigen::VectorXd::Zero(1)),
            std::vector<double>({0.0, 0.0}));
  y << 3, 2, 1, 0, -1;
  model = *RegressionScoreModel::Build(Labeled(Eigen::MatrixXd::Ones(5, 1), y),
                                       net, 1, 2.0);
  // +1: middle {0,1,2} mean 1; -1: middle {-2,-1,0} mean -1; scale 1, gamma 2.
  EXPECT_EQ(model.PerDirection(Eigen::VectorXd::Zero(1)),
            std::vector<double>({0.5, -0.5}));
  EXPECT_EQ(model.Evaluate(Eigen::VectorXd::Zero(1)), 0.5);
}

TEST(LrScoreTest, ExactFitScoresZero) {
  const Dataset base = GaussianData(100, Eigen::Matrix2d::Identity(), 1);
  const Eigen::Vector2d beta(1.5, -0.5);
  const Dataset data = Labeled(base.rows, base.rows * beta);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 16, 0);
  EXPECT_NEAR(*LrScore(data, beta, 0.1, 1e-12, net), 0.0, 1e-12);
}

TEST(LrScoreTest, RotationInvariant) {
  const Dataset base = GaussianData(120, Eigen::Matrix2d::Identity(), 2);
  Rng rng(3);
  std::normal_distribution<double> normal;
  Eigen::VectorXd y(120);
  for (int i = 0; i < 120; ++i) y(i) = base.rows(i, 0) + normal(rng);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 32, 0);
  const double angle = 0.7;
  Eigen::Matrix2d q;
  q << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Eigen::Vector2d beta(0.2, 0.9);
  const double plain =
      *LrScore(Labeled(base.rows, y), beta, 0.1, 0.8, net);
  const double rotated = *LrScore(Labeled(base.rows * q.transpose(), y),
                                  q * beta, 0.1, 0.8,
                                  CustomNet(q * net.elements));
  EXPECT_NEAR(plain, rotated, 1e-10);
}

TEST(LrScoreTest, ZeroNoiseScaleIsRejected) {
  const Dataset base = GaussianData(20, Eigen::Matrix2d::Identity(), 2);
  const Dataset data = Labeled(base.rows, Eigen::VectorXd::Zero(20));
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 8, 0);
  EXPECT_EQ(ErrorKind(LrScore(data, Eigen::Vector2d::Zero(), 0.1, 0.0, net)),
            "degenerate-noise");
}

TEST(CovScoreTest, OneDimensionalMatchesMeanScoreOfSquares) {
  const Dataset data = GaussianData(101, Eigen::MatrixXd::Identity(1, 1), 4);
  Dataset squares = data;
  squares.rows = data.rows.array().square();
  const DirectionNet symnet = *MakeDirectionNet(NetKind::kSymmetricMatrix, 1, 2, 0);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  for (double s : {0.3, 0.9, 1.0, 2.5}) {
    EXPECT_EQ(*CovScore(data, Eigen::MatrixXd::Constant(1, 1, s), 0.1, symnet),
              *MeanScore(squares, Eigen::VectorXd::Constant(1, s), 0.1, net));
  }
  const int tail = TrimCount(kTwoSidedTailFraction, 0.1, 101);
  const Eigen::VectorXd sq = squares.rows.col(0);
  const double center =
      OracleTrim(std::vector<double>(sq.data(), sq.data() + sq.size()), tail).first;
  EXPECT_NEAR(*CovScore(data, Eigen::MatrixXd::Constant(1, 1, center), 0.1, symnet),
              0.0, 1e-12);
}

TEST(CovScoreTest, NonPositiveDefiniteIsDomainError) {
  const Dataset data = GaussianData(50, Eigen::Matrix2d::Identity(), 4);
  const DirectionNet symnet = *MakeDirectionNet(NetKind::kSymmetricMatrix, 2, 8, 0);
  Eigen::Matrix2d bad;
  bad << 1.0, 0.0, 0.0, -0.1;
  EXPECT_EQ(ErrorKind(CovScore(data, bad, 0.1, symnet)), "domain-error");
}

TEST(PcaScoreTest, OneDimensionalIsZero) {
  const Dataset data = FromColumn({1.0, -2.0, 0.5, 3.0});
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 1, 2, 0);
  EXPECT_EQ(*PcaScore(data, Eigen::VectorXd::Constant(1, 1.0), 0.2, net), 0.0);
  EXPECT_EQ(*PcaScore(data, Eigen::VectorXd::Constant(1, -1.0), 0.2, net), 0.0);
}

TEST(PcaScoreTest, DataOnFirstAxis) {
  Dataset data;
  data.rows = Eigen::MatrixXd::Zero(10, 2);
  for (int i = 0; i < 10; ++i) data.rows(i, 0) = i - 4.5;
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 16, 0);
  EXPECT_EQ(*PcaScore(data, Eigen::Vector2d(0, 1), 0.2, net), 1.0);
  EXPECT_EQ(*PcaScore(data, Eigen::Vector2d(1, 0), 0.2, net), 0.0);
}

TEST(PcaScoreTest, DenominatorMatchesDenseSearch) {
  Eigen::Matrix2d sigma;
  sigma << 3.0, 1.0, 1.0, 1.0;
  const Dataset data = GaussianData(300, sigma, 12);
  const int drop = TrimCount(kOneSidedDropFraction, 0.1, data.n());
  const int keep = data.n() - drop;
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 256, 0);
  PcaScoreModel model = *PcaScoreModel::Build(data, net, drop);
  Rng rng(1);
  std::normal_distribution<double> normal;
  double dense = 0.0;
  for (int k = 0; k < 100000; ++k) {
    Eigen::Vector2d v(normal(rng), normal(rng));
    v.normalize();
    Eigen::VectorXd z = (data.rows * v).array().square();
    std::sort(z.data(), z.data() + z.size());
    dense = std::max(dense, z.head(keep).sum() / keep);
  }
  EXPECT_NEAR(model.denominator(), dense, 1e-3 * dense);
}

TEST(PcaScoreTest, Errors) {
  Dataset zeros;
  zeros.rows = Eigen::MatrixXd::Zero(6, 2);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 2, 8, 0);
  EXPECT_EQ(ErrorKind(PcaScore(zeros, Eigen::Vector2d(1, 0), 0.1, net)),
            "degenerate-data");
  EXPECT_EQ(ErrorKind(PcaScore(zeros, Eigen::Vector2d(1, 1), 0.1, net)),
            "invalid-parameter");
}

TEST(FlattenTest, Convention) {
  Eigen::Matrix2d m;
  m << 1, 2, 3, 4;
  EXPECT_EQ(Flatten(m), Eigen::Vector4d(1, 2, 3, 4));
}

TEST(FlattenTest, RoundTrip) {
  for (int d = 1; d <= 5; ++d) {
    const Eigen::MatrixXd m = Eigen::MatrixXd::Random(d, d);
    EXPECT_EQ(*Sharpen(Flatten(m)), m);
  }
  EXPECT_EQ(ErrorKind(Sharpen(Eigen::VectorXd::Zero(5))), "shape-error");
}

TEST(FlattenTest, UpperTriangleRoundTrip) {
  Eigen::Matrix3d m;
  m << 1, 2, 3, 2, 5, 6, 3, 6, 9;
  EXPECT_EQ(SymmetricFromUpper(UpperFromSymmetric(m), 3), m);
}

TEST(IsserlisTest, IdentityEntries) {
  const Eigen::MatrixXd psi = IsserlisOperator(Eigen::Matrix2d::Identity());
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        for (int l = 0; l < 2; ++l) {
          EXPECT_EQ(psi(2 * i + j, 2 * k + l),
                    double(i == k && j == l) + double(i == l && j == k));
        }
      }
    }
  }
}

TEST(IsserlisTest, EqualsTwiceKroneckerOnSymmetricMatrices) {
  Eigen::Matrix2d sigma;
  sigma << 2.0, 0.5, 0.5, 1.0;
  const Eigen::MatrixXd psi = IsserlisOperator(sigma);
  Eigen::Matrix4d kron;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) kron.block<2, 2>(2 * i, 2 * j) = sigma(i, j) * sigma;
  }
  for (int t = 0; t < 20; ++t) {
    Eigen::Matrix2d a = Eigen::Matrix2d::Random();
    a = (a + a.transpose()).eval();
    EXPECT_LT((psi * Flatten(a) - 2.0 * kron * Flatten(a)).norm(), 1e-12);
  }
}

TEST(IsserlisTest, MonteCarloFourthMoments) {
  Eigen::Matrix2d sigma;
  sigma << 1.5, 0.4, 0.4, 0.8;
  const int draws = 200000;
  const Dataset data = GaussianData(draws, sigma, 31);
  const Eigen::MatrixXd features = OuterProductFeatures(data.rows);
  const Eigen::MatrixXd centered =
      features.rowwise() - Flatten(sigma).transpose();
  const Eigen::MatrixXd psi = IsserlisOperator(sigma);
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      const Eigen::ArrayXd prod = centered.col(a).array() * centered.col(b).array();
      const double mean = prod.mean();
      const double se = std::sqrt((prod - mean).square().mean() / draws);
      EXPECT_NEAR(mean, psi(a, b), 5.0 * se) << a << "," << b;
    }
  }
}

TEST(TrueDistanceTest, MeanExamples) {
  Reference ref;
  ref.mean = Eigen::Vector2d::Zero();
  ref.sigma = Eigen::Matrix2d::Identity();
  absl::StatusOr<DistanceResult> r =
      TrueDistance(Task::kMean, Eigen::Vector2d(1, 0), ref);
  ASSERT_OK(r);
  EXPECT_NEAR(r->value, 1.0, 1e-15);
  EXPECT_NEAR((r->witness - Eigen::Vector2d(1, 0)).norm(), 0.0, 1e-15);
  ref.sigma = Eigen::Vector2d(4, 1).asDiagonal();
  EXPECT_NEAR(TrueDistance(Task::kMean, Eigen::Vector2d(2, 0), ref)->value, 1.0,
              1e-15);
  ref.sigma(1, 1) = 0.0;
  EXPECT_EQ(ErrorKind(TrueDistance(Task::kMean, Eigen::Vector2d(2, 0), ref)),
            "domain-error");
}

TEST(TrueDistanceTest, CovarianceExample) {
  Reference ref;
  ref.sigma = Eigen::Matrix2d::Identity();
  for (double t : {0.1, 0.5, 2.0}) {
    const Eigen::Matrix2d sigma_hat = Eigen::Vector2d(1 + t, 1).asDiagonal();
    EXPECT_NEAR(TrueDistance(Task::kCovariance, Flatten(sigma_hat), ref)->value,
                t / std::sqrt(2.0), 1e-14);
  }
}

TEST(TrueDistanceTest, ExplicitOperatorAgreesWithGaussianForm) {
  Reference ref;
  ref.sigma = Eigen::Matrix2d::Identity();
  ref.sigma(0, 1) = ref.sigma(1, 0) = 0.3;
  Eigen::Matrix2d sigma_hat;
  sigma_hat << 1.4, 0.1, 0.1, 0.7;
  const double closed =
      TrueDistance(Task::kCovariance, Flatten(sigma_hat), ref)->value;
  ref.psi = IsserlisOperator(ref.sigma);
  EXPECT_NEAR(TrueDistance(Task::kCovariance, Flatten(sigma_hat), ref)->value,
              closed, 1e-12);
}

TEST(TrueDistanceTest, RegressionAndPca) {
  Reference ref;
  ref.sigma = Eigen::Vector2d(4, 1).asDiagonal();
  ref.beta = Eigen::Vector2d(1, 1);
  ref.gamma = 2.0;
  EXPECT_NEAR(TrueDistance(Task::kRegression, Eigen::Vector2d(2, 1), ref)->value,
              1.0, 1e-15);
  EXPECT_NEAR(TrueDistance(Task::kPca, Eigen::Vector2d(1, 0), ref)->value, 0.0,
              1e-15);
  EXPECT_NEAR(TrueDistance(Task::kPca, Eigen::Vector2d(0, 1), ref)->value, 0.75,
              1e-15);
}

TEST(DualityTest, NetMaxBoundedAndAttainedAtWitness) {
  Rng rng(10);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 2 + trial % 3;
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d * d; ++i) g.data()[i] = normal(rng);
    Reference ref;
    ref.sigma = g * g.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
    ref.mean = Eigen::VectorXd::Zero(d);
    Eigen::VectorXd a(d);
    for (int i = 0; i < d; ++i) a(i) = normal(rng);
    const DistanceResult truth = *TrueDistance(Task::kMean, a, ref);
    const DirectionNet net = WithExtraDirection(
        *MakeDirectionNet(NetKind::kVector, d, 64, trial), truth.witness);
    double best = -1e300;
    for (int j = 0; j < net.size(); ++j) {
      const Eigen::VectorXd v = net.elements.col(j);
      const double ratio = v.dot(a) / std::sqrt(v.dot(ref.sigma * v));
      EXPECT_LE(ratio, truth.value * (1 + 1e-12));
      best = std::max(best, ratio);
    }
    EXPECT_NEAR(best, truth.value, 1e-10);
  }
}

TEST(DualityTest, WhitenedDeviationBound) {
  Rng rng(14);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 4;
    Eigen::MatrixXd g(d, d), h(d, d);
    for (int i = 0; i < d * d; ++i) {
      g.data()[i] = normal(rng);
      h.data()[i] = 0.3 * normal(rng);
    }
    const Eigen::MatrixXd sigma = g * g.transpose() + 0.2 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd a = sigma + 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
    const Eigen::MatrixXd inv_sqrt = eig.operatorInverseSqrt();
    const Eigen::MatrixXd sqrt = eig.operatorSqrt();
    const Eigen::MatrixXd dev =
        inv_sqrt * a * inv_sqrt - Eigen::MatrixXd::Identity(d, d);
    const double c = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dev)
                         .eigenvalues()
                         .cwiseAbs()
                         .maxCoeff();
    Eigen::VectorXd u(d);
    for (int i = 0; i < d; ++i) u(i) = normal(rng);
    EXPECT_LE((inv_sqrt * (a - sigma) * u).norm(),
              c * (sqrt * u).norm() * (1 + 1e-10) + 1e-12);
  }
}

}  // namespace
}  // namespace hptr
