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

#ifndef HPTR_SCORES_H_
#define HPTR_SCORES_H_

#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "hptr/dataset.h"
#include "hptr/direction_net.h"
#include "hptr/kernels.h"
#include "hptr/task.h"

namespace hptr {

// Row-major flattening: entry (i, j) of a d x d matrix goes to d * i + j.
Eigen::VectorXd Flatten(const Eigen::MatrixXd& m);
absl::StatusOr<Eigen::MatrixXd> Sharpen(const Eigen::VectorXd& v);

// Fourth-moment operator of N(0, sigma) on flattened matrices:
// psi((i,j),(k,l)) = sigma(i,k) sigma(j,l) + sigma(i,l) sigma(j,k).
Eigen::MatrixXd IsserlisOperator(const Eigen::MatrixXd& sigma);

// n x d^2 matrix whose row i is Flatten(x_i x_i^T).
Eigen::MatrixXd OuterProductFeatures(const Eigen::MatrixXd& x);

// Symmetric matrix from its upper triangle listed row by row, and back.
Eigen::MatrixXd SymmetricFromUpper(const Eigen::VectorXd& upper, int d);
Eigen::VectorXd UpperFromSymmetric(const Eigen::MatrixXd& m);

// True when every eigenvalue is strictly positive.
bool IsPositiveDefinite(const Eigen::MatrixXd& m);

// Score of the form max_j (<w_j, theta> - c_j) / s_j, where c_j and s_j are
// the two-sided trimmed mean and standard deviation of the projections
// features * w_j. Serves the mean score (features = x), the covariance score
// (features = flattened x x^T) and, with s_j = 1, the Euclidean mean score.
class ProjectedScoreModel {
 public:
  static absl::StatusOr<ProjectedScoreModel> Build(
      const Eigen::MatrixXd& features, const DirectionNet& net, int tail_count,
      bool normalize, Execution execution = Execution::kParallel);

  double Evaluate(const Eigen::VectorXd& theta) const;
  std::vector<double> PerDirection(const Eigen::VectorXd& theta) const;

  const Eigen::MatrixXd& directions() const { return directions_; }
  const Eigen::VectorXd& centers() const { return centers_; }
  const Eigen::VectorXd& scales() const { return scales_; }

 private:
  Eigen::MatrixXd directions_;
  Eigen::VectorXd centers_;
  Eigen::VectorXd scales_;
};

// max_v (trimmed mean of <v, x_i> (y_i - x_i^T beta)) / (s_v gamma_hat), with
// s_v^2 the trimmed second moment of <v, x_i> about zero.
class RegressionScoreModel {
 public:
  static absl::StatusOr<RegressionScoreModel> Build(
      const Dataset& data, const DirectionNet& net, int tail_count,
      double gamma_hat, Execution execution = Execution::kParallel);

  double Evaluate(const Eigen::VectorXd& beta) const;
  std::vector<double> PerDirection(const Eigen::VectorXd& beta) const;

  const Eigen::VectorXd& scales() const { return scales_; }
  double gamma_hat() const { return gamma_hat_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd projections_;
  Eigen::VectorXd scales_;
  int tail_count_ = 0;
  double gamma_hat_ = 1.0;
};

// 1 - q(u) / max(q(u), max_v q(v)), where q(u) is the mean of the smallest
// n - drop values of <u, x_i>^2. The net maximum is computed once.
class PcaScoreModel {
 public:
  static absl::StatusOr<PcaScoreModel> Build(
      const Dataset& data, const DirectionNet& net, int drop_count,
      Execution execution = Execution::kParallel);

  double Evaluate(const Eigen::VectorXd& u) const;
  double Numerator(const Eigen::VectorXd& u) const;
  double denominator() const { return denominator_; }

 private:
  Eigen::MatrixXd x_;
  int keep_ = 0;
  double denominator_ = 0.0;
};

absl::StatusOr<double> MeanScore(const Dataset& data,
                                 const Eigen::VectorXd& mean_hat, double alpha,
                                 const DirectionNet& net);
absl::StatusOr<double> MeanScoreEuclidean(const Dataset& data,
                                          const Eigen::VectorXd& mean_hat,
                                          double alpha,
                                          const DirectionNet& net);
absl::StatusOr<double> LrScore(const Dataset& data,
                               const Eigen::VectorXd& beta_hat, double alpha,
                               double gamma_hat, const DirectionNet& net);
absl::StatusOr<double> CovScore(const Dataset& data,
                                const Eigen::MatrixXd& sigma_hat, double alpha,
                                const DirectionNet& symnet);
absl::StatusOr<double> PcaScore(const Dataset& data, const Eigen::VectorXd& u,
                                double alpha, const DirectionNet& net);

struct DistanceResult {
  double value = 0.0;
  // Direction attaining the supremum (mean tasks only).
  Eigen::VectorXd witness;
};

// Error of `theta` against the reference, in the metric the task targets.
// Covariance estimates are passed flattened (d^2 entries).
absl::StatusOr<DistanceResult> TrueDistance(Task task,
                                            const Eigen::VectorXd& theta,
                                            const Reference& reference);

}  // namespace hptr

#endif  // HPTR_SCORES_H_
