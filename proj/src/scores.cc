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
#include <limits>

#include "absl/strings/str_cat.h"
#include "hptr/robust1d.h"
#include "string_compat.h"

namespace hptr {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

absl::Status CheckTrimFeasible(int n, int tail_count) {
  if (n < 2 * tail_count + 1) {
    return absl::FailedPreconditionError(absl::StrCat(
        "insufficient-data: n=", n, " cannot lose ", tail_count,
        " points from each tail"));
  }
  return absl::OkStatus();
}

absl::Status CheckNet(const DirectionNet& net, NetKind kind, int d) {
  if (net.kind != kind || net.d != d) {
    return absl::InvalidArgumentError(
        "invalid-parameter: net kind or dimension does not match the data");
  }
  return absl::OkStatus();
}

Eigen::MatrixXd RequireSymmetric(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace

std::string_view TaskName(Task task) {
  switch (task) {
    case Task::kMean:
      return "mean";
    case Task::kEuclideanMean:
      return "euclidean-mean";
    case Task::kRegression:
      return "lr";
    case Task::kCovariance:
      return "cov";
    case Task::kPca:
      return "pca";
  }
  return "unknown";
}

absl::StatusOr<Task> ParseTask(std::string_view name) {
  if (name == "mean") return Task::kMean;
  if (name == "euclidean-mean") return Task::kEuclideanMean;
  if (name == "lr" || name == "regression") return Task::kRegression;
  if (name == "cov" || name == "covariance") return Task::kCovariance;
  if (name == "pca") return Task::kPca;
  return absl::InvalidArgumentError(
      absl::StrCat("invalid-parameter: unknown task '", AbslView(name), "'"));
}

int ParameterDimension(Task task, int d) {
  return task == Task::kCovariance ? d * (d + 1) / 2 : d;
}

Eigen::VectorXd Flatten(const Eigen::MatrixXd& m) {
  Eigen::VectorXd v(m.rows() * m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  }
  return v;
}

absl::StatusOr<Eigen::MatrixXd> Sharpen(const Eigen::VectorXd& v) {
  const int d = static_cast<int>(std::lround(std::sqrt(v.size())));
  if (d * d != v.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("shape-error: length ", v.size(), " is not a square"));
  }
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) m(i, j) = v(i * d + j);
  }
  return m;
}

Eigen::MatrixXd IsserlisOperator(const Eigen::MatrixXd& sigma) {
  const int d = static_cast<int>(sigma.rows());
  Eigen::MatrixXd psi(d * d, d * d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      for (int k = 0; k < d; ++k) {
        for (int l = 0; l < d; ++l) {
          psi(i * d + j, k * d + l) =
              sigma(i, k) * sigma(j, l) + sigma(i, l) * sigma(j, k);
        }
      }
    }
  }
  return psi;
}

Eigen::MatrixXd OuterProductFeatures(const Eigen::MatrixXd& x) {
  const int d = static_cast<int>(x.cols());
  Eigen::MatrixXd out(x.rows(), d * d);
  for (int r = 0; r < x.rows(); ++r) {
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) out(r, i * d + j) = x(r, i) * x(r, j);
    }
  }
  return out;
}

Eigen::MatrixXd SymmetricFromUpper(const Eigen::VectorXd& upper, int d) {
  Eigen::MatrixXd m(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      m(i, j) = upper(k);
      m(j, i) = upper(k);
      ++k;
    }
  }
  return m;
}

Eigen::VectorXd UpperFromSymmetric(const Eigen::MatrixXd& m) {
  const int d = static_cast<int>(m.rows());
  Eigen::VectorXd upper(d * (d + 1) / 2);
  int k = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) upper(k++) = m(i, j);
  }
  return upper;
}

bool IsPositiveDefinite(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
      RequireSymmetric(m), Eigen::EigenvaluesOnly);
  return solver.info() == Eigen::Success && solver.eigenvalues().minCoeff() > 0;
}

absl::StatusOr<ProjectedScoreModel> ProjectedScoreModel::Build(
    const Eigen::MatrixXd& features, const DirectionNet& net, int tail_count,
    bool normalize, Execution execution) {
  if (features.cols() != net.elements.rows()) {
    return absl::InvalidArgumentError(
        "invalid-parameter: net dimension does not match the features");
  }
  if (absl::Status s = CheckTrimFeasible(static_cast<int>(features.rows()),
                                         tail_count);
      !s.ok()) {
    return s;
  }
  const std::vector<ProjectedMoments> moments =
      ProjectedTrimmedMoments(features, net.elements, tail_count, execution);
  ProjectedScoreModel model;
  model.directions_ = net.elements;
  model.centers_.resize(net.size());
  model.scales_.resize(net.size());
  for (int j = 0; j < net.size(); ++j) {
    model.centers_(j) = moments[j].mean;
    if (normalize) {
      if (!(moments[j].var > 0.0)) {
        return absl::FailedPreconditionError(absl::StrCat(
            "degenerate-direction: zero trimmed variance along net element ",
            j));
      }
      model.scales_(j) = std::sqrt(moments[j].var);
    } else {
      model.scales_(j) = 1.0;
    }
  }
  return model;
}

double ProjectedScoreModel::Evaluate(const Eigen::VectorXd& theta) const {
  double best = kNegInf;
  for (int j = 0; j < directions_.cols(); ++j) {
    const double value =
        (directions_.col(j).dot(theta) - centers_(j)) / scales_(j);
    best = std::max(best, value);
  }
  return best;
}

std::vector<double> ProjectedScoreModel::PerDirection(
    const Eigen::VectorXd& theta) const {
  std::vector<double> out(directions_.cols());
  for (int j = 0; j < directions_.cols(); ++j) {
    out[j] = (directions_.col(j).dot(theta) - centers_(j)) / scales_(j);
  }
  return out;
}

absl::StatusOr<RegressionScoreModel> RegressionScoreModel::Build(
    const Dataset& data, const DirectionNet& net, int tail_count,
    double gamma_hat, Execution execution) {
  if (!data.labeled()) {
    return absl::InvalidArgumentError("invalid-parameter: data has no labels");
  }
  if (absl::Status s = CheckNet(net, NetKind::kVector, data.d()); !s.ok()) {
    return s;
  }
  if (absl::Status s = CheckTrimFeasible(data.n(), tail_count); !s.ok()) {
    return s;
  }
  if (!(gamma_hat > 0.0)) {
    return absl::FailedPreconditionError(
        "degenerate-noise: gamma_hat must be positive");
  }
  const std::vector<ProjectedMoments> moments =
      ProjectedTrimmedMoments(data.rows, net.elements, tail_count, execution);
  RegressionScoreModel model;
  model.x_ = data.rows;
  model.y_ = *data.labels;
  model.projections_ = data.rows * net.elements;
  model.scales_.resize(net.size());
  for (int j = 0; j < net.size(); ++j) {
    if (!(moments[j].second_moment > 0.0)) {
      return absl::FailedPreconditionError(absl::StrCat(
          "degenerate-direction: zero trimmed second moment along net "
          "element ",
          j));
    }
    model.scales_(j) = std::sqrt(moments[j].second_moment);
  }
  model.tail_count_ = tail_count;
  model.gamma_hat_ = gamma_hat;
  return model;
}

std::vector<double> RegressionScoreModel::PerDirection(
    const Eigen::VectorXd& beta) const {
  const Eigen::VectorXd residual = y_ - x_ * beta;
  const int n = static_cast<int>(residual.size());
  std::vector<double> out(projections_.cols());
  std::vector<double> scratch(n);
  for (int j = 0; j < projections_.cols(); ++j) {
    for (int i = 0; i < n; ++i) scratch[i] = projections_(i, j) * residual(i);
    const MiddleSums sums = MiddleBlockSums(scratch, tail_count_);
    out[j] = (sums.sum / sums.count) / (scales_(j) * gamma_hat_);
  }
  return out;
}

double RegressionScoreModel::Evaluate(const Eigen::VectorXd& beta) const {
  const std::vector<double> values = PerDirection(beta);
  return *std::max_element(values.begin(), values.end());
}

absl::StatusOr<PcaScoreModel> PcaScoreModel::Build(const Dataset& data,
                                                   const DirectionNet& net,
                                                   int drop_count,
                                                   Execution execution) {
  if (absl::Status s = CheckNet(net, NetKind::kVector, data.d()); !s.ok()) {
    return s;
  }
  const int keep = data.n() - drop_count;
  if (drop_count < 0 || keep < 1) {
    return absl::FailedPreconditionError(
        absl::StrCat("insufficient-data: keep count ", keep, " < 1"));
  }
  PcaScoreModel model;
  model.x_ = data.rows;
  model.keep_ = keep;
  std::vector<double> per_direction(net.size());
  ParallelFor(
      net.size(),
      [&](int64_t j) {
        per_direction[j] = model.Numerator(net.elements.col(j));
      },
      execution);
  model.denominator_ =
      *std::max_element(per_direction.begin(), per_direction.end());
  if (!(model.denominator_ > 0.0)) {
    return absl::FailedPreconditionError(
        "degenerate-data: every trimmed quadratic form on the net is zero");
  }
  return model;
}

double PcaScoreModel::Numerator(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd z = x_ * u;
  std::vector<double> sq(z.size());
  for (int i = 0; i < z.size(); ++i) sq[i] = z(i) * z(i);
  return SmallestSum(sq, keep_) / keep_;
}

double PcaScoreModel::Evaluate(const Eigen::VectorXd& u) const {
  const double numerator = Numerator(u);
  return 1.0 - numerator / std::max(numerator, denominator_);
}

absl::StatusOr<double> MeanScore(const Dataset& data,
                                 const Eigen::VectorXd& mean_hat, double alpha,
                                 const DirectionNet& net) {
  if (absl::Status s = CheckNet(net, NetKind::kVector, data.d()); !s.ok()) {
    return s;
  }
  absl::StatusOr<ProjectedScoreModel> model = ProjectedScoreModel::Build(
      data.rows, net, TrimCount(kTwoSidedTailFraction, alpha, data.n()),
      /*normalize=*/true);
  if (!model.ok()) return model.status();
  return model->Evaluate(mean_hat);
}

absl::StatusOr<double> MeanScoreEuclidean(const Dataset& data,
                                          const Eigen::VectorXd& mean_hat,
                                          double alpha,
                                          const DirectionNet& net) {
  if (absl::Status s = CheckNet(net, NetKind::kVector, data.d()); !s.ok()) {
    return s;
  }
  absl::StatusOr<ProjectedScoreModel> model = ProjectedScoreModel::Build(
      data.rows, net, TrimCount(kTwoSidedTailFraction, alpha, data.n()),
      /*normalize=*/false);
  if (!model.ok()) return model.status();
  return model->Evaluate(mean_hat);
}

absl::StatusOr<double> LrScore(const Dataset& data,
                               const Eigen::VectorXd& beta_hat, double alpha,
                               double gamma_hat, const DirectionNet& net) {
  absl::StatusOr<RegressionScoreModel> model = RegressionScoreModel::Build(
      data, net, TrimCount(kTwoSidedTailFraction, alpha, data.n()), gamma_hat);
  if (!model.ok()) return model.status();
  return model->Evaluate(beta_hat);
}

absl::StatusOr<double> CovScore(const Dataset& data,
                                const Eigen::MatrixXd& sigma_hat, double alpha,
                                const DirectionNet& symnet) {
  if (absl::Status s = CheckNet(symnet, NetKind::kSymmetricMatrix, data.d());
      !s.ok()) {
    return s;
  }
  if (sigma_hat.rows() != data.d() || sigma_hat.cols() != data.d() ||
      sigma_hat != sigma_hat.transpose() || !IsPositiveDefinite(sigma_hat)) {
    return absl::OutOfRangeError(
        "domain-error: covariance candidate is not symmetric positive "
        "definite");
  }
  absl::StatusOr<ProjectedScoreModel> model = ProjectedScoreModel::Build(
      OuterProductFeatures(data.rows), symnet,
      TrimCount(kTwoSidedTailFraction, alpha, data.n()), /*normalize=*/true);
  if (!model.ok()) return model.status();
  return model->Evaluate(Flatten(sigma_hat));
}

absl::StatusOr<double> PcaScore(const Dataset& data, const Eigen::VectorXd& u,
                                double alpha, const DirectionNet& net) {
  if (std::abs(u.norm() - 1.0) > 1e-10) {
    return absl::InvalidArgumentError(
        "invalid-parameter: PCA candidate must have unit norm");
  }
  absl::StatusOr<PcaScoreModel> model = PcaScoreModel::Build(
      data, net, TrimCount(kOneSidedDropFraction, alpha, data.n()));
  if (!model.ok()) return model.status();
  return model->Evaluate(u);
}

absl::StatusOr<DistanceResult> TrueDistance(Task task,
                                            const Eigen::VectorXd& theta,
                                            const Reference& reference) {
  DistanceResult result;
  switch (task) {
    case Task::kEuclideanMean: {
      const Eigen::VectorXd a = theta - reference.mean;
      result.value = a.norm();
      if (result.value > 0) result.witness = a / result.value;
      return result;
    }
    case Task::kMean: {
      Eigen::LLT<Eigen::MatrixXd> llt(reference.sigma);
      if (llt.info() != Eigen::Success || !IsPositiveDefinite(reference.sigma)) {
        return absl::OutOfRangeError("domain-error: sigma is not positive definite");
      }
      const Eigen::VectorXd a = theta - reference.mean;
      result.value = llt.matrixL().solve(a).norm();
      const Eigen::VectorXd v = llt.solve(a);
      if (v.norm() > 0) result.witness = v.normalized();
      return result;
    }
    case Task::kRegression: {
      if (!IsPositiveDefinite(reference.sigma)) {
        return absl::OutOfRangeError("domain-error: sigma is not positive definite");
      }
      if (!(reference.gamma > 0.0)) {
        return absl::OutOfRangeError("domain-error: gamma must be positive");
      }
      const Eigen::VectorXd b = theta - reference.beta;
      result.value = std::sqrt(std::max(0.0, b.dot(reference.sigma * b))) /
                     reference.gamma;
      return result;
    }
    case Task::kCovariance: {
      absl::StatusOr<Eigen::MatrixXd> sigma_hat = Sharpen(theta);
      if (!sigma_hat.ok()) return sigma_hat.status();
      const int d = static_cast<int>(reference.sigma.rows());
      if (sigma_hat->rows() != d) {
        return absl::InvalidArgumentError("shape-error: dimension mismatch");
      }
      if (!IsPositiveDefinite(reference.sigma)) {
        return absl::OutOfRangeError("domain-error: sigma is not positive definite");
      }
      if (reference.psi.size() == 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reference.sigma);
        const Eigen::MatrixXd inv_sqrt = eig.operatorInverseSqrt();
        const Eigen::MatrixXd whitened =
            inv_sqrt * *sigma_hat * inv_sqrt - Eigen::MatrixXd::Identity(d, d);
        result.value = whitened.norm() / std::sqrt(2.0);
        return result;
      }
      // Restrict the operator to the symmetric subspace through an orthonormal
      // basis of it.
      const int m = d * (d + 1) / 2;
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(d * d, m);
      int k = 0;
      for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
          const double value = i == j ? 1.0 : std::sqrt(0.5);
          basis(i * d + j, k) = value;
          basis(j * d + i, k) = value;
          ++k;
        }
      }
      const Eigen::MatrixXd restricted =
          basis.transpose() * reference.psi * basis;
      Eigen::LLT<Eigen::MatrixXd> llt(restricted);
      if (llt.info() != Eigen::Success) {
        return absl::OutOfRangeError(
            "domain-error: fourth-moment operator is singular on symmetric "
            "matrices");
      }
      const Eigen::VectorXd a =
          basis.transpose() * (theta - Flatten(reference.sigma));
      result.value = llt.matrixL().solve(a).norm();
      return result;
    }
    case Task::kPca: {
      if (std::abs(theta.norm() - 1.0) > 1e-10) {
        return absl::InvalidArgumentError(
            "invalid-parameter: PCA estimate must have unit norm");
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
          RequireSymmetric(reference.sigma), Eigen::EigenvaluesOnly);
      const double top = eig.eigenvalues().maxCoeff();
      if (!(top > 0.0)) {
        return absl::OutOfRangeError("domain-error: sigma has no positive eigenvalue");
      }
      result.value = 1.0 - theta.dot(reference.sigma * theta) / top;
      return result;
    }
  }
  return absl::InvalidArgumentError("invalid-parameter: unknown task");
}

}  // namespace hptr
