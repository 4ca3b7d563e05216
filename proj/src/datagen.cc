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
#include <map>
#include <random>

#include "absl/strings/str_cat.h"
#include "hptr/kernels.h"
#include "hptr/random.h"
#include "hptr/scores.h"

namespace hptr {
namespace {

constexpr int kBlockRows = 1024;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

absl::Status CheckMeanSigma(const Eigen::VectorXd& mean,
                            const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    return absl::InvalidArgumentError("domain-error: sigma must be square");
  }
  if (mean.size() != sigma.rows()) {
    return absl::InvalidArgumentError("domain-error: mean/sigma size mismatch");
  }
  if (sigma != sigma.transpose() || !IsPositiveDefinite(sigma)) {
    return absl::InvalidArgumentError(
        "domain-error: sigma must be symmetric positive definite");
  }
  return absl::OkStatus();
}

double StandardNormalCdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Variance of a standard normal truncated to [-c, c].
double TruncatedVariance(double c) {
  const double pdf = std::exp(-0.5 * c * c) / std::sqrt(2.0 * M_PI);
  const double mass = 2.0 * StandardNormalCdf(c) - 1.0;
  return 1.0 - 2.0 * c * pdf / mass;
}

// Fills rows [begin, end) of `out` with one row per call of `draw`.
template <typename Draw>
void FillBlocks(Eigen::MatrixXd& out, uint64_t seed, const Draw& draw) {
  const int n = static_cast<int>(out.rows());
  const int blocks = (n + kBlockRows - 1) / kBlockRows;
  ParallelFor(
      blocks,
      [&](int64_t b) {
        Rng rng(DeriveSeed(seed, static_cast<uint64_t>(b)));
        const int begin = static_cast<int>(b) * kBlockRows;
        const int end = std::min(n, begin + kBlockRows);
        for (int i = begin; i < end; ++i) draw(rng, out.row(i));
      },
      Execution::kParallel);
}

Eigen::MatrixXd CholeskyFactor(const Eigen::MatrixXd& sigma) {
  return Eigen::LLT<Eigen::MatrixXd>(sigma).matrixL();
}

}  // namespace

int HammingDistance(const Dataset& a, const Dataset& b) {
  int distance = 0;
  for (int i = 0; i < a.n(); ++i) {
    bool same = a.rows.row(i) == b.rows.row(i);
    if (same && a.labeled() && b.labeled()) {
      same = (*a.labels)(i) == (*b.labels)(i);
    }
    if (!same) ++distance;
  }
  return distance;
}

std::string_view FamilyName(const FamilySpec& spec) {
  return std::visit(
      Overloaded{
          [](const GaussianFamily&) { return std::string_view("gaussian"); },
          [](const SubGaussianBoundedFamily&) {
            return std::string_view("subgaussian-bounded");
          },
          [](const StudentTFamily&) { return std::string_view("student-t"); },
          [](const LinearModelFamily&) {
            return std::string_view("linear-model");
          },
          [](const CovBoundedFamily&) {
            return std::string_view("cov-bounded");
          },
          [](const HardPairFamily&) { return std::string_view("hard-pair"); },
      },
      spec);
}

int FamilyDimension(const FamilySpec& spec) {
  return std::visit(
      Overloaded{
          [](const LinearModelFamily& f) {
            return static_cast<int>(f.beta.size());
          },
          [](const HardPairFamily&) { return 1; },
          [](const auto& f) { return static_cast<int>(f.sigma.rows()); },
      },
      spec);
}

absl::Status ValidateFamily(const FamilySpec& spec) {
  return std::visit(
      Overloaded{
          [](const GaussianFamily& f) { return CheckMeanSigma(f.mean, f.sigma); },
          [](const SubGaussianBoundedFamily& f) -> absl::Status {
            if (!(f.truncation > 0.0)) {
              return absl::InvalidArgumentError(
                  "domain-error: truncation must be positive");
            }
            return CheckMeanSigma(f.mean, f.sigma);
          },
          [](const StudentTFamily& f) -> absl::Status {
            if (!(f.dof > 2.0)) {
              return absl::InvalidArgumentError(
                  "domain-error: Student-t needs dof > 2 for a covariance");
            }
            return CheckMeanSigma(f.mean, f.sigma);
          },
          [](const LinearModelFamily& f) -> absl::Status {
            if (absl::Status s = CheckMeanSigma(f.beta, f.sigma_x); !s.ok()) {
              return s;
            }
            if (!(f.gamma >= 0.0)) {
              return absl::InvalidArgumentError(
                  "domain-error: gamma must be non-negative");
            }
            if (f.noise_dof != 0.0 && !(f.noise_dof > 2.0)) {
              return absl::InvalidArgumentError(
                  "domain-error: noise dof must be 0 (Gaussian) or > 2");
            }
            if (!(f.coupling >= 0.0 && f.coupling <= 1.0)) {
              return absl::InvalidArgumentError(
                  "domain-error: coupling must lie in [0, 1]");
            }
            return absl::OkStatus();
          },
          [](const CovBoundedFamily& f) -> absl::Status {
            if (!(f.dof > 2.0)) {
              return absl::InvalidArgumentError(
                  "domain-error: covariance-bounded family needs dof > 2");
            }
            if (absl::Status s = CheckMeanSigma(f.mean, f.sigma); !s.ok()) {
              return s;
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
                f.sigma, Eigen::EigenvaluesOnly);
            if (eig.eigenvalues().maxCoeff() > 1.0 + 1e-12) {
              return absl::InvalidArgumentError(
                  "domain-error: covariance-bounded family needs |sigma| <= 1");
            }
            return absl::OkStatus();
          },
          [](const HardPairFamily& f) -> absl::Status {
            return HardPair(f.alpha, f.k, f.side).status();
          },
      },
      spec);
}

Reference FamilyReference(const FamilySpec& spec) {
  Reference ref;
  std::visit(Overloaded{
                 [&](const LinearModelFamily& f) {
                   ref.mean = Eigen::VectorXd::Zero(f.beta.size());
                   ref.sigma = f.sigma_x;
                   ref.beta = f.beta;
                   ref.gamma = f.gamma;
                 },
                 [&](const HardPairFamily& f) {
                   const RealPmf pmf = *HardPair(f.alpha, f.k, f.side);
                   ref.mean = Eigen::VectorXd::Constant(1, pmf.Mean());
                   double second = 0.0;
                   for (const auto& [x, p] : pmf.atoms) second += p * x * x;
                   ref.sigma = Eigen::MatrixXd::Constant(
                       1, 1, second - pmf.Mean() * pmf.Mean());
                 },
                 [&](const auto& f) {
                   ref.mean = f.mean;
                   ref.sigma = f.sigma;
                 },
             },
             spec);
  return ref;
}

absl::StatusOr<Dataset> Generate(const FamilySpec& spec, int n, uint64_t seed) {
  if (n < 1) return absl::InvalidArgumentError("domain-error: n must be >= 1");
  if (absl::Status s = ValidateFamily(spec); !s.ok()) return s;
  Dataset data;
  data.seed = seed;
  const int d = FamilyDimension(spec);
  data.rows.resize(n, d);

  std::visit(
      Overloaded{
          [&](const GaussianFamily& f) {
            const Eigen::MatrixXd l = CholeskyFactor(f.sigma);
            FillBlocks(data.rows, seed, [&](Rng& rng, auto row) {
              std::normal_distribution<double> normal;
              Eigen::VectorXd z(d);
              for (int j = 0; j < d; ++j) z(j) = normal(rng);
              row = (f.mean + l * z).transpose();
            });
          },
          [&](const SubGaussianBoundedFamily& f) {
            const Eigen::MatrixXd l = CholeskyFactor(f.sigma);
            const double scale = 1.0 / std::sqrt(TruncatedVariance(f.truncation));
            FillBlocks(data.rows, seed, [&](Rng& rng, auto row) {
              std::normal_distribution<double> normal;
              Eigen::VectorXd z(d);
              for (int j = 0; j < d; ++j) {
                double g;
                do {
                  g = normal(rng);
                } while (std::abs(g) > f.truncation);
                z(j) = g * scale;
              }
              row = (f.mean + l * z).transpose();
            });
          },
          [&](const StudentTFamily& f) {
            const Eigen::MatrixXd l = CholeskyFactor(f.sigma);
            const double scale = std::sqrt((f.dof - 2.0) / f.dof);
            FillBlocks(data.rows, seed, [&](Rng& rng, auto row) {
              std::normal_distribution<double> normal;
              std::chi_squared_distribution<double> chi(f.dof);
              Eigen::VectorXd z(d);
              for (int j = 0; j < d; ++j) z(j) = normal(rng);
              const double w = std::sqrt(chi(rng) / f.dof);
              row = (f.mean + l * z * (scale / w)).transpose();
            });
          },
          [&](const CovBoundedFamily& f) {
            const Eigen::MatrixXd l = CholeskyFactor(f.sigma);
            const double scale = std::sqrt((f.dof - 2.0) / f.dof);
            FillBlocks(data.rows, seed, [&](Rng& rng, auto row) {
              std::normal_distribution<double> normal;
              std::chi_squared_distribution<double> chi(f.dof);
              Eigen::VectorXd z(d);
              for (int j = 0; j < d; ++j) z(j) = normal(rng);
              const double w = std::sqrt(chi(rng) / f.dof);
              row = (f.mean + l * z * (scale / w)).transpose();
            });
          },
          [&](const LinearModelFamily& f) {
            const Eigen::MatrixXd l = CholeskyFactor(f.sigma_x);
            const double trace = f.sigma_x.trace();
            // Column d holds eta while generating.
            Eigen::MatrixXd joint(n, d + 1);
            FillBlocks(joint, seed, [&](Rng& rng, auto row) {
              std::normal_distribution<double> normal;
              Eigen::VectorXd z(d);
              for (int j = 0; j < d; ++j) z(j) = normal(rng);
              const Eigen::VectorXd x = l * z;
              double eta;
              if (f.coupling_kind == NoiseCoupling::kIndependent) {
                if (f.noise_dof > 0.0) {
                  std::chi_squared_distribution<double> chi(f.noise_dof);
                  const double t = normal(rng) /
                                   std::sqrt(chi(rng) / f.noise_dof);
                  eta = f.gamma * t *
                        std::sqrt((f.noise_dof - 2.0) / f.noise_dof);
                } else {
                  eta = f.gamma * normal(rng);
                }
              } else {
                const double sign = (rng() >> 63) ? 1.0 : -1.0;
                eta = f.gamma * sign *
                      std::sqrt((1.0 - f.coupling) +
                                f.coupling * x.squaredNorm() / trace);
              }
              row.head(d) = x.transpose();
              row(d) = eta;
            });
            data.rows = joint.leftCols(d);
            data.labels = data.rows * f.beta + joint.col(d);
          },
          [&](const HardPairFamily& f) {
            const RealPmf pmf = *HardPair(f.alpha, f.k, f.side);
            std::vector<double> probabilities;
            for (const auto& atom : pmf.atoms) {
              probabilities.push_back(atom.second);
            }
            FillBlocks(data.rows, seed, [&](Rng& rng, auto row) {
              std::discrete_distribution<int> pick(probabilities.begin(),
                                                   probabilities.end());
              row(0) = pmf.atoms[pick(rng)].first;
            });
          },
      },
      spec);
  return data;
}

double RealPmf::Mean() const {
  double mean = 0.0;
  for (const auto& [x, p] : atoms) mean += p * x;
  return mean;
}

double TotalVariation(const RealPmf& a, const RealPmf& b) {
  std::map<double, double> diff;
  for (const auto& [x, p] : a.atoms) diff[x] += p;
  for (const auto& [x, p] : b.atoms) diff[x] -= p;
  double total = 0.0;
  for (const auto& [x, delta] : diff) total += std::max(delta, 0.0);
  return total;
}

absl::StatusOr<RealPmf> HardPair(double alpha, int k, int side) {
  if (!(alpha > 0.0 && alpha < 0.5)) {
    return absl::InvalidArgumentError("invalid-parameter: alpha not in (0, 1/2)");
  }
  if (k < 3) return absl::InvalidArgumentError("invalid-parameter: k must be >= 3");
  if (side != 1 && side != 2) {
    return absl::InvalidArgumentError("invalid-parameter: side must be 1 or 2");
  }
  const double far = std::pow(alpha, -1.0 / k);
  RealPmf pmf;
  pmf.atoms = {{-1.0, 0.5 * (1.0 - alpha)},
               {1.0, 0.5 * (1.0 - alpha)},
               {side == 1 ? -far : far, alpha}};
  return pmf;
}

}  // namespace hptr
