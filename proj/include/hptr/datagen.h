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

#ifndef HPTR_DATAGEN_H_
#define HPTR_DATAGEN_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "hptr/dataset.h"
#include "hptr/task.h"

namespace hptr {

struct GaussianFamily {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
};

// Coordinates of a standard normal truncated to [-truncation, truncation],
// rescaled to unit variance, then mapped through the Cholesky factor of sigma.
struct SubGaussianBoundedFamily {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
  double truncation = 2.0;
};

// Multivariate Student-t scaled so that its covariance is sigma.
struct StudentTFamily {
  double dof = 8.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
};

enum class NoiseCoupling { kIndependent, kDependent };

// y = x^T beta + eta with x ~ N(0, sigma_x).
//
// Independent noise is Gaussian, or Student-t when noise_dof > 0, with
// standard deviation gamma. Dependent noise is
//   eta = gamma * s * sqrt((1 - coupling) + coupling * |x|^2 / tr(sigma_x))
// with s a fair random sign independent of x, so E[x eta] = 0 and
// E[eta^2] = gamma^2 while the noise scale tracks |x|.
struct LinearModelFamily {
  Eigen::VectorXd beta;
  Eigen::MatrixXd sigma_x;
  NoiseCoupling coupling_kind = NoiseCoupling::kIndependent;
  double gamma = 1.0;
  double noise_dof = 0.0;
  double coupling = 1.0;
};

// Heavy-tailed law with covariance sigma (Student-t, dof > 2).
struct CovBoundedFamily {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
  double dof = 3.0;
};

// Two-point lower-bound pair on the line (see HardPair below).
struct HardPairFamily {
  double alpha = 0.1;
  int k = 4;
  int side = 1;
};

using FamilySpec =
    std::variant<GaussianFamily, SubGaussianBoundedFamily, StudentTFamily,
                 LinearModelFamily, CovBoundedFamily, HardPairFamily>;

std::string_view FamilyName(const FamilySpec& spec);
int FamilyDimension(const FamilySpec& spec);
absl::Status ValidateFamily(const FamilySpec& spec);

// Population reference for the family (mean, covariance, beta, gamma).
Reference FamilyReference(const FamilySpec& spec);

// Deterministic given the seed. Rows are drawn in blocks of 1024 from child
// streams, so the result does not depend on the worker count.
absl::StatusOr<Dataset> Generate(const FamilySpec& spec, int n, uint64_t seed);

// Distribution on the real line given by finitely many (value, probability)
// atoms.
struct RealPmf {
  std::vector<std::pair<double, double>> atoms;

  double Mean() const;
};

double TotalVariation(const RealPmf& a, const RealPmf& b);

// Mass (1 - alpha)/2 on each of -1 and +1 and mass alpha on -alpha^(-1/k)
// (side 1) or +alpha^(-1/k) (side 2). Both sides have E|x|^k = 2 - alpha, are
// alpha apart in total variation, and have means 2 alpha^(1 - 1/k) apart.
absl::StatusOr<RealPmf> HardPair(double alpha, int k, int side);

}  // namespace hptr

#endif  // HPTR_DATAGEN_H_
