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

#ifndef HPTR_TASK_H_
#define HPTR_TASK_H_

#include <optional>
#include <string>
#include <string_view>

#include "Eigen/Dense"
#include "absl/status/statusor.h"

namespace hptr {

enum class Task { kMean, kEuclideanMean, kRegression, kCovariance, kPca };

std::string_view TaskName(Task task);
absl::StatusOr<Task> ParseTask(std::string_view name);

// Dimension of the released parameter for data of dimension d. Covariance
// candidates are parameterized by their upper triangle.
int ParameterDimension(Task task, int d);

// Population quantities an estimate is judged against. Only the fields the
// task needs are read.
struct Reference {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd beta;
  double gamma = 1.0;
  // Fourth-moment operator on flattened matrices (d^2 x d^2). When empty the
  // Gaussian form is derived from sigma.
  Eigen::MatrixXd psi;
};

}  // namespace hptr

#endif  // HPTR_TASK_H_
