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

#ifndef HPTR_KERNELS_H_
#define HPTR_KERNELS_H_

#include <cstdint>
#include <functional>
#include <vector>

#include "Eigen/Dense"

namespace hptr {

// Serial variants are the reference the parallel ones are tested against.
// Results are bitwise identical between the two: every output element is
// computed by the same sequential code, only the assignment to threads differs.
enum class Execution { kSerial, kParallel };

// Worker count: HPTR_THREADS if set to a positive integer, else the OpenMP
// default.
int WorkerCount();

// Trimmed statistics of one column of projections.
struct ProjectedMoments {
  double mean = 0.0;
  double var = 0.0;
  // Mean of squares over the same middle block.
  double second_moment = 0.0;
};

// For every column j of `directions` (p x m), the two-sided trimmed moments of
// features * directions.col(j) with `tail_count` values cut from each side.
std::vector<ProjectedMoments> ProjectedTrimmedMoments(
    const Eigen::MatrixXd& features, const Eigen::MatrixXd& directions,
    int tail_count, Execution execution);

// Applies `score` to each column of `points`. The callable must be safe to
// call concurrently.
std::vector<double> EvaluatePoints(
    const Eigen::MatrixXd& points,
    const std::function<double(const Eigen::VectorXd&)>& score,
    Execution execution);

// Runs body(i) for i in [0, count). Iterations must write disjoint outputs.
void ParallelFor(int64_t count, const std::function<void(int64_t)>& body,
                 Execution execution);

}  // namespace hptr

#endif  // HPTR_KERNELS_H_
