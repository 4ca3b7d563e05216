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

#include "hptr/kernels.h"

#include <omp.h>

#include <algorithm>
#include <cstdlib>
#include <string>

#include "hptr/robust1d.h"

namespace hptr {
namespace {

ProjectedMoments ColumnMoments(const Eigen::MatrixXd& features,
                               const Eigen::VectorXd& direction,
                               int tail_count, std::vector<double>& scratch) {
  const Eigen::VectorXd z = features * direction;
  scratch.assign(z.data(), z.data() + z.size());
  const MiddleSums sums = MiddleBlockSums(scratch, tail_count);
  ProjectedMoments out;
  out.mean = sums.sum / sums.count;
  out.second_moment = sums.sum_sq / sums.count;
  out.var = std::max(0.0, sums.centered_sq / sums.count);
  return out;
}

}  // namespace

int WorkerCount() {
  if (const char* env = std::getenv("HPTR_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && value > 0) {
      return static_cast<int>(std::min<long>(value, omp_get_max_threads()));
    }
  }
  return omp_get_max_threads();
}

std::vector<ProjectedMoments> ProjectedTrimmedMoments(
    const Eigen::MatrixXd& features, const Eigen::MatrixXd& directions,
    int tail_count, Execution execution) {
  const int m = static_cast<int>(directions.cols());
  std::vector<ProjectedMoments> out(m);
  if (execution == Execution::kSerial) {
    std::vector<double> scratch;
    for (int j = 0; j < m; ++j) {
      out[j] = ColumnMoments(features, directions.col(j), tail_count, scratch);
    }
    return out;
  }
#pragma omp parallel num_threads(WorkerCount())
  {
    std::vector<double> scratch;
#pragma omp for schedule(static)
    for (int j = 0; j < m; ++j) {
      out[j] = ColumnMoments(features, directions.col(j), tail_count, scratch);
    }
  }
  return out;
}

std::vector<double> EvaluatePoints(
    const Eigen::MatrixXd& points,
    const std::function<double(const Eigen::VectorXd&)>& score,
    Execution execution) {
  const int64_t count = points.cols();
  std::vector<double> out(count);
  ParallelFor(
      count, [&](int64_t i) { out[i] = score(points.col(i)); }, execution);
  return out;
}

void ParallelFor(int64_t count, const std::function<void(int64_t)>& body,
                 Execution execution) {
  if (execution == Execution::kSerial || count < 2) {
    for (int64_t i = 0; i < count; ++i) body(i);
    return;
  }
#pragma omp parallel for schedule(dynamic, 16) num_threads(WorkerCount())
  for (int64_t i = 0; i < count; ++i) body(i);
}

}  // namespace hptr
