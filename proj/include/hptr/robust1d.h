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

#ifndef HPTR_ROBUST1D_H_
#define HPTR_ROBUST1D_H_

#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "hptr/random.h"

namespace hptr {

// Fraction of alpha * n cut from each side by the two-sided trim.
inline constexpr double kTwoSidedTailFraction = 2.0 / 5.5;
// Fraction of alpha * n dropped from the top by the one-sided trim.
inline constexpr double kOneSidedDropFraction = 2.0 / 3.5;

// floor(fraction * alpha * n), robust to the product landing a few ulps
// below an integer.
int TrimCount(double fraction, double alpha, int n);

// Index sets listed in ascending (value, index) order.
struct TrimPartition {
  std::vector<int> bottom;
  std::vector<int> middle;
  std::vector<int> top;
  int tail_count = 0;
};

absl::StatusOr<TrimPartition> PartitionTwoSided(absl::Span<const double> values,
                                                int tail_count);
absl::StatusOr<TrimPartition> PartitionTwoSided(
    absl::Span<const double> values, double alpha,
    double tail_fraction = kTwoSidedTailFraction);

struct RobustMoments {
  double mean = 0.0;
  // Divisor is the size of the middle block.
  double var = 0.0;
  std::vector<int> kept;
};

absl::StatusOr<RobustMoments> TrimmedMeanVar(absl::Span<const double> values,
                                             int tail_count);
absl::StatusOr<RobustMoments> TrimmedMeanVar(absl::Span<const double> values,
                                             double alpha);

// Indices of the n - drop smallest values, ascending by (value, index).
absl::StatusOr<std::vector<int>> PartitionOneSidedSq(
    absl::Span<const double> sq_values, int drop_count);
absl::StatusOr<std::vector<int>> PartitionOneSidedSq(
    absl::Span<const double> sq_values, double alpha);

// Value-level summaries used by the hot loops; they reorder `values`. The
// middle multiset does not depend on how ties are broken, so these agree with
// the index-based partitions above.
struct MiddleSums {
  double sum = 0.0;
  double sum_sq = 0.0;
  // Sum of squared deviations from the middle mean.
  double centered_sq = 0.0;
  int count = 0;
};
MiddleSums MiddleBlockSums(std::vector<double>& values, int tail_count);

// Sum of the `keep` smallest values.
double SmallestSum(std::vector<double>& values, int keep);

enum class NoiseScaleMode { kHeuristic, kBruteForce };

struct NoiseScaleResult {
  // Square root of the trimmed mean squared residual at `beta`.
  double gamma_hat = 0.0;
  Eigen::VectorXd beta;
  int drop_count = 0;
  // The kept design at the solution was rank deficient; `beta` is then the
  // minimum-norm least-squares solution.
  bool degenerate_design = false;
};

// Minimizes, over coefficient vectors, the mean of the squared residuals that
// remain after removing the drop_count = floor((2/5.5) alpha n) largest.
// Heuristic mode alternates least squares and re-trimming from `starts`
// starting points; brute force enumerates every kept set (n <= 12).
absl::StatusOr<NoiseScaleResult> RobustNoiseScale(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
    NoiseScaleMode mode, Rng& rng, int starts = 8);

// Same with an explicit drop count.
absl::StatusOr<NoiseScaleResult> RobustNoiseScaleWithDrop(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int drop_count,
    NoiseScaleMode mode, Rng& rng, int starts = 8);

}  // namespace hptr

#endif  // HPTR_ROBUST1D_H_
