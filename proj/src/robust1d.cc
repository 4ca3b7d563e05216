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

#include "hptr/robust1d.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "hptr/kernels.h"

namespace hptr {
namespace {

std::vector<int> OrderByValue(absl::Span<const double> values) {
  std::vector<int> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] < values[b]; });
  return order;
}

struct Fit {
  Eigen::VectorXd beta;
  bool rank_deficient = false;
};

Fit LeastSquares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                 const std::vector<int>& rows) {
  Eigen::MatrixXd xs(rows.size(), x.cols());
  Eigen::VectorXd ys(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    xs.row(r) = x.row(rows[r]);
    ys(r) = y(rows[r]);
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(xs);
  Fit fit;
  fit.beta = cod.solve(ys);
  fit.rank_deficient = cod.rank() < x.cols();
  return fit;
}

// Mean of the keep smallest squared residuals at beta, and the kept rows.
double TrimmedObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& beta, int keep,
                        std::vector<int>* kept) {
  const Eigen::VectorXd r = y - x * beta;
  std::vector<double> sq(r.size());
  for (int i = 0; i < r.size(); ++i) sq[i] = r(i) * r(i);
  std::vector<int> order = OrderByValue(sq);
  order.resize(keep);
  double total = 0.0;
  for (int i : order) total += sq[i];
  if (kept != nullptr) {
    std::sort(order.begin(), order.end());
    *kept = std::move(order);
  }
  return total / keep;
}

struct LocalResult {
  double value = std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta;
  bool rank_deficient = false;
};

LocalResult ConcentrationSteps(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& start, int keep) {
  LocalResult best;
  std::vector<int> kept;
  Eigen::VectorXd beta = start;
  double value = TrimmedObjective(x, y, beta, keep, &kept);
  best.value = value;
  best.beta = beta;
  for (int iter = 0; iter < 100; ++iter) {
    Fit fit = LeastSquares(x, y, kept);
    std::vector<int> next;
    const double next_value = TrimmedObjective(x, y, fit.beta, keep, &next);
    if (next_value < best.value) {
      best.value = next_value;
      best.beta = fit.beta;
    }
    if (next == kept || !(next_value < value)) break;
    kept = std::move(next);
    value = next_value;
  }
  // Rank of the design kept at the returned beta.
  TrimmedObjective(x, y, best.beta, keep, &kept);
  best.rank_deficient = LeastSquares(x, y, kept).rank_deficient;
  return best;
}

bool NextCombination(std::vector<int>& combo, int n) {
  const int k = static_cast<int>(combo.size());
  int i = k - 1;
  while (i >= 0 && combo[i] == n - k + i) --i;
  if (i < 0) return false;
  ++combo[i];
  for (int j = i + 1; j < k; ++j) combo[j] = combo[j - 1] + 1;
  return true;
}

}  // namespace

int TrimCount(double fraction, double alpha, int n) {
  const double exact = fraction * alpha * static_cast<double>(n);
  return static_cast<int>(std::floor(exact * (1.0 + 1e-12) + 1e-12));
}

absl::StatusOr<TrimPartition> PartitionTwoSided(absl::Span<const double> values,
                                                int tail_count) {
  const int n = static_cast<int>(values.size());
  if (tail_count < 0) {
    return absl::InvalidArgumentError("invalid-parameter: negative tail count");
  }
  if (n < 2 * tail_count + 1) {
    return absl::FailedPreconditionError(absl::StrCat(
        "insufficient-data: n=", n, " cannot lose ", tail_count,
        " points from each tail"));
  }
  const std::vector<int> order = OrderByValue(values);
  TrimPartition partition;
  partition.tail_count = tail_count;
  partition.bottom.assign(order.begin(), order.begin() + tail_count);
  partition.middle.assign(order.begin() + tail_count,
                          order.end() - tail_count);
  partition.top.assign(order.end() - tail_count, order.end());
  return partition;
}

absl::StatusOr<TrimPartition> PartitionTwoSided(absl::Span<const double> values,
                                                double alpha,
                                                double tail_fraction) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    return absl::InvalidArgumentError("invalid-parameter: alpha not in [0, 1/2)");
  }
  return PartitionTwoSided(
      values, TrimCount(tail_fraction, alpha, static_cast<int>(values.size())));
}

absl::StatusOr<RobustMoments> TrimmedMeanVar(absl::Span<const double> values,
                                             int tail_count) {
  absl::StatusOr<TrimPartition> partition = PartitionTwoSided(values, tail_count);
  if (!partition.ok()) return partition.status();
  RobustMoments moments;
  double total = 0.0;
  for (int i : partition->middle) total += values[i];
  const double count = static_cast<double>(partition->middle.size());
  moments.mean = total / count;
  double centered = 0.0;
  for (int i : partition->middle) {
    const double dev = values[i] - moments.mean;
    centered += dev * dev;
  }
  moments.var = centered / count;
  moments.kept = std::move(partition->middle);
  return moments;
}

absl::StatusOr<RobustMoments> TrimmedMeanVar(absl::Span<const double> values,
                                             double alpha) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    return absl::InvalidArgumentError("invalid-parameter: alpha not in [0, 1/2)");
  }
  return TrimmedMeanVar(
      values, TrimCount(kTwoSidedTailFraction, alpha,
                        static_cast<int>(values.size())));
}

absl::StatusOr<std::vector<int>> PartitionOneSidedSq(
    absl::Span<const double> sq_values, int drop_count) {
  const int n = static_cast<int>(sq_values.size());
  for (double v : sq_values) {
    if (!(v >= 0.0)) {
      return absl::InvalidArgumentError(
          "invalid-parameter: squared values must be non-negative");
    }
  }
  const int keep = n - drop_count;
  if (drop_count < 0 || keep < 1) {
    return absl::FailedPreconditionError(
        absl::StrCat("insufficient-data: keep count ", keep, " < 1"));
  }
  std::vector<int> order = OrderByValue(sq_values);
  order.resize(keep);
  return order;
}

absl::StatusOr<std::vector<int>> PartitionOneSidedSq(
    absl::Span<const double> sq_values, double alpha) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    return absl::InvalidArgumentError("invalid-parameter: alpha not in [0, 1/2)");
  }
  return PartitionOneSidedSq(
      sq_values, TrimCount(kOneSidedDropFraction, alpha,
                           static_cast<int>(sq_values.size())));
}

MiddleSums MiddleBlockSums(std::vector<double>& values, int tail_count) {
  const int n = static_cast<int>(values.size());
  auto first = values.begin() + tail_count;
  auto last = values.end() - tail_count;
  if (tail_count > 0) {
    std::nth_element(values.begin(), first, values.end());
    std::nth_element(first, last, values.end());
  }
  MiddleSums sums;
  sums.count = n - 2 * tail_count;
  for (auto it = first; it != last; ++it) {
    sums.sum += *it;
    sums.sum_sq += *it * *it;
  }
  const double mean = sums.sum / sums.count;
  for (auto it = first; it != last; ++it) {
    const double dev = *it - mean;
    sums.centered_sq += dev * dev;
  }
  return sums;
}

double SmallestSum(std::vector<double>& values, int keep) {
  if (keep < static_cast<int>(values.size())) {
    std::nth_element(values.begin(), values.begin() + keep, values.end());
  }
  double total = 0.0;
  for (int i = 0; i < keep; ++i) total += values[i];
  return total;
}

absl::StatusOr<NoiseScaleResult> RobustNoiseScale(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double alpha,
    NoiseScaleMode mode, Rng& rng, int starts) {
  if (!(alpha >= 0.0 && alpha < 0.5)) {
    return absl::InvalidArgumentError("invalid-parameter: alpha not in [0, 1/2)");
  }
  return RobustNoiseScaleWithDrop(
      x, y, TrimCount(kTwoSidedTailFraction, alpha, static_cast<int>(x.rows())),
      mode, rng, starts);
}

absl::StatusOr<NoiseScaleResult> RobustNoiseScaleWithDrop(
    const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int drop_count,
    NoiseScaleMode mode, Rng& rng, int starts) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  if (y.size() != n) {
    return absl::InvalidArgumentError("invalid-parameter: label count != n");
  }
  if (drop_count < 0 || n < d + drop_count + 1) {
    return absl::FailedPreconditionError(absl::StrCat(
        "insufficient-data: n=", n, " < d + drop + 1 = ", d + drop_count + 1));
  }
  const int keep = n - drop_count;
  NoiseScaleResult result;
  result.drop_count = drop_count;

  if (mode == NoiseScaleMode::kBruteForce) {
    if (n > 12) {
      return absl::InvalidArgumentError(
          "invalid-parameter: brute force limited to n <= 12");
    }
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> removed(drop_count);
    std::iota(removed.begin(), removed.end(), 0);
    do {
      std::vector<int> kept;
      kept.reserve(keep);
      size_t next_removed = 0;
      for (int i = 0; i < n; ++i) {
        if (next_removed < removed.size() && removed[next_removed] == i) {
          ++next_removed;
        } else {
          kept.push_back(i);
        }
      }
      Fit fit = LeastSquares(x, y, kept);
      double total = 0.0;
      for (int i : kept) {
        const double r = y(i) - x.row(i).dot(fit.beta);
        total += r * r;
      }
      const double value = total / keep;
      if (value < best) {
        best = value;
        result.beta = fit.beta;
        result.degenerate_design = fit.rank_deficient;
      }
    } while (drop_count > 0 && NextCombination(removed, n));
    result.gamma_hat = std::sqrt(std::max(best, 0.0));
    return result;
  }

  if (starts < 1) {
    return absl::InvalidArgumentError("invalid-parameter: starts must be >= 1");
  }
  const uint64_t master = rng();
  std::vector<LocalResult> locals(starts);
  ParallelFor(
      starts,
      [&](int64_t s) {
        Eigen::VectorXd start;
        if (s == 0) {
          std::vector<int> all(n);
          std::iota(all.begin(), all.end(), 0);
          start = LeastSquares(x, y, all).beta;
        } else {
          // Exact fit through a random elemental subset.
          Rng local(DeriveSeed(master, s));
          std::vector<int> rows(n);
          std::iota(rows.begin(), rows.end(), 0);
          std::shuffle(rows.begin(), rows.end(), local);
          rows.resize(std::min(n, d + 1));
          start = LeastSquares(x, y, rows).beta;
        }
        locals[s] = ConcentrationSteps(x, y, start, keep);
      },
      Execution::kParallel);
  int best = 0;
  for (int s = 1; s < starts; ++s) {
    if (locals[s].value < locals[best].value) best = s;
  }
  result.gamma_hat = std::sqrt(std::max(locals[best].value, 0.0));
  result.beta = locals[best].beta;
  result.degenerate_design = locals[best].rank_deficient;
  return result;
}

}  // namespace hptr
