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

#ifndef HPTR_RESILIENCE_H_
#define HPTR_RESILIENCE_H_

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "hptr/dataset.h"
#include "hptr/datagen.h"
#include "hptr/direction_net.h"
#include "hptr/hptr.h"
#include "hptr/task.h"

namespace hptr {

// How the subsets T (complements of at most floor(alpha n) removed records)
// are visited.
//   exhaustive: every removal set; n <= 14.
//   sampled:    `count` seeded removal sets, size uniform in [0, floor(alpha n)];
//               a lower bound on the exhaustive value.
//   extremal:   per direction and statistic, removal of the j smallest or j
//               largest per-record values for every j; equals the exhaustive
//               value at any n because the extreme mean of a sub-multiset of
//               fixed size is attained at a sorted end.
enum class SubsetModeKind { kExhaustive, kSampled, kExtremal };

struct SubsetMode {
  SubsetModeKind kind = SubsetModeKind::kExtremal;
  int count = 0;
  uint64_t seed = 0;
};

std::string SubsetModeName(const SubsetMode& mode);
absl::StatusOr<SubsetMode> ParseSubsetMode(std::string_view text);

// Enumerated pair attaining a certified value.
struct ResilienceWitness {
  std::vector<int> removed;
  int net_index = 0;
};

// Statistics per task (v ranges over the net, T over the admissible subsets,
// sigma_v^2 = v' Sigma v, psi_V^2 = V' Psi V on flattened matrices):
//   mean:  rho1 = |<v, mean_T x> - <v, mu>| / sigma_v,
//          rho2 = |mean_T <v, x - mu>^2 / sigma_v^2 - 1|.
//   euclidean-mean: the mean statistics without the division by sigma_v.
//   lr:    rho1 = |mean_T <v, x> (y - x'beta)| / (sigma_v gamma),
//          rho2 = |mean_T <v, x>^2 / sigma_v^2 - 1|,
//          rho3 = |mean_T <v, x>| / sigma_v,
//          rho4 = |mean_T (y - x'beta)^2 / gamma^2 - 1|.
//   cov:   rho1 = |<V, mean_T x x'> - <V, Sigma>| / psi_V,
//          rho2 = |mean_T <V, x x' - Sigma>^2 / psi_V^2 - 1|.
//   pca:   rho1 = |mean_T <v, x>| / sigma_v,
//          rho2 = |mean_T <v, x>^2 / sigma_v^2 - 1|.
struct ResilienceCertificate {
  Task task = Task::kMean;
  double alpha = 0.0;
  // rho[0..3]; slots the task does not define are empty.
  std::array<std::optional<double>, 4> rho;
  std::array<ResilienceWitness, 4> witness;
  Reference reference;
  uint64_t net_seed = 0;
  int net_size = 0;
  SubsetMode subset_mode;
  // True for sampled certificates.
  bool lower_bound = false;
};

absl::StatusOr<ResilienceCertificate> CertifyResilience(
    Task task, const Dataset& data, double alpha, const Reference& reference,
    const DirectionNet& net, const SubsetMode& mode);

// Deviation of one statistic for one removal set and net element, in the
// units of the certificate. Used for witness replay.
absl::StatusOr<double> ResilienceDeviation(Task task, const Dataset& data,
                                           const Reference& reference,
                                           const DirectionNet& net,
                                           int statistic,
                                           const ResilienceWitness& witness);

// ---------------------------------------------------------------------------
// Corruption.

enum class AdversaryKind {
  kIdentity,
  kMeanShift,
  kVarianceInflate,
  kTailPlant,
  kGreedyScore,
};

std::string_view AdversaryName(AdversaryKind kind);
absl::StatusOr<AdversaryKind> ParseAdversary(std::string_view name);

// Records are points of R^d, or of R^(d+1) with the label last when the data
// is labeled; `direction` and `center` live in that space.
//   identity:         chosen records are left as they are.
//   mean-shift:       chosen records become center + magnitude * direction.
//   variance-inflate: chosen records x become center + factor * (x - center).
//   tail-plant:       the records with the smallest projection on `direction`
//                     become center + q direction, q the 0.99 quantile of the
//                     centered projections.
//   greedy-score:     the corruption is placed in chunks; each chunk goes to
//                     the candidate center +- C s_v v (C in {1, 3, 10}, v over
//                     a pool net, s_v the scaled MAD of the projections) that
//                     most increases score_fn, replacing the records with
//                     the smallest projection on v. `budget` caps score_fn
//                     calls.
// Records are chosen by a seeded permutation except for tail-plant and
// greedy-score. The center defaults to the coordinate-wise sample mean.
struct CorruptionSpec {
  double fraction = 0.0;
  AdversaryKind adversary = AdversaryKind::kIdentity;
  Eigen::VectorXd direction;
  double magnitude = 10.0;
  double factor = 3.0;
  int budget = 200;
  int pool_size = 16;
  std::optional<Eigen::VectorXd> center;
  uint64_t seed = 0;
};

using DatasetScore = std::function<double(const Dataset&)>;

// Replaces exactly floor(fraction n) records (fewer only when a replacement
// coincides with the original record).
absl::StatusOr<Dataset> CorruptDataset(const Dataset& data,
                                       const CorruptionSpec& spec,
                                       const DatasetScore& score_fn = nullptr);

// ---------------------------------------------------------------------------
// Runtime check of the utility-theorem assumptions.

struct UtilityConstants {
  double c0 = 31.8;
  double c1 = 10.2;
  // log(67 / 12) + log((c0 + 2 c1) / c1).
  double c2 = 3.3525;
};

struct UtilityCheckOptions {
  // Datasets S' drawn within Hamming distance k* of S for (b).
  int neighbor_datasets = 8;
  // Candidates sampled per check for (b) and (d).
  int theta_samples = 64;
  uint64_t seed = 0;
};

struct UtilityReport {
  bool a = false;
  bool b = false;
  bool c = false;
  bool d = false;
  // (a): candidate counts of the outer and inner score balls and their
  // bound exp(c2 p).
  int64_t outer_count = 0;
  int64_t inner_count = 0;
  double volume_bound = 0.0;
  std::string a_reason;
  // (b): largest one-swap score change seen, against the sensitivity.
  double max_swap_change = 0.0;
  // (c): right-hand side of the sensitivity inequality.
  double c_bound = 0.0;
  // (d): largest |true distance - score| seen, against c1 rho.
  double max_robust_gap = 0.0;
  int k_star = 0;
};

// (a), (b) and (d) are Monte Carlo checks over the configured candidate grid;
// (c) is the closed-form inequality. Supports the mean, Euclidean mean,
// regression and covariance tasks.
absl::StatusOr<UtilityReport> CheckUtilityAssumptions(
    const Dataset& data, const MechanismConfig& config,
    const Reference& reference, const UtilityConstants& constants, double rho,
    const UtilityCheckOptions& options = {});

// ---------------------------------------------------------------------------
// Calibration.

struct RhoCalibration {
  // Ratio of the certified rho to the family rate at `quantile`.
  double constant = 0.0;
  std::vector<double> ratios;
};

// Certifies `trials` clean samples of the family (extremal mode, net of
// `net_size`, population reference) and divides statistic `statistic`
// (0-based) by the sub-Gaussian rate alpha sqrt(log(1/alpha)) (alpha
// log(1/alpha) for the second statistic).
absl::StatusOr<RhoCalibration> CalibrateRhoConstant(
    const FamilySpec& family, Task task, double alpha, int n, int trials,
    int net_size, int statistic, double quantile, uint64_t seed);

}  // namespace hptr

#endif  // HPTR_RESILIENCE_H_
