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

#ifndef HPTR_HPTR_H_
#define HPTR_HPTR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "Eigen/Dense"
#include "absl/status/statusor.h"
#include "hptr/dataset.h"
#include "hptr/direction_net.h"
#include "hptr/kernels.h"
#include "hptr/mechanisms.h"
#include "hptr/random.h"
#include "hptr/task.h"

namespace hptr {

// Candidate set for the release step. Euclidean tasks use an axis-aligned
// lattice of points_per_axis^p points (endpoints included) in the box
// center +- half_widths; PCA uses a sphere net of sphere_size unit vectors.
// An empty center asks the engine to derive the box from the data (AutoGrid).
struct GridSpec {
  Eigen::VectorXd center;
  Eigen::VectorXd half_widths;
  int points_per_axis = 41;
  int sphere_size = 256;
  int64_t max_points = 2'000'000;
};

struct MechanismConfig {
  Task task = Task::kMean;
  double alpha = 0.1;
  double eps = 1.0;
  double delta = 1e-6;
  double zeta = 0.05;
  // Proposed local-sensitivity bound.
  double sensitivity = 1.0;
  // Score threshold defining the release support; absent for PCA.
  std::optional<double> tau;
  GridSpec grid;
  // Direction net used inside the score.
  int net_size = 64;
  uint64_t net_seed = 0;
  uint64_t seed = 0;
  // Largest margin the oracles search for; 0 means 4 * k_star.
  int margin_cap = 0;

  int k_star() const;
  int EffectiveMarginCap() const;
};

// ceil((2 / eps) log(4 / (delta zeta))).
int KStar(double eps, double delta, double zeta);

absl::Status ValidateConfig(const MechanismConfig& config);

// ---------------------------------------------------------------------------
// Propose.

enum class FamilyClass { kSubGaussian, kHypercontractive, kCovBounded };

std::string_view FamilyClassName(FamilyClass family);
absl::StatusOr<FamilyClass> ParseFamilyClass(std::string_view name);

// Resilience level as a function of alpha. `constant` multiplies the family
// rate; `k` and `kappa` describe hypercontractive families.
struct Calibration {
  FamilyClass family = FamilyClass::kSubGaussian;
  double constant = 1.0;
  int k = 4;
  double kappa = 1.0;
  double zeta = 0.05;
};

struct Proposal {
  double sensitivity = 0.0;
  std::optional<double> tau;
  double rho = 0.0;
};

// Sensitivity and threshold from a resilience level: 110 rho / (alpha n) and
// 42 rho, or 80 rho / (alpha n) without a threshold for PCA.
absl::StatusOr<Proposal> ProposeFromRho(Task task, double rho, double alpha,
                                        int n);

// Resilience rate of the family class, then ProposeFromRho. Sub-Gaussian:
// c alpha sqrt(log(1/alpha)) (c alpha log(1/alpha) for PCA); hypercontractive:
// c k kappa alpha^(1-1/k) zeta^(-1/k); covariance-bounded: c sqrt(alpha).
absl::StatusOr<Proposal> ProposeParams(Task task, const Calibration& calibration,
                                       double alpha, int n);

// ---------------------------------------------------------------------------
// Scores on candidates.

// Net used inside the score: symmetric-matrix net for covariance, vector net
// otherwise.
absl::StatusOr<DirectionNet> ScoreNet(const MechanismConfig& config, int d);

// D_S evaluated at candidate points in parameter coordinates: R^d for mean,
// Euclidean mean, regression and PCA; the upper triangle for covariance,
// where non positive definite candidates score +inf.
class TaskScorer {
 public:
  static absl::StatusOr<TaskScorer> Build(const Dataset& data,
                                          const MechanismConfig& config,
                                          Execution execution =
                                              Execution::kParallel);

  double operator()(const Eigen::VectorXd& theta) const { return fn_(theta); }
  std::vector<double> ScoreAll(const Eigen::MatrixXd& points,
                               Execution execution) const;

  const DirectionNet& net() const { return *net_; }
  // Robust noise scale used by the regression score (1 for other tasks).
  double gamma_hat() const { return gamma_hat_; }
  const Eigen::VectorXd& gamma_beta() const { return gamma_beta_; }

 private:
  std::function<double(const Eigen::VectorXd&)> fn_;
  std::shared_ptr<const DirectionNet> net_;
  double gamma_hat_ = 1.0;
  Eigen::VectorXd gamma_beta_;
};

// Robust noise scale with its coefficient vector, solved by the heuristic
// search with starts seeded from the configuration.
absl::StatusOr<std::pair<double, Eigen::VectorXd>> ConfigNoiseScale(
    const Dataset& data, const MechanismConfig& config, int extra_drop = 0);

// Box derived from coordinate-wise trimmed statistics of the data.
absl::StatusOr<GridSpec> AutoGrid(const Dataset& data,
                                  const MechanismConfig& config);

// Candidate points as columns (p x G). For PCA the sphere net of
// grid.sphere_size unit vectors seeded by net_seed + 1.
absl::StatusOr<Eigen::MatrixXd> CandidatePoints(const MechanismConfig& config,
                                                int d);

// Estimate in the coordinates TrueDistance expects (flattened matrix for
// covariance).
Eigen::VectorXd CandidateToEstimate(Task task, const Eigen::VectorXd& point,
                                    int d);

// ---------------------------------------------------------------------------
// Release and test.

// Softmin law with coefficient eps / (4 sensitivity) over the candidates
// whose score is at most tau (all candidates for PCA). Outcome ids are column
// indices. Fails with empty-support when no candidate qualifies.
absl::StatusOr<DiscretePMF> ReleaseLawFromScores(
    const std::vector<double>& scores, const MechanismConfig& config);
absl::StatusOr<DiscretePMF> ReleaseLaw(const Dataset& data,
                                       const MechanismConfig& config,
                                       const Eigen::MatrixXd& points);

absl::StatusOr<Eigen::VectorXd> ReleaseSample(const Dataset& data,
                                              const MechanismConfig& config,
                                              Rng& rng);

// (2 / eps) log(2 / delta).
double SafetyThreshold(double eps, double delta);

struct SafetyOutcome {
  bool pass = false;
  double noisy_margin = 0.0;
};

// pass iff margin + Lap(2 / eps) >= (2 / eps) log(2 / delta).
absl::StatusOr<SafetyOutcome> SafetyTest(int margin, double eps, double delta,
                                         Rng& rng);
double PassProbability(int margin, double eps, double delta);

// Output law of the whole mechanism for a given margin: the abort atom with
// probability 1 - PassProbability, the release law otherwise. An empty
// support sends all mass to the abort atom. Outcomes are the abort atom and
// candidate ids 0 .. candidate_count - 1.
DiscretePMF ComposeOutputLaw(int margin, const MechanismConfig& config,
                             const absl::StatusOr<DiscretePMF>& release,
                             int64_t candidate_count);

// ---------------------------------------------------------------------------
// Safety margin.

enum class MarginMode { kExact, kCertified };

std::string_view MarginModeName(MarginMode mode);
absl::StatusOr<MarginMode> ParseMarginMode(std::string_view name);

struct MarginResult {
  int value = 0;
  MarginMode mode = MarginMode::kCertified;
  int cap = 0;
  // Id of the nearest unsafe dataset found (exact mode).
  std::optional<int64_t> witness;
};

// All datasets of n records drawn from a one-dimensional alphabet. Dataset
// with id k has record i equal to alphabet[(k / |A|^i) mod |A|].
class FiniteUniverse {
 public:
  static absl::StatusOr<FiniteUniverse> Create(std::vector<double> alphabet,
                                               int n);

  int64_t size() const { return size_; }
  int n() const { return n_; }
  const std::vector<double>& alphabet() const { return alphabet_; }

  Dataset Decode(int64_t id) const;
  // Fails with invalid-parameter when a record is not in the alphabet.
  absl::StatusOr<int64_t> Encode(const Dataset& data) const;
  std::vector<int64_t> Neighbors(int64_t id) const;
  std::vector<NeighborPair> AllNeighborPairs() const;

 private:
  std::vector<double> alphabet_;
  int n_ = 0;
  int64_t size_ = 0;
};

// Exact margin oracle over a finite universe. Release laws and the unsafe
// flag of each dataset are computed on first use and cached.
class ExactMarginOracle {
 public:
  // `budget` caps the number of release laws evaluated.
  static absl::StatusOr<ExactMarginOracle> Create(
      const MechanismConfig& config, FiniteUniverse universe,
      int64_t budget = 5'000'000);

  const FiniteUniverse& universe() const { return universe_; }
  const Eigen::MatrixXd& points() const { return points_; }

  // Release law of a dataset; empty support is reported as such.
  const absl::StatusOr<DiscretePMF>& Release(int64_t id);

  // Whether some neighbor's release law differs by more than
  // (eps / 2, delta / 2) in either order.
  absl::StatusOr<bool> Unsafe(int64_t id);

  // Radius of the nearest unsafe dataset, searched breadth first up to cap.
  absl::StatusOr<MarginResult> Margin(int64_t id, int cap);

  // Output law of the full mechanism at this dataset.
  absl::StatusOr<DiscretePMF> OutputLaw(int64_t id, int cap);

 private:
  MechanismConfig config_;
  FiniteUniverse universe_;
  Eigen::MatrixXd points_;
  int64_t budget_ = 0;
  int64_t evaluated_ = 0;
  std::vector<std::unique_ptr<absl::StatusOr<DiscretePMF>>> laws_;
  std::vector<int8_t> unsafe_;
};

absl::StatusOr<MarginResult> MarginExact(const Dataset& data,
                                         const MechanismConfig& config,
                                         const std::vector<double>& alphabet,
                                         int cap, int64_t budget = 5'000'000);

// Lower bound on the margin from order statistics of the projected data:
// the largest radius r such that every dataset within r - 1 of `data` is
// provably safe. Never fails; returns 0 when nothing can be certified.
MarginResult MarginCertified(const Dataset& data,
                             const MechanismConfig& config);

// ---------------------------------------------------------------------------
// Full pipeline.

struct Transcript {
  int margin = 0;
  MarginMode margin_mode = MarginMode::kCertified;
  double noisy_margin = 0.0;
  bool pass = false;
  // Released estimate in parameter coordinates, absent for the abort outcome
  // or an empty support.
  std::optional<Eigen::VectorXd> output;
  bool empty_support = false;
  // Entropy (nats) of the release law, 0 when it was not computed.
  double pmf_entropy = 0.0;
  int feasible_count = 0;
  uint64_t seed = 0;
};

// Margin, noisy test, then release. The test and the sample consume `rng`
// in that order. Exact mode needs `alphabet` (one-dimensional data).
absl::StatusOr<Transcript> Run(const Dataset& data,
                               const MechanismConfig& config, MarginMode mode,
                               Rng& rng,
                               const std::vector<double>* alphabet = nullptr);

// Exact check of the full mechanism (exact margins) over every neighbor pair
// of the universe at (eps, delta).
absl::StatusOr<DpReport> VerifyHptrOnUniverse(const MechanismConfig& config,
                                              const FiniteUniverse& universe);

// Exact check of the release step alone at (eps / 2, 0).
absl::StatusOr<DpReport> VerifyReleaseOnUniverse(
    const MechanismConfig& config, const FiniteUniverse& universe);

}  // namespace hptr

#endif  // HPTR_HPTR_H_
