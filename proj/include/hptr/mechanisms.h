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

#ifndef HPTR_MECHANISMS_H_
#define HPTR_MECHANISMS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "hptr/dataset.h"
#include "hptr/random.h"

namespace hptr {

// Outcome id reserved for the abort symbol.
inline constexpr int64_t kBottom = -1;

// Finite output law. Atoms are (outcome id, probability) pairs.
struct DiscretePMF {
  std::vector<std::pair<int64_t, double>> atoms;

  double ProbabilityOf(int64_t id) const;
};

// Checks ids are unique, probabilities are non-negative and sum to one
// within 1e-12.
absl::Status ValidatePmf(const DiscretePMF& pmf);

// Draws from the Laplace law with the given scale by inverting its CDF at one
// 64-bit uniform.
absl::StatusOr<double> SampleLaplace(double scale, Rng& rng);

// P(X <= x) for X ~ Laplace(0, scale).
double LaplaceCdf(double x, double scale);

// Smallest delta such that p(E) <= e^eps q(E) + delta for every event E.
// Both laws must have the same set of outcome ids.
absl::StatusOr<double> HockeyStickDelta(const DiscretePMF& p,
                                        const DiscretePMF& q, double eps);

struct NeighborPair {
  int left = 0;
  int right = 0;
  int hamming = 1;
};

struct DpReport {
  bool pass = false;
  double eps = 0.0;
  double delta = 0.0;
  double worst_delta = 0.0;
  // Ordered so that worst_delta = HockeyStickDelta(law[left], law[right]).
  NeighborPair worst_pair;
};

// Exact (eps, delta) check over precomputed output laws, one per dataset of
// the universe. Each pair is examined in both orders.
absl::StatusOr<DpReport> VerifyDp(const std::vector<DiscretePMF>& laws,
                                  const std::vector<NeighborPair>& pairs,
                                  double eps, double delta);

// All pairs of universe members at Hamming distance exactly one.
std::vector<NeighborPair> NeighborPairs(const std::vector<Dataset>& universe);

using PmfMechanism = std::function<absl::StatusOr<DiscretePMF>(const Dataset&)>;

absl::StatusOr<DpReport> VerifyDp(const PmfMechanism& mechanism,
                                  const std::vector<Dataset>& universe,
                                  double eps, double delta);

// Softmin law: P(i) proportional to exp(-coefficient * scores[i]). A score of
// +inf removes the candidate; NaN is rejected.
absl::StatusOr<std::vector<double>> ExpMechPmf(absl::Span<const double> scores,
                                               double coefficient);

// Index drawn from a probability vector by inverse CDF.
int SampleIndex(absl::Span<const double> pmf, Rng& rng);

absl::StatusOr<int> ExpMechSampleIndex(absl::Span<const double> scores,
                                       double coefficient, Rng& rng);

template <typename Candidate>
absl::StatusOr<Candidate> ExpMechFinite(
    const std::vector<Candidate>& candidates, absl::Span<const double> scores,
    double coefficient, Rng& rng) {
  if (candidates.size() != scores.size()) {
    return absl::InvalidArgumentError(
        "candidates and scores differ in length");
  }
  absl::StatusOr<int> index = ExpMechSampleIndex(scores, coefficient, rng);
  if (!index.ok()) return index.status();
  return candidates[*index];
}

// Threshold the noisy margin must reach in the classic test.
double ClassicPtrThreshold(double eps, double delta);

// Classic propose-test-release. Returns nullopt for the abort outcome.
absl::StatusOr<std::optional<double>> ClassicPtr(
    const std::function<double(const Dataset&)>& f, const Dataset& data,
    double sensitivity,
    const std::function<int(const Dataset&)>& margin_oracle, double eps,
    double delta, Rng& rng);

}  // namespace hptr

#endif  // HPTR_MECHANISMS_H_
