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

#include "hptr/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "absl/strings/str_cat.h"
#include "hptr/kernels.h"

namespace hptr {
namespace {

std::vector<std::pair<int64_t, double>> SortedAtoms(const DiscretePMF& pmf) {
  std::vector<std::pair<int64_t, double>> atoms = pmf.atoms;
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return atoms;
}

double HockeyStickSorted(const std::vector<std::pair<int64_t, double>>& p,
                         const std::vector<std::pair<int64_t, double>>& q,
                         double eps) {
  const double scale = std::exp(eps);
  double total = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    const double bound = q[i].second == 0.0 ? 0.0 : scale * q[i].second;
    total += std::max(p[i].second - bound, 0.0);
  }
  return std::clamp(total, 0.0, 1.0);
}

bool SameOutcomes(const std::vector<std::pair<int64_t, double>>& p,
                  const std::vector<std::pair<int64_t, double>>& q) {
  if (p.size() != q.size()) return false;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i].first != q[i].first) return false;
  }
  return true;
}

}  // namespace

double DiscretePMF::ProbabilityOf(int64_t id) const {
  for (const auto& [atom, probability] : atoms) {
    if (atom == id) return probability;
  }
  return 0.0;
}

absl::Status ValidatePmf(const DiscretePMF& pmf) {
  std::set<int64_t> seen;
  double total = 0.0;
  for (const auto& [id, probability] : pmf.atoms) {
    if (!seen.insert(id).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("schema-error: duplicate outcome id ", id));
    }
    if (!(probability >= 0.0) || probability > 1.0) {
      return absl::InvalidArgumentError(
          absl::StrCat("schema-error: probability of outcome ", id,
                       " outside [0, 1]"));
    }
    total += probability;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    return absl::InvalidArgumentError(
        absl::StrCat("schema-error: probabilities sum to ", total));
  }
  return absl::OkStatus();
}

absl::StatusOr<double> SampleLaplace(double scale, Rng& rng) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    return absl::InvalidArgumentError(
        "invalid-parameter: Laplace scale must be positive and finite");
  }
  const double u = UniformOpen(rng) - 0.5;
  const double magnitude = -scale * std::log1p(-2.0 * std::abs(u));
  return u < 0.0 ? -magnitude : magnitude;
}

double LaplaceCdf(double x, double scale) {
  if (x < 0.0) return 0.5 * std::exp(x / scale);
  return 1.0 - 0.5 * std::exp(-x / scale);
}

absl::StatusOr<double> HockeyStickDelta(const DiscretePMF& p,
                                        const DiscretePMF& q, double eps) {
  if (!(eps >= 0.0)) {
    return absl::InvalidArgumentError("invalid-parameter: eps must be >= 0");
  }
  const auto sp = SortedAtoms(p);
  const auto sq = SortedAtoms(q);
  if (!SameOutcomes(sp, sq)) {
    return absl::InvalidArgumentError(
        "schema-error: laws have different outcome universes");
  }
  return HockeyStickSorted(sp, sq, eps);
}

absl::StatusOr<DpReport> VerifyDp(const std::vector<DiscretePMF>& laws,
                                  const std::vector<NeighborPair>& pairs,
                                  double eps, double delta) {
  if (laws.empty()) {
    return absl::InvalidArgumentError("invalid-parameter: empty universe");
  }
  if (!(eps >= 0.0) || !(delta >= 0.0)) {
    return absl::InvalidArgumentError(
        "invalid-parameter: eps and delta must be >= 0");
  }
  std::vector<std::vector<std::pair<int64_t, double>>> sorted(laws.size());
  for (size_t i = 0; i < laws.size(); ++i) sorted[i] = SortedAtoms(laws[i]);
  for (const NeighborPair& pair : pairs) {
    if (pair.left < 0 || pair.right < 0 ||
        pair.left >= static_cast<int>(laws.size()) ||
        pair.right >= static_cast<int>(laws.size())) {
      return absl::InvalidArgumentError("invalid-parameter: pair out of range");
    }
    if (!SameOutcomes(sorted[pair.left], sorted[pair.right])) {
      return absl::InvalidArgumentError(absl::StrCat(
          "schema-error: laws of datasets ", pair.left, " and ", pair.right,
          " have different outcome universes"));
    }
  }

  std::vector<double> forward(pairs.size());
  std::vector<double> backward(pairs.size());
  ParallelFor(
      static_cast<int64_t>(pairs.size()),
      [&](int64_t i) {
        const NeighborPair& pair = pairs[i];
        forward[i] = HockeyStickSorted(sorted[pair.left], sorted[pair.right], eps);
        backward[i] =
            HockeyStickSorted(sorted[pair.right], sorted[pair.left], eps);
      },
      Execution::kParallel);

  DpReport report;
  report.eps = eps;
  report.delta = delta;
  report.worst_delta = 0.0;
  bool have_pair = false;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (!have_pair || forward[i] > report.worst_delta) {
      report.worst_delta = forward[i];
      report.worst_pair = pairs[i];
      have_pair = true;
    }
    if (backward[i] > report.worst_delta) {
      report.worst_delta = backward[i];
      report.worst_pair = {pairs[i].right, pairs[i].left, pairs[i].hamming};
    }
  }
  report.pass = report.worst_delta <= delta;
  return report;
}

std::vector<NeighborPair> NeighborPairs(const std::vector<Dataset>& universe) {
  std::vector<NeighborPair> pairs;
  for (size_t i = 0; i < universe.size(); ++i) {
    for (size_t j = i + 1; j < universe.size(); ++j) {
      if (universe[i].n() != universe[j].n() ||
          universe[i].d() != universe[j].d() ||
          universe[i].labeled() != universe[j].labeled()) {
        continue;
      }
      if (HammingDistance(universe[i], universe[j]) == 1) {
        pairs.push_back({static_cast<int>(i), static_cast<int>(j), 1});
      }
    }
  }
  return pairs;
}

absl::StatusOr<DpReport> VerifyDp(const PmfMechanism& mechanism,
                                  const std::vector<Dataset>& universe,
                                  double eps, double delta) {
  if (universe.empty()) {
    return absl::InvalidArgumentError("invalid-parameter: empty universe");
  }
  std::vector<DiscretePMF> laws;
  laws.reserve(universe.size());
  for (const Dataset& data : universe) {
    absl::StatusOr<DiscretePMF> law = mechanism(data);
    if (!law.ok()) return law.status();
    laws.push_back(*std::move(law));
  }
  return VerifyDp(laws, NeighborPairs(universe), eps, delta);
}

absl::StatusOr<std::vector<double>> ExpMechPmf(absl::Span<const double> scores,
                                               double coefficient) {
  if (scores.empty()) {
    return absl::InvalidArgumentError("invalid-parameter: no candidates");
  }
  if (!(coefficient >= 0.0) || !std::isfinite(coefficient)) {
    return absl::InvalidArgumentError(
        "invalid-parameter: coefficient must be finite and >= 0");
  }
  double best = std::numeric_limits<double>::infinity();
  for (double s : scores) {
    if (std::isnan(s) || s == -std::numeric_limits<double>::infinity()) {
      return absl::InvalidArgumentError("invalid-score: NaN or -inf score");
    }
    best = std::min(best, s);
  }
  if (!std::isfinite(best)) {
    return absl::InvalidArgumentError(
        "invalid-parameter: every candidate is excluded");
  }
  std::vector<double> pmf(scores.size(), 0.0);
  double total = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) continue;
    pmf[i] = std::exp(-coefficient * (scores[i] - best));
    total += pmf[i];
  }
  for (double& p : pmf) p /= total;
  return pmf;
}

int SampleIndex(absl::Span<const double> pmf, Rng& rng) {
  const double u = UniformOpen(rng);
  double cumulative = 0.0;
  int last_positive = 0;
  for (size_t i = 0; i < pmf.size(); ++i) {
    if (pmf[i] <= 0.0) continue;
    last_positive = static_cast<int>(i);
    cumulative += pmf[i];
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

absl::StatusOr<int> ExpMechSampleIndex(absl::Span<const double> scores,
                                       double coefficient, Rng& rng) {
  absl::StatusOr<std::vector<double>> pmf = ExpMechPmf(scores, coefficient);
  if (!pmf.ok()) return pmf.status();
  return SampleIndex(*pmf, rng);
}

double ClassicPtrThreshold(double eps, double delta) {
  return (2.0 / eps) * std::log(1.0 / delta);
}

absl::StatusOr<std::optional<double>> ClassicPtr(
    const std::function<double(const Dataset&)>& f, const Dataset& data,
    double sensitivity,
    const std::function<int(const Dataset&)>& margin_oracle, double eps,
    double delta, Rng& rng) {
  if (!(sensitivity > 0.0)) {
    return absl::InvalidArgumentError(
        "invalid-parameter: sensitivity must be positive");
  }
  if (!(eps > 0.0) || !(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        "invalid-parameter: need eps > 0 and delta in (0, 1)");
  }
  const int margin = margin_oracle(data);
  if (margin < 0) {
    return absl::InvalidArgumentError("invalid-parameter: negative margin");
  }
  absl::StatusOr<double> test_noise = SampleLaplace(2.0 / eps, rng);
  if (!test_noise.ok()) return test_noise.status();
  if (margin + *test_noise < ClassicPtrThreshold(eps, delta)) {
    return std::optional<double>();
  }
  absl::StatusOr<double> noise = SampleLaplace(2.0 * sensitivity / eps, rng);
  if (!noise.ok()) return noise.status();
  return std::optional<double>(f(data) + *noise);
}

}  // namespace hptr
