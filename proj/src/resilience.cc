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

#include "hptr/resilience.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "hptr/kernels.h"
#include "hptr/random.h"
#include "hptr/robust1d.h"
#include "hptr/scores.h"
#include "string_compat.h"

namespace hptr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxExhaustiveN = 14;
constexpr double kMadToSigma = 1.4826;
constexpr double kTailPlantQuantile = 0.99;

absl::Status DomainError(absl::string_view what) {
  return absl::OutOfRangeError(absl::StrCat("domain-error: ", what));
}

absl::Status Invalid(absl::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("invalid-parameter: ", what));
}

// One certified quantity: per-record values for each direction, the target
// their subset mean is compared with, and the scale of the comparison.
struct Statistic {
  int slot = 0;
  Eigen::MatrixXd values;  // n x directions
  Eigen::VectorXd target;
  Eigen::VectorXd scale;
};

absl::StatusOr<std::vector<Statistic>> BuildStatistics(
    Task task, const Dataset& data, const Reference& reference,
    const DirectionNet& net) {
  const int d = data.d();
  if (reference.sigma.rows() != d || reference.sigma.cols() != d ||
      !IsPositiveDefinite(reference.sigma)) {
    return DomainError("reference covariance is not positive definite");
  }
  const NetKind want =
      task == Task::kCovariance ? NetKind::kSymmetricMatrix : NetKind::kVector;
  if (net.kind != want || net.d != d) {
    return Invalid("net kind or dimension does not match the task");
  }
  const Eigen::MatrixXd& w = net.elements;
  const int m = net.size();
  std::vector<Statistic> stats;
  auto add = [&](int slot, Eigen::MatrixXd values, Eigen::VectorXd target,
                 Eigen::VectorXd scale) {
    stats.push_back({slot, std::move(values), std::move(target),
                     std::move(scale)});
  };
  Eigen::VectorXd sigma_v(m);
  if (task != Task::kCovariance) {
    for (int k = 0; k < m; ++k) {
      sigma_v(k) = std::sqrt(w.col(k).dot(reference.sigma * w.col(k)));
    }
  }
  switch (task) {
    case Task::kMean:
    case Task::kEuclideanMean: {
      if (reference.mean.size() != d) return Invalid("reference mean size");
      const bool unit = task == Task::kEuclideanMean;
      const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
      const Eigen::VectorXd var = sigma_v.array().square();
      const Eigen::MatrixXd centered =
          (data.rows.rowwise() - reference.mean.transpose()) * w;
      add(0, data.rows * w, w.transpose() * reference.mean,
          unit ? ones : sigma_v);
      add(1, centered.array().square(), var, unit ? ones : var);
      break;
    }
    case Task::kRegression: {
      if (!data.labeled()) return Invalid("regression data needs labels");
      if (!(reference.gamma > 0.0)) return DomainError("gamma must be positive");
      if (reference.beta.size() != d) return Invalid("reference beta size");
      const Eigen::VectorXd residual = *data.labels - data.rows * reference.beta;
      const Eigen::MatrixXd p = data.rows * w;
      const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
      const Eigen::VectorXd var = sigma_v.array().square();
      add(0, p.array().colwise() * residual.array(), zero,
          sigma_v * reference.gamma);
      add(1, p.array().square(), var, var);
      add(2, p, zero, sigma_v);
      const double g2 = reference.gamma * reference.gamma;
      add(3, residual.array().square().matrix(),
          Eigen::VectorXd::Constant(1, g2), Eigen::VectorXd::Constant(1, g2));
      break;
    }
    case Task::kCovariance: {
      const Eigen::MatrixXd psi = reference.psi.size() == 0
                                      ? IsserlisOperator(reference.sigma)
                                      : reference.psi;
      if (psi.rows() != d * d || psi.cols() != d * d) {
        return Invalid("fourth-moment operator has the wrong shape");
      }
      Eigen::VectorXd psi_v(m);
      for (int k = 0; k < m; ++k) {
        const double q = w.col(k).dot(psi * w.col(k));
        if (!(q > 0.0)) {
          return DomainError("fourth-moment operator is not positive on the net");
        }
        psi_v(k) = std::sqrt(q);
      }
      const Eigen::MatrixXd q = OuterProductFeatures(data.rows) * w;
      const Eigen::VectorXd target = w.transpose() * Flatten(reference.sigma);
      const Eigen::VectorXd var = psi_v.array().square();
      add(0, q, target, psi_v);
      add(1, (q.rowwise() - target.transpose()).array().square(), var, var);
      break;
    }
    case Task::kPca: {
      const Eigen::MatrixXd p = data.rows * w;
      const Eigen::VectorXd var = sigma_v.array().square();
      add(0, p, Eigen::VectorXd::Zero(m), sigma_v);
      add(1, p.array().square(), var, var);
      break;
    }
  }
  return stats;
}

double SubsetDeviation(const Statistic& stat, int k, double total,
                       const std::vector<int>& removed, int n) {
  double sum = total;
  for (int i : removed) sum -= stat.values(i, k);
  const double mean = sum / (n - static_cast<int>(removed.size()));
  return std::abs(mean - stat.target(k)) / stat.scale(k);
}

std::vector<std::vector<int>> AllRemovalSets(int n, int max_removed) {
  std::vector<std::vector<int>> sets;
  for (int r = 0; r <= max_removed; ++r) {
    std::vector<int> c(r);
    std::iota(c.begin(), c.end(), 0);
    while (true) {
      sets.push_back(c);
      int q = r - 1;
      while (q >= 0 && c[q] == n - r + q) --q;
      if (q < 0) break;
      ++c[q];
      for (int t = q + 1; t < r; ++t) c[t] = c[t - 1] + 1;
    }
  }
  return sets;
}

// First `count` entries of a seeded Fisher-Yates shuffle of 0..n-1.
std::vector<int> SeededSample(int n, int count, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < count; ++i) {
    const int j = i + static_cast<int>(UniformOpen(rng) * (n - i));
    std::swap(order[i], order[std::min(j, n - 1)]);
  }
  order.resize(count);
  return order;
}

std::vector<std::vector<int>> SampledRemovalSets(int n, int max_removed,
                                                 int count, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<int>> sets;
  sets.reserve(count);
  for (int s = 0; s < count; ++s) {
    const int r = std::min(
        max_removed, static_cast<int>(UniformOpen(rng) * (max_removed + 1)));
    std::vector<int> removed = SeededSample(n, r, rng);
    std::sort(removed.begin(), removed.end());
    sets.push_back(std::move(removed));
  }
  return sets;
}

struct Best {
  double value = -kInf;
  ResilienceWitness witness;
};

Best ExtremalBest(const Statistic& stat, int k, int max_removed) {
  const int n = static_cast<int>(stat.values.rows());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double va = stat.values(a, k);
    const double vb = stat.values(b, k);
    return va < vb || (va == vb && a < b);
  });
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += stat.values(i, k);
  Best best;
  double low_removed = 0.0;
  double high_removed = 0.0;
  int best_count = 0;
  bool best_low = true;
  for (int j = 0; j <= max_removed; ++j) {
    if (j > 0) {
      low_removed += stat.values(order[j - 1], k);
      high_removed += stat.values(order[n - j], k);
    }
    for (int side = 0; side < 2; ++side) {
      const double sum = total - (side == 0 ? low_removed : high_removed);
      const double value =
          std::abs(sum / (n - j) - stat.target(k)) / stat.scale(k);
      if (value > best.value) {
        best.value = value;
        best_count = j;
        best_low = side == 0;
      }
    }
  }
  best.witness.net_index = k;
  for (int j = 0; j < best_count; ++j) {
    best.witness.removed.push_back(best_low ? order[j] : order[n - 1 - j]);
  }
  std::sort(best.witness.removed.begin(), best.witness.removed.end());
  return best;
}

}  // namespace

std::string SubsetModeName(const SubsetMode& mode) {
  switch (mode.kind) {
    case SubsetModeKind::kExhaustive:
      return "exhaustive";
    case SubsetModeKind::kSampled:
      return absl::StrCat("sampled(", mode.count, ")");
    case SubsetModeKind::kExtremal:
      return "extremal";
  }
  return "unknown";
}

absl::StatusOr<SubsetMode> ParseSubsetMode(std::string_view text) {
  SubsetMode mode;
  if (text == "exhaustive") {
    mode.kind = SubsetModeKind::kExhaustive;
    return mode;
  }
  if (text == "extremal") {
    mode.kind = SubsetModeKind::kExtremal;
    return mode;
  }
  if (absl::StartsWith(AbslView(text), "sampled(") &&
      absl::EndsWith(AbslView(text), ")")) {
    std::string_view count = text.substr(8, text.size() - 9);
    if (absl::SimpleAtoi(AbslView(count), &mode.count) && mode.count > 0) {
      mode.kind = SubsetModeKind::kSampled;
      return mode;
    }
  }
  return Invalid(absl::StrCat("unknown subset mode '", AbslView(text), "'"));
}

absl::StatusOr<ResilienceCertificate> CertifyResilience(
    Task task, const Dataset& data, double alpha, const Reference& reference,
    const DirectionNet& net, const SubsetMode& mode) {
  if (!(alpha >= 0.0 && alpha < 1.0)) return Invalid("alpha not in [0, 1)");
  const int n = data.n();
  if (n < 1) return Invalid("empty dataset");
  const int max_removed = std::min(TrimCount(1.0, alpha, n), n - 1);
  absl::StatusOr<std::vector<Statistic>> stats =
      BuildStatistics(task, data, reference, net);
  if (!stats.ok()) return stats.status();

  std::vector<std::vector<int>> sets;
  switch (mode.kind) {
    case SubsetModeKind::kExhaustive:
      if (n > kMaxExhaustiveN) {
        return Invalid(absl::StrCat("exhaustive mode needs n <= ",
                                    kMaxExhaustiveN));
      }
      sets = AllRemovalSets(n, max_removed);
      break;
    case SubsetModeKind::kSampled:
      if (mode.count < 1) return Invalid("sampled mode needs count >= 1");
      sets = SampledRemovalSets(n, max_removed, mode.count, mode.seed);
      break;
    case SubsetModeKind::kExtremal:
      break;
  }

  // (statistic, direction) jobs, reduced in job order.
  std::vector<std::pair<int, int>> jobs;
  for (size_t s = 0; s < stats->size(); ++s) {
    for (int k = 0; k < (*stats)[s].values.cols(); ++k) {
      jobs.emplace_back(static_cast<int>(s), k);
    }
  }
  std::vector<Best> results(jobs.size());
  ParallelFor(
      static_cast<int64_t>(jobs.size()),
      [&](int64_t job) {
        const Statistic& stat = (*stats)[jobs[job].first];
        const int k = jobs[job].second;
        if (mode.kind == SubsetModeKind::kExtremal) {
          results[job] = ExtremalBest(stat, k, max_removed);
          return;
        }
        const double total = stat.values.col(k).sum();
        Best best;
        size_t best_set = 0;
        for (size_t s = 0; s < sets.size(); ++s) {
          const double value = SubsetDeviation(stat, k, total, sets[s], n);
          if (value > best.value) {
            best.value = value;
            best_set = s;
          }
        }
        best.witness.net_index = k;
        best.witness.removed = sets.empty() ? std::vector<int>{} : sets[best_set];
        results[job] = std::move(best);
      },
      Execution::kParallel);

  ResilienceCertificate certificate;
  certificate.task = task;
  certificate.alpha = alpha;
  certificate.reference = reference;
  certificate.net_seed = net.seed;
  certificate.net_size = net.size();
  certificate.subset_mode = mode;
  certificate.lower_bound = mode.kind == SubsetModeKind::kSampled;
  for (size_t job = 0; job < jobs.size(); ++job) {
    const int slot = (*stats)[jobs[job].first].slot;
    if (!certificate.rho[slot].has_value() ||
        results[job].value > *certificate.rho[slot]) {
      certificate.rho[slot] = results[job].value;
      certificate.witness[slot] = results[job].witness;
    }
  }
  return certificate;
}

absl::StatusOr<double> ResilienceDeviation(Task task, const Dataset& data,
                                           const Reference& reference,
                                           const DirectionNet& net,
                                           int statistic,
                                           const ResilienceWitness& witness) {
  absl::StatusOr<std::vector<Statistic>> stats =
      BuildStatistics(task, data, reference, net);
  if (!stats.ok()) return stats.status();
  for (const Statistic& stat : *stats) {
    if (stat.slot != statistic) continue;
    const int k = stat.values.cols() == 1 ? 0 : witness.net_index;
    if (k < 0 || k >= stat.values.cols()) return Invalid("net index");
    return SubsetDeviation(stat, k, stat.values.col(k).sum(), witness.removed,
                           data.n());
  }
  return Invalid("statistic not defined for this task");
}

std::string_view AdversaryName(AdversaryKind kind) {
  switch (kind) {
    case AdversaryKind::kIdentity:
      return "identity";
    case AdversaryKind::kMeanShift:
      return "mean-shift";
    case AdversaryKind::kVarianceInflate:
      return "variance-inflate";
    case AdversaryKind::kTailPlant:
      return "tail-plant";
    case AdversaryKind::kGreedyScore:
      return "greedy-score";
  }
  return "unknown";
}

absl::StatusOr<AdversaryKind> ParseAdversary(std::string_view name) {
  for (AdversaryKind kind :
       {AdversaryKind::kIdentity, AdversaryKind::kMeanShift,
        AdversaryKind::kVarianceInflate, AdversaryKind::kTailPlant,
        AdversaryKind::kGreedyScore}) {
    if (name == AdversaryName(kind)) return kind;
  }
  return Invalid(absl::StrCat("unknown adversary '", AbslView(name), "'"));
}

absl::StatusOr<Dataset> CorruptDataset(const Dataset& data,
                                       const CorruptionSpec& spec,
                                       const DatasetScore& score_fn) {
  if (!(spec.fraction >= 0.0 && spec.fraction < 0.5)) {
    return Invalid("fraction not in [0, 1/2)");
  }
  const int n = data.n();
  const int d = data.d();
  const int dim = data.labeled() ? d + 1 : d;
  Eigen::MatrixXd joint(n, dim);
  joint.leftCols(d) = data.rows;
  if (data.labeled()) joint.col(d) = *data.labels;
  const int count = TrimCount(1.0, spec.fraction, n);

  const Eigen::VectorXd center =
      spec.center.has_value() ? *spec.center
                              : Eigen::VectorXd(joint.colwise().mean());
  if (center.size() != dim) return Invalid("center has the wrong dimension");
  const bool needs_direction = spec.adversary == AdversaryKind::kMeanShift ||
                               spec.adversary == AdversaryKind::kTailPlant;
  if (needs_direction && spec.direction.size() != dim) {
    return Invalid("direction has the wrong dimension");
  }
  if (spec.adversary == AdversaryKind::kGreedyScore && !score_fn) {
    return Invalid("greedy-score adversary needs a score function");
  }

  Rng rng(spec.seed);
  auto finish = [&](const Eigen::MatrixXd& z) {
    Dataset out = data;
    out.rows = z.leftCols(d);
    if (data.labeled()) out.labels = z.col(d);
    out.provenance.corrupted = count > 0;
    out.provenance.detail =
        absl::StrCat(AbslView(AdversaryName(spec.adversary)), " fraction=", spec.fraction,
                     " seed=", spec.seed);
    return out;
  };
  auto smallest_projection = [&](const Eigen::MatrixXd& z,
                                 const Eigen::VectorXd& v,
                                 const std::vector<bool>& taken, int how_many) {
    std::vector<int> order;
    for (int i = 0; i < n; ++i) {
      if (!taken[i]) order.push_back(i);
    }
    const Eigen::VectorXd proj = z * v;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return proj(a) < proj(b); });
    order.resize(std::min<size_t>(order.size(), how_many));
    return order;
  };

  switch (spec.adversary) {
    case AdversaryKind::kIdentity:
      return finish(joint);
    case AdversaryKind::kMeanShift: {
      const Eigen::RowVectorXd point =
          (center + spec.magnitude * spec.direction).transpose();
      for (int i : SeededSample(n, count, rng)) joint.row(i) = point;
      return finish(joint);
    }
    case AdversaryKind::kVarianceInflate: {
      for (int i : SeededSample(n, count, rng)) {
        joint.row(i) = (center + spec.factor *
                                     (joint.row(i).transpose() - center))
                           .transpose();
      }
      return finish(joint);
    }
    case AdversaryKind::kTailPlant: {
      std::vector<double> proj(n);
      for (int i = 0; i < n; ++i) {
        proj[i] = (joint.row(i).transpose() - center).dot(spec.direction);
      }
      std::vector<double> sorted = proj;
      std::sort(sorted.begin(), sorted.end());
      const int rank = std::max(
          1, static_cast<int>(std::ceil(kTailPlantQuantile * n)));
      const double q = sorted[rank - 1];
      const Eigen::RowVectorXd point = (center + q * spec.direction).transpose();
      for (int i : smallest_projection(joint, spec.direction,
                                       std::vector<bool>(n, false), count)) {
        joint.row(i) = point;
      }
      return finish(joint);
    }
    case AdversaryKind::kGreedyScore: {
      if (count == 0) return finish(joint);
      absl::StatusOr<DirectionNet> pool =
          MakeDirectionNet(NetKind::kVector, dim, spec.pool_size, spec.seed);
      if (!pool.ok()) return pool.status();
      struct Candidate {
        Eigen::VectorXd direction;
        Eigen::VectorXd point;
      };
      std::vector<Candidate> candidates;
      for (int k = 0; k < pool->size(); ++k) {
        const Eigen::VectorXd v = pool->elements.col(k);
        std::vector<double> proj(n);
        for (int i = 0; i < n; ++i) {
          proj[i] = (joint.row(i).transpose() - center).dot(v);
        }
        std::vector<double> work = proj;
        std::nth_element(work.begin(), work.begin() + n / 2, work.end());
        const double median = work[n / 2];
        for (double& value : work) value = std::abs(value - median);
        std::nth_element(work.begin(), work.begin() + n / 2, work.end());
        double spread = kMadToSigma * work[n / 2];
        if (!(spread > 0.0)) spread = 1.0;
        for (double c : {1.0, 3.0, 10.0}) {
          candidates.push_back({v, center + c * spread * v});
        }
      }
      const int per_round = static_cast<int>(candidates.size());
      const int rounds =
          std::max(1, std::min(count, spec.budget / std::max(1, per_round)));
      std::vector<bool> taken(n, false);
      int placed = 0;
      for (int round = 0; round < rounds; ++round) {
        const int chunk = (count * (round + 1)) / rounds - placed;
        if (chunk <= 0) continue;
        double best_score = -kInf;
        int best_candidate = 0;
        std::vector<int> best_records;
        for (int c = 0; c < per_round; ++c) {
          std::vector<int> records =
              smallest_projection(joint, candidates[c].direction, taken, chunk);
          Eigen::MatrixXd trial = joint;
          for (int i : records) trial.row(i) = candidates[c].point.transpose();
          const double score = score_fn(finish(trial));
          if (score > best_score) {
            best_score = score;
            best_candidate = c;
            best_records = std::move(records);
          }
        }
        for (int i : best_records) {
          joint.row(i) = candidates[best_candidate].point.transpose();
          taken[i] = true;
        }
        placed += chunk;
      }
      return finish(joint);
    }
  }
  return Invalid("unknown adversary");
}

absl::StatusOr<UtilityReport> CheckUtilityAssumptions(
    const Dataset& data, const MechanismConfig& input_config,
    const Reference& reference, const UtilityConstants& constants, double rho,
    const UtilityCheckOptions& options) {
  if (absl::Status s = ValidateConfig(input_config); !s.ok()) return s;
  if (input_config.task == Task::kPca) {
    return Invalid("utility assumptions are stated for tasks with a threshold");
  }
  if (!(rho > 0.0)) return Invalid("rho must be positive");
  MechanismConfig config = input_config;
  if (config.grid.center.size() == 0) {
    absl::StatusOr<GridSpec> grid = AutoGrid(data, config);
    if (!grid.ok()) return grid.status();
    config.grid = *grid;
  }
  absl::StatusOr<Eigen::MatrixXd> points = CandidatePoints(config, data.d());
  if (!points.ok()) return points.status();
  absl::StatusOr<TaskScorer> scorer = TaskScorer::Build(data, config);
  if (!scorer.ok()) return scorer.status();
  const std::vector<double> scores =
      scorer->ScoreAll(*points, Execution::kParallel);

  UtilityReport report;
  const int k_star = config.k_star();
  report.k_star = k_star;
  const double tau = *config.tau;
  const double sens = config.sensitivity;
  const int p = ParameterDimension(config.task, data.d());
  const int64_t count = points->cols();

  // (a) bounded volume.
  const double outer = tau + (k_star + 1) * sens + constants.c1 * rho;
  const double inner = 0.875 * tau - (k_star + 1) * sens - constants.c1 * rho;
  report.volume_bound = std::exp(constants.c2 * p);
  for (int64_t g = 0; g < count; ++g) {
    if (scores[g] <= outer) ++report.outer_count;
    if (scores[g] <= inner) ++report.inner_count;
  }
  if (!(inner > 0.0)) {
    report.a = false;
    report.a_reason = "empty inner set";
  } else if (report.inner_count == 0) {
    return absl::FailedPreconditionError(
        "resolution-error: no candidate falls in the inner ball");
  } else {
    report.a = static_cast<double>(report.outer_count) / report.inner_count <=
               report.volume_bound;
    if (!report.a) report.a_reason = "volume ratio above exp(c2 p)";
  }

  Rng rng(options.seed);
  auto sample_within = [&](double radius) {
    std::vector<int64_t> inside;
    for (int64_t g = 0; g < count; ++g) {
      if (scores[g] <= radius) inside.push_back(g);
    }
    std::vector<int64_t> chosen;
    const int take =
        std::min<int64_t>(options.theta_samples, inside.size());
    for (int i : SeededSample(static_cast<int>(inside.size()), take, rng)) {
      chosen.push_back(inside[i]);
    }
    return chosen;
  };

  // (b) local sensitivity on datasets within k* of the data.
  {
    const std::vector<int64_t> thetas =
        sample_within(tau + (k_star + 3) * sens);
    const int n = data.n();
    const int d = data.d();
    Eigen::VectorXd spread(d);
    for (int j = 0; j < d; ++j) {
      std::vector<double> column(data.rows.col(j).data(),
                                 data.rows.col(j).data() + n);
      absl::StatusOr<RobustMoments> m = TrimmedMeanVar(
          column, TrimCount(kTwoSidedTailFraction, config.alpha, n));
      spread(j) = m.ok() && m->var > 0.0 ? std::sqrt(m->var) : 1.0;
    }
    const Eigen::VectorXd center = data.rows.colwise().mean();
    std::normal_distribution<double> normal;
    auto random_record = [&](Dataset& target, int i) {
      const double c = 3.0 * UniformOpen(rng);
      for (int j = 0; j < d; ++j) {
        target.rows(i, j) = center(j) + c * spread(j) * normal(rng);
      }
      if (target.labeled()) {
        (*target.labels)(i) = (*data.labels)(i) + c * normal(rng);
      }
    };
    bool ok = true;
    for (int s = 0; s < options.neighbor_datasets && ok; ++s) {
      Dataset moved = data;
      const int radius =
          static_cast<int>(UniformOpen(rng) * (std::min(k_star, n - 1) + 1));
      const std::vector<int> order = SeededSample(n, radius + 1, rng);
      for (int q = 0; q < radius; ++q) random_record(moved, order[q]);
      Dataset swapped = moved;
      random_record(swapped, order[radius]);
      absl::StatusOr<TaskScorer> a = TaskScorer::Build(moved, config);
      absl::StatusOr<TaskScorer> b = TaskScorer::Build(swapped, config);
      if (!a.ok() || !b.ok()) {
        report.max_swap_change = kInf;
        ok = false;
        break;
      }
      for (int64_t g : thetas) {
        const Eigen::VectorXd theta = points->col(g);
        const double change = std::abs((*a)(theta) - (*b)(theta));
        report.max_swap_change = std::max(report.max_swap_change, change);
      }
    }
    report.b = ok && report.max_swap_change <= sens;
  }

  // (c) bounded sensitivity, closed form.
  report.c_bound =
      (constants.c0 - 3.0 * constants.c1) * rho * config.eps /
      (32.0 * (constants.c2 * p + config.eps / 2.0 +
               std::log(16.0 / (config.delta * config.zeta))));
  report.c = sens <= report.c_bound;

  // (d) robustness against the reference.
  {
    for (int64_t g : sample_within(tau)) {
      absl::StatusOr<DistanceResult> truth = TrueDistance(
          config.task, CandidateToEstimate(config.task, points->col(g), data.d()),
          reference);
      if (!truth.ok()) return truth.status();
      report.max_robust_gap =
          std::max(report.max_robust_gap, std::abs(truth->value - scores[g]));
    }
    report.d = report.max_robust_gap <= constants.c1 * rho;
  }
  return report;
}

absl::StatusOr<RhoCalibration> CalibrateRhoConstant(
    const FamilySpec& family, Task task, double alpha, int n, int trials,
    int net_size, int statistic, double quantile, uint64_t seed) {
  if (trials < 1) return Invalid("trials must be >= 1");
  if (!(quantile > 0.0 && quantile <= 1.0)) return Invalid("quantile in (0, 1]");
  if (!(alpha > 0.0 && alpha < 0.5)) return Invalid("alpha not in (0, 1/2)");
  const double rate = statistic == 1
                          ? alpha * std::log(1.0 / alpha)
                          : alpha * std::sqrt(std::log(1.0 / alpha));
  const int d = FamilyDimension(family);
  absl::StatusOr<DirectionNet> net = MakeDirectionNet(
      task == Task::kCovariance ? NetKind::kSymmetricMatrix : NetKind::kVector,
      d, net_size, seed);
  if (!net.ok()) return net.status();
  const Reference reference = FamilyReference(family);
  RhoCalibration calibration;
  for (int t = 0; t < trials; ++t) {
    absl::StatusOr<Dataset> data = Generate(family, n, DeriveSeed(seed, t));
    if (!data.ok()) return data.status();
    absl::StatusOr<ResilienceCertificate> cert =
        CertifyResilience(task, *data, alpha, reference, *net, SubsetMode{});
    if (!cert.ok()) return cert.status();
    if (statistic < 0 || statistic > 3 || !cert->rho[statistic].has_value()) {
      return Invalid("statistic not defined for this task");
    }
    calibration.ratios.push_back(*cert->rho[statistic] / rate);
  }
  std::vector<double> sorted = calibration.ratios;
  std::sort(sorted.begin(), sorted.end());
  const int rank = std::max(
      1, static_cast<int>(std::ceil(quantile * sorted.size() - 1e-12)));
  calibration.constant = sorted[rank - 1];
  return calibration;
}

}  // namespace hptr
