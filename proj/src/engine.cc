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

#include <algorithm>
#include <cmath>
#include <limits>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "hptr/hptr.h"
#include "hptr/robust1d.h"
#include "hptr/scores.h"
#include "string_compat.h"

namespace hptr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGridHalfWidthInScales = 8.0;
constexpr uint64_t kNoiseScaleStream = 0x6a;
constexpr uint64_t kSphereSeedOffset = 1;

absl::Status Invalid(absl::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("invalid-parameter: ", what));
}

bool IsDegenerate(const absl::Status& status) {
  return status.code() == absl::StatusCode::kFailedPrecondition &&
         absl::StartsWith(status.message(), "degenerate");
}

double Entropy(const std::vector<double>& pmf) {
  double h = 0.0;
  for (double p : pmf) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace

int KStar(double eps, double delta, double zeta) {
  return static_cast<int>(
      std::ceil((2.0 / eps) * std::log(4.0 / (delta * zeta)) - 1e-12));
}

int MechanismConfig::k_star() const { return KStar(eps, delta, zeta); }

int MechanismConfig::EffectiveMarginCap() const {
  return margin_cap > 0 ? margin_cap : 4 * k_star();
}

absl::Status ValidateConfig(const MechanismConfig& config) {
  if (!(config.eps > 0.0)) return Invalid("eps must be positive");
  if (!(config.delta > 0.0 && config.delta < 1.0)) {
    return Invalid("delta must lie in (0, 1)");
  }
  if (!(config.zeta > 0.0 && config.zeta < 1.0)) {
    return Invalid("zeta must lie in (0, 1)");
  }
  if (!(config.sensitivity > 0.0)) return Invalid("sensitivity must be positive");
  if (!(config.alpha >= 0.0 && config.alpha < 0.5)) {
    return Invalid("alpha must lie in [0, 1/2)");
  }
  if (config.task == Task::kPca) {
    if (config.tau.has_value()) return Invalid("PCA takes no tau");
    if (config.grid.sphere_size < 2) return Invalid("sphere_size must be >= 2");
  } else {
    if (!config.tau.has_value() || !(*config.tau > 0.0)) {
      return Invalid("tau must be present and positive");
    }
    if (config.grid.points_per_axis < 1) {
      return Invalid("points_per_axis must be >= 1");
    }
  }
  if (config.net_size < 1) return Invalid("net_size must be >= 1");
  if (config.margin_cap < 0) return Invalid("margin_cap must be >= 0");
  return absl::OkStatus();
}

std::string_view FamilyClassName(FamilyClass family) {
  switch (family) {
    case FamilyClass::kSubGaussian:
      return "sub-gaussian";
    case FamilyClass::kHypercontractive:
      return "hypercontractive";
    case FamilyClass::kCovBounded:
      return "cov-bounded";
  }
  return "unknown";
}

absl::StatusOr<FamilyClass> ParseFamilyClass(std::string_view name) {
  if (name == "sub-gaussian") return FamilyClass::kSubGaussian;
  if (name == "hypercontractive") return FamilyClass::kHypercontractive;
  if (name == "cov-bounded") return FamilyClass::kCovBounded;
  return Invalid(absl::StrCat("unknown family class '", AbslView(name), "'"));
}

absl::StatusOr<Proposal> ProposeFromRho(Task task, double rho, double alpha,
                                        int n) {
  if (!(alpha > 0.0 && alpha < 0.5)) return Invalid("alpha not in (0, 1/2)");
  if (!(rho > 0.0)) return Invalid("rho must be positive");
  if (n < 1) return Invalid("n must be >= 1");
  Proposal proposal;
  proposal.rho = rho;
  if (task == Task::kPca) {
    proposal.sensitivity = 80.0 * rho / (alpha * n);
  } else {
    proposal.sensitivity = 110.0 * rho / (alpha * n);
    proposal.tau = 42.0 * rho;
  }
  return proposal;
}

absl::StatusOr<Proposal> ProposeParams(Task task, const Calibration& calibration,
                                       double alpha, int n) {
  if (!(alpha > 0.0 && alpha < 0.5)) return Invalid("alpha not in (0, 1/2)");
  if (!(calibration.constant > 0.0)) {
    return Invalid("calibration constant must be positive");
  }
  double rho = 0.0;
  switch (calibration.family) {
    case FamilyClass::kSubGaussian:
      rho = task == Task::kPca
                ? calibration.constant * alpha * std::log(1.0 / alpha)
                : calibration.constant * alpha *
                      std::sqrt(std::log(1.0 / alpha));
      break;
    case FamilyClass::kHypercontractive: {
      if (task == Task::kPca) {
        return Invalid("PCA is not supported for hypercontractive families");
      }
      if (calibration.k < 2 || !(calibration.kappa > 0.0) ||
          !(calibration.zeta > 0.0 && calibration.zeta < 1.0)) {
        return Invalid("hypercontractive calibration needs k >= 2, kappa > 0, "
                       "zeta in (0, 1)");
      }
      const double k = calibration.k;
      rho = calibration.constant * k * calibration.kappa *
            std::pow(alpha, 1.0 - 1.0 / k) *
            std::pow(calibration.zeta, -1.0 / k);
      break;
    }
    case FamilyClass::kCovBounded:
      if (task != Task::kMean && task != Task::kEuclideanMean) {
        return Invalid("covariance-bounded families support mean tasks only");
      }
      rho = calibration.constant * std::sqrt(alpha);
      break;
  }
  return ProposeFromRho(task, rho, alpha, n);
}

absl::StatusOr<DirectionNet> ScoreNet(const MechanismConfig& config, int d) {
  return MakeDirectionNet(config.task == Task::kCovariance
                              ? NetKind::kSymmetricMatrix
                              : NetKind::kVector,
                          d, config.net_size, config.net_seed);
}

absl::StatusOr<std::pair<double, Eigen::VectorXd>> ConfigNoiseScale(
    const Dataset& data, const MechanismConfig& config, int extra_drop) {
  if (!data.labeled()) return Invalid("regression data needs labels");
  Rng rng(DeriveSeed(config.net_seed, kNoiseScaleStream));
  const int drop =
      TrimCount(kTwoSidedTailFraction, config.alpha, data.n()) + extra_drop;
  absl::StatusOr<NoiseScaleResult> result = RobustNoiseScaleWithDrop(
      data.rows, *data.labels, drop, NoiseScaleMode::kHeuristic, rng);
  if (!result.ok()) return result.status();
  return std::make_pair(result->gamma_hat, result->beta);
}

absl::StatusOr<TaskScorer> TaskScorer::Build(const Dataset& data,
                                             const MechanismConfig& config,
                                             Execution execution) {
  absl::StatusOr<DirectionNet> net = ScoreNet(config, data.d());
  if (!net.ok()) return net.status();
  TaskScorer scorer;
  scorer.net_ = std::make_shared<const DirectionNet>(*std::move(net));
  const int tail = TrimCount(kTwoSidedTailFraction, config.alpha, data.n());
  switch (config.task) {
    case Task::kMean:
    case Task::kEuclideanMean: {
      absl::StatusOr<ProjectedScoreModel> model = ProjectedScoreModel::Build(
          data.rows, *scorer.net_, tail, config.task == Task::kMean, execution);
      if (!model.ok()) return model.status();
      auto shared = std::make_shared<const ProjectedScoreModel>(*std::move(model));
      scorer.fn_ = [shared](const Eigen::VectorXd& theta) {
        return shared->Evaluate(theta);
      };
      break;
    }
    case Task::kCovariance: {
      absl::StatusOr<ProjectedScoreModel> model = ProjectedScoreModel::Build(
          OuterProductFeatures(data.rows), *scorer.net_, tail, true, execution);
      if (!model.ok()) return model.status();
      auto shared = std::make_shared<const ProjectedScoreModel>(*std::move(model));
      const int d = data.d();
      scorer.fn_ = [shared, d](const Eigen::VectorXd& theta) {
        const Eigen::MatrixXd sigma = SymmetricFromUpper(theta, d);
        if (!IsPositiveDefinite(sigma)) return kInf;
        return shared->Evaluate(Flatten(sigma));
      };
      break;
    }
    case Task::kRegression: {
      absl::StatusOr<std::pair<double, Eigen::VectorXd>> noise =
          ConfigNoiseScale(data, config);
      if (!noise.ok()) return noise.status();
      scorer.gamma_hat_ = noise->first;
      scorer.gamma_beta_ = noise->second;
      absl::StatusOr<RegressionScoreModel> model = RegressionScoreModel::Build(
          data, *scorer.net_, tail, scorer.gamma_hat_, execution);
      if (!model.ok()) return model.status();
      auto shared =
          std::make_shared<const RegressionScoreModel>(*std::move(model));
      scorer.fn_ = [shared](const Eigen::VectorXd& beta) {
        return shared->Evaluate(beta);
      };
      break;
    }
    case Task::kPca: {
      absl::StatusOr<PcaScoreModel> model = PcaScoreModel::Build(
          data, *scorer.net_,
          TrimCount(kOneSidedDropFraction, config.alpha, data.n()), execution);
      if (!model.ok()) return model.status();
      auto shared = std::make_shared<const PcaScoreModel>(*std::move(model));
      scorer.fn_ = [shared](const Eigen::VectorXd& u) {
        return shared->Evaluate(u);
      };
      break;
    }
  }
  return scorer;
}

std::vector<double> TaskScorer::ScoreAll(const Eigen::MatrixXd& points,
                                         Execution execution) const {
  return EvaluatePoints(points, fn_, execution);
}

absl::StatusOr<GridSpec> AutoGrid(const Dataset& data,
                                  const MechanismConfig& config) {
  GridSpec grid = config.grid;
  if (config.task == Task::kPca) return grid;
  const int tail = TrimCount(kTwoSidedTailFraction, config.alpha, data.n());
  const int d = data.d();
  auto trimmed = [&](const Eigen::VectorXd& column)
      -> absl::StatusOr<RobustMoments> {
    std::vector<double> values(column.data(), column.data() + column.size());
    return TrimmedMeanVar(values, tail);
  };
  switch (config.task) {
    case Task::kMean:
    case Task::kEuclideanMean: {
      grid.center.resize(d);
      grid.half_widths.resize(d);
      for (int j = 0; j < d; ++j) {
        absl::StatusOr<RobustMoments> m = trimmed(data.rows.col(j));
        if (!m.ok()) return m.status();
        grid.center(j) = m->mean;
        grid.half_widths(j) = kGridHalfWidthInScales * std::sqrt(m->var);
      }
      break;
    }
    case Task::kRegression: {
      absl::StatusOr<std::pair<double, Eigen::VectorXd>> noise =
          ConfigNoiseScale(data, config);
      if (!noise.ok()) return noise.status();
      grid.center = noise->second;
      grid.half_widths.resize(d);
      for (int j = 0; j < d; ++j) {
        absl::StatusOr<RobustMoments> m = trimmed(data.rows.col(j));
        if (!m.ok()) return m.status();
        const double scale = std::sqrt(m->var);
        if (!(scale > 0.0)) {
          return absl::FailedPreconditionError(
              "degenerate-data: constant design column");
        }
        grid.half_widths(j) = kGridHalfWidthInScales * noise->first / scale;
      }
      break;
    }
    case Task::kCovariance: {
      const int p = d * (d + 1) / 2;
      grid.center.resize(p);
      grid.half_widths.resize(p);
      int k = 0;
      for (int a = 0; a < d; ++a) {
        for (int b = a; b < d; ++b) {
          const Eigen::VectorXd product =
              data.rows.col(a).cwiseProduct(data.rows.col(b));
          absl::StatusOr<RobustMoments> m = trimmed(product);
          if (!m.ok()) return m.status();
          grid.center(k) = m->mean;
          grid.half_widths(k) = kGridHalfWidthInScales * std::sqrt(m->var);
          ++k;
        }
      }
      break;
    }
    case Task::kPca:
      break;
  }
  for (int j = 0; j < grid.half_widths.size(); ++j) {
    if (!(grid.half_widths(j) > 0.0) || !std::isfinite(grid.half_widths(j))) {
      return absl::FailedPreconditionError(
          "degenerate-data: zero trimmed spread along a grid axis");
    }
  }
  return grid;
}

absl::StatusOr<Eigen::MatrixXd> CandidatePoints(const MechanismConfig& config,
                                                int d) {
  const GridSpec& grid = config.grid;
  if (config.task == Task::kPca) {
    if (grid.sphere_size > grid.max_points) {
      return absl::ResourceExhaustedError(
          absl::StrCat("resource-error: sphere net of ", grid.sphere_size,
                       " points exceeds the cap ", grid.max_points));
    }
    absl::StatusOr<DirectionNet> sphere =
        MakeDirectionNet(NetKind::kVector, d, grid.sphere_size,
                         config.net_seed + kSphereSeedOffset);
    if (!sphere.ok()) return sphere.status();
    return sphere->elements;
  }
  const int p = ParameterDimension(config.task, d);
  if (grid.center.size() != p || grid.half_widths.size() != p) {
    return absl::InvalidArgumentError(absl::StrCat(
        "invalid-parameter: grid center and half widths need ", p, " entries"));
  }
  const int per_axis = grid.points_per_axis;
  if (per_axis < 1) return Invalid("points_per_axis must be >= 1");
  double total = 1.0;
  for (int a = 0; a < p; ++a) total *= per_axis;
  if (total > static_cast<double>(grid.max_points)) {
    return absl::ResourceExhaustedError(
        absl::StrCat("resource-error: grid of ", total,
                     " points exceeds the cap ", grid.max_points));
  }
  const int64_t count = static_cast<int64_t>(total);
  Eigen::MatrixXd points(p, count);
  for (int64_t k = 0; k < count; ++k) {
    int64_t rest = k;
    for (int a = 0; a < p; ++a) {
      const int i = static_cast<int>(rest % per_axis);
      rest /= per_axis;
      const double offset =
          per_axis == 1 ? 0.0 : -1.0 + 2.0 * i / (per_axis - 1);
      points(a, k) = grid.center(a) + grid.half_widths(a) * offset;
    }
  }
  return points;
}

Eigen::VectorXd CandidateToEstimate(Task task, const Eigen::VectorXd& point,
                                    int d) {
  if (task == Task::kCovariance) return Flatten(SymmetricFromUpper(point, d));
  return point;
}

absl::StatusOr<DiscretePMF> ReleaseLawFromScores(
    const std::vector<double>& scores, const MechanismConfig& config) {
  std::vector<double> admitted(scores.size());
  bool any = false;
  for (size_t i = 0; i < scores.size(); ++i) {
    const bool inside = config.task == Task::kPca || scores[i] <= *config.tau;
    admitted[i] = inside ? scores[i] : kInf;
    any = any || (inside && std::isfinite(scores[i]));
  }
  if (!any) {
    return absl::FailedPreconditionError(
        "empty-support: no candidate has score within tau");
  }
  absl::StatusOr<std::vector<double>> pmf =
      ExpMechPmf(admitted, config.eps / (4.0 * config.sensitivity));
  if (!pmf.ok()) return pmf.status();
  DiscretePMF law;
  law.atoms.reserve(scores.size() + 1);
  law.atoms.emplace_back(kBottom, 0.0);
  for (size_t i = 0; i < pmf->size(); ++i) {
    law.atoms.emplace_back(static_cast<int64_t>(i), (*pmf)[i]);
  }
  return law;
}

absl::StatusOr<DiscretePMF> ReleaseLaw(const Dataset& data,
                                       const MechanismConfig& config,
                                       const Eigen::MatrixXd& points) {
  absl::StatusOr<TaskScorer> scorer =
      TaskScorer::Build(data, config, Execution::kSerial);
  if (!scorer.ok()) {
    if (IsDegenerate(scorer.status())) {
      return absl::FailedPreconditionError(absl::StrCat(
          "empty-support: score undefined (", scorer.status().message(), ")"));
    }
    return scorer.status();
  }
  return ReleaseLawFromScores(scorer->ScoreAll(points, Execution::kSerial),
                              config);
}

absl::StatusOr<Eigen::VectorXd> ReleaseSample(const Dataset& data,
                                              const MechanismConfig& config,
                                              Rng& rng) {
  absl::StatusOr<Eigen::MatrixXd> points = CandidatePoints(config, data.d());
  if (!points.ok()) return points.status();
  absl::StatusOr<DiscretePMF> law = ReleaseLaw(data, config, *points);
  if (!law.ok()) return law.status();
  std::vector<double> probabilities;
  for (size_t i = 1; i < law->atoms.size(); ++i) {
    probabilities.push_back(law->atoms[i].second);
  }
  return Eigen::VectorXd(points->col(SampleIndex(probabilities, rng)));
}

double SafetyThreshold(double eps, double delta) {
  return (2.0 / eps) * std::log(2.0 / delta);
}

absl::StatusOr<SafetyOutcome> SafetyTest(int margin, double eps, double delta,
                                         Rng& rng) {
  if (margin < 0) return Invalid("margin must be >= 0");
  SafetyOutcome outcome;
  outcome.noisy_margin = margin;
  if (std::isfinite(eps)) {
    absl::StatusOr<double> noise = SampleLaplace(2.0 / eps, rng);
    if (!noise.ok()) return noise.status();
    outcome.noisy_margin += *noise;
  }
  outcome.pass = outcome.noisy_margin >= SafetyThreshold(eps, delta);
  return outcome;
}

double PassProbability(int margin, double eps, double delta) {
  const double gap = SafetyThreshold(eps, delta) - margin;
  if (!std::isfinite(eps)) return gap <= 0.0 ? 1.0 : 0.0;
  return 1.0 - LaplaceCdf(gap, 2.0 / eps);
}

DiscretePMF ComposeOutputLaw(int margin, const MechanismConfig& config,
                             const absl::StatusOr<DiscretePMF>& release,
                             int64_t candidate_count) {
  DiscretePMF law;
  if (!release.ok()) {
    law.atoms.emplace_back(kBottom, 1.0);
    for (int64_t k = 0; k < candidate_count; ++k) law.atoms.emplace_back(k, 0.0);
    return law;
  }
  const double pass = PassProbability(margin, config.eps, config.delta);
  law.atoms = release->atoms;
  for (auto& [id, probability] : law.atoms) {
    probability = id == kBottom ? 1.0 - pass : pass * probability;
  }
  return law;
}

std::string_view MarginModeName(MarginMode mode) {
  return mode == MarginMode::kExact ? "exact" : "certified";
}

absl::StatusOr<MarginMode> ParseMarginMode(std::string_view name) {
  if (name == "exact") return MarginMode::kExact;
  if (name == "certified") return MarginMode::kCertified;
  return Invalid(absl::StrCat("unknown margin mode '", AbslView(name), "'"));
}

absl::StatusOr<Transcript> Run(const Dataset& data,
                               const MechanismConfig& input_config,
                               MarginMode mode, Rng& rng,
                               const std::vector<double>* alphabet) {
  if (absl::Status s = ValidateConfig(input_config); !s.ok()) return s;
  MechanismConfig config = input_config;
  if (config.task != Task::kPca && config.grid.center.size() == 0) {
    absl::StatusOr<GridSpec> grid = AutoGrid(data, config);
    if (!grid.ok()) return grid.status();
    config.grid = *grid;
  }
  Transcript transcript;
  transcript.seed = config.seed;
  transcript.margin_mode = mode;
  if (mode == MarginMode::kExact) {
    if (alphabet == nullptr) {
      return Invalid("exact margin needs a record alphabet");
    }
    absl::StatusOr<MarginResult> margin = MarginExact(
        data, config, *alphabet, config.EffectiveMarginCap());
    if (!margin.ok()) return margin.status();
    transcript.margin = margin->value;
  } else {
    transcript.margin = MarginCertified(data, config).value;
  }
  absl::StatusOr<SafetyOutcome> test =
      SafetyTest(transcript.margin, config.eps, config.delta, rng);
  if (!test.ok()) return test.status();
  transcript.noisy_margin = test->noisy_margin;
  transcript.pass = test->pass;
  if (!transcript.pass) return transcript;

  absl::StatusOr<Eigen::MatrixXd> points = CandidatePoints(config, data.d());
  if (!points.ok()) return points.status();
  absl::StatusOr<DiscretePMF> law = ReleaseLaw(data, config, *points);
  if (!law.ok()) {
    if (absl::StartsWith(law.status().message(), "empty-support")) {
      transcript.empty_support = true;
      return transcript;
    }
    return law.status();
  }
  std::vector<double> probabilities;
  for (size_t i = 1; i < law->atoms.size(); ++i) {
    probabilities.push_back(law->atoms[i].second);
    if (law->atoms[i].second > 0.0) ++transcript.feasible_count;
  }
  transcript.pmf_entropy = Entropy(probabilities);
  transcript.output = points->col(SampleIndex(probabilities, rng));
  return transcript;
}

absl::StatusOr<DpReport> VerifyHptrOnUniverse(const MechanismConfig& config,
                                              const FiniteUniverse& universe) {
  absl::StatusOr<ExactMarginOracle> oracle =
      ExactMarginOracle::Create(config, universe);
  if (!oracle.ok()) return oracle.status();
  std::vector<DiscretePMF> laws(universe.size());
  for (int64_t id = 0; id < universe.size(); ++id) {
    absl::StatusOr<DiscretePMF> law =
        oracle->OutputLaw(id, config.EffectiveMarginCap());
    if (!law.ok()) return law.status();
    laws[id] = *std::move(law);
  }
  return VerifyDp(laws, universe.AllNeighborPairs(), config.eps, config.delta);
}

absl::StatusOr<DpReport> VerifyReleaseOnUniverse(
    const MechanismConfig& config, const FiniteUniverse& universe) {
  absl::StatusOr<Eigen::MatrixXd> points = CandidatePoints(config, 1);
  if (!points.ok()) return points.status();
  std::vector<DiscretePMF> laws(universe.size());
  for (int64_t id = 0; id < universe.size(); ++id) {
    absl::StatusOr<DiscretePMF> law =
        ReleaseLaw(universe.Decode(id), config, *points);
    if (!law.ok()) {
      if (!absl::StartsWith(law.status().message(), "empty-support")) {
        return law.status();
      }
      // Abort with certainty, over the same outcome set.
      law = ComposeOutputLaw(0, config, law, points->cols());
    }
    laws[id] = *std::move(law);
  }
  return VerifyDp(laws, universe.AllNeighborPairs(), config.eps / 2.0, 0.0);
}

}  // namespace hptr
