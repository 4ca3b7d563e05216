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
#include <numeric>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "hptr/hptr.h"
#include "hptr/robust1d.h"
#include "hptr/scores.h"

namespace hptr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int64_t kMaxUniverse = 100'000'000;

bool IsEmptySupport(const absl::Status& status) {
  return absl::StartsWith(status.message(), "empty-support");
}

DiscretePMF BottomOnly(int64_t candidates) {
  DiscretePMF law;
  law.atoms.emplace_back(kBottom, 1.0);
  for (int64_t k = 0; k < candidates; ++k) law.atoms.emplace_back(k, 0.0);
  return law;
}

// Ascending copy with prefix sums of values and squares; prefix[i] is the
// sum of the i smallest.
struct SortedColumn {
  std::vector<double> values;
  std::vector<double> prefix;
  std::vector<double> prefix_sq;

  explicit SortedColumn(const Eigen::VectorXd& column)
      : values(column.data(), column.data() + column.size()) {
    std::sort(values.begin(), values.end());
    prefix.assign(values.size() + 1, 0.0);
    prefix_sq.assign(values.size() + 1, 0.0);
    for (size_t i = 0; i < values.size(); ++i) {
      prefix[i + 1] = prefix[i] + values[i];
      prefix_sq[i + 1] = prefix_sq[i] + values[i] * values[i];
    }
  }

  int n() const { return static_cast<int>(values.size()); }
  // Sum over 1-based ranks [first, last].
  double Sum(int first, int last) const { return prefix[last] - prefix[first - 1]; }
  double SumSq(int first, int last) const {
    return prefix_sq[last] - prefix_sq[first - 1];
  }
};

// Relative one-swap change bound for a scale whose square moves by at most
// `change` from a value at least `floor`.
double RelativeScaleChange(double change, double floor) {
  if (!(floor > 0.0) || change >= floor) return kInf;
  return 1.0 / std::sqrt(1.0 - change / floor) - 1.0;
}

// Drift of one normalized projection after `steps` swaps when each swap moves
// it by at most a + b |current value|.
double Drift(double f, double a, double b, int steps) {
  if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
  if (b == 0.0) return a * steps;
  return (std::abs(f) + a / b) * (std::pow(1.0 + b, steps) - 1.0);
}

// Per-candidate bounds at one radius: lower and upper score over the ball,
// and the largest one-swap score change inside it.
struct CandidateBounds {
  double lower = -kInf;
  double upper = -kInf;
  double step = 0.0;
  bool excluded = false;
};

// Sensitivity condition on every candidate that can enter a support, and the
// mass of the boundary band relative to the core.
bool SupportConditionsHold(const std::vector<CandidateBounds>& bounds,
                           const MechanismConfig& config) {
  const double tau = *config.tau;
  const double delta_s = config.sensitivity;
  const double coefficient = config.eps / (4.0 * delta_s);
  double shift = kInf;
  for (const CandidateBounds& b : bounds) {
    if (b.excluded || b.lower > tau) continue;
    if (!(b.step <= delta_s)) return false;
    if (b.upper <= tau - delta_s) shift = std::min(shift, b.upper);
  }
  if (!std::isfinite(shift)) return false;
  double core = 0.0;
  double band = 0.0;
  for (const CandidateBounds& b : bounds) {
    if (b.excluded || b.lower > tau) continue;
    if (b.upper <= tau - delta_s) {
      core += std::exp(-coefficient * (b.upper - shift));
    } else {
      band += std::exp(-coefficient * (std::max(b.lower, tau - delta_s) - shift));
    }
  }
  return (1.0 + std::exp(config.eps / 2.0)) * band / core <= config.delta / 2.0;
}

// Largest r in [0, cap] with holds(r), for a predicate true at 0 and monotone
// non-increasing in r.
template <typename Predicate>
int LargestHolding(int cap, const Predicate& holds) {
  int lo = 0;
  int hi = cap;
  while (lo < hi) {
    const int mid = lo + (hi - lo + 1) / 2;
    if (holds(mid)) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return lo;
}

// Mean, Euclidean mean and covariance: the score is a max over projections
// (<w, theta> - c_w) / s_w of trimmed statistics.
int CertifyProjected(const Eigen::MatrixXd& features, const DirectionNet& net,
                     bool normalize, const Eigen::MatrixXd& candidates,
                     const std::vector<bool>& excluded,
                     const MechanismConfig& config) {
  const int n = static_cast<int>(features.rows());
  const int tail = TrimCount(kTwoSidedTailFraction, config.alpha, n);
  const int mid = n - 2 * tail;
  const int cap = std::min(config.EffectiveMarginCap(), tail);
  if (cap < 1) return 0;
  absl::StatusOr<ProjectedScoreModel> model =
      ProjectedScoreModel::Build(features, net, tail, normalize);
  if (!model.ok()) return 0;
  const int m = net.size();

  // Per-direction one-swap coefficients a(r), b(r) for r = 1..cap.
  std::vector<std::vector<double>> a(m, std::vector<double>(cap + 1, kInf));
  std::vector<std::vector<double>> b(m, std::vector<double>(cap + 1, kInf));
  ParallelFor(
      m,
      [&](int64_t k) {
        const SortedColumn z(features * net.elements.col(k));
        for (int r = 1; r <= cap; ++r) {
          const double low = z.values[tail - r];
          const double high = z.values[n - tail + r - 1];
          const double range = high - low;
          if (!normalize) {
            a[k][r] = range / mid;
            b[k][r] = 0.0;
            continue;
          }
          const double mean_low = z.Sum(tail + 1 - r, n - tail - r) / mid;
          const double mean_high = z.Sum(tail + 1 + r, n - tail + r) / mid;
          const double reach = std::max(high - mean_low, mean_high - low);
          const double var_change = (reach * reach + range * range / mid) / mid;
          const int width = mid - 3 * r;
          if (width < 2) break;
          double min_var = kInf;
          for (int s = tail + 1 + r; s + width - 1 <= n - tail - r; ++s) {
            const double mean = z.Sum(s, s + width - 1) / width;
            const double var = z.SumSq(s, s + width - 1) / width - mean * mean;
            min_var = std::min(min_var, std::max(var, 0.0));
          }
          const double var_floor = min_var * width / mid;
          const double rel = RelativeScaleChange(var_change, var_floor);
          if (!std::isfinite(rel)) break;
          a[k][r] = range / (mid * std::sqrt(var_floor));
          b[k][r] = rel;
        }
      },
      Execution::kParallel);

  // Normalized projections of every candidate at the data.
  const Eigen::MatrixXd projected =
      (net.elements.transpose() * candidates).colwise() -
      model->centers();
  Eigen::MatrixXd f = projected.array().colwise() / model->scales().array();

  auto holds = [&](int r) {
    std::vector<CandidateBounds> bounds(candidates.cols());
    ParallelFor(
        candidates.cols(),
        [&](int64_t g) {
          CandidateBounds& out = bounds[g];
          if (excluded[g]) {
            out.excluded = true;
            return;
          }
          for (int k = 0; k < m; ++k) {
            const double value = f(k, g);
            const double drift = Drift(value, a[k][r], b[k][r], r);
            out.lower = std::max(out.lower, value - drift);
            out.upper = std::max(out.upper, value + drift);
            out.step = std::max(
                out.step, a[k][r] + b[k][r] * (std::abs(value) + drift));
          }
        },
        Execution::kParallel);
    return SupportConditionsHold(bounds, config);
  };
  return LargestHolding(cap, holds);
}

int CertifyRegression(const Dataset& data, const Eigen::MatrixXd& candidates,
                      const MechanismConfig& config) {
  const int n = data.n();
  const int tail = TrimCount(kTwoSidedTailFraction, config.alpha, n);
  const int mid = n - 2 * tail;
  const int drop = TrimCount(kTwoSidedTailFraction, config.alpha, n);
  const int keep = n - drop;
  const int cap = std::min({config.EffectiveMarginCap(), tail, drop - 1});
  if (cap < 1) return 0;
  absl::StatusOr<DirectionNet> net = ScoreNet(config, data.d());
  if (!net.ok()) return 0;
  absl::StatusOr<std::pair<double, Eigen::VectorXd>> fit =
      ConfigNoiseScale(data, config);
  absl::StatusOr<std::pair<double, Eigen::VectorXd>> fit_wide =
      ConfigNoiseScale(data, config, cap);
  if (!fit.ok() || !fit_wide.ok() || !(fit->first > 0.0)) return 0;
  const double gamma_hat = fit->first;
  const double gamma_floor_sq =
      fit_wide->first * fit_wide->first * (keep - cap) / keep;

  // Noise-scale swap bound from residuals at the fitted coefficients.
  const Eigen::VectorXd residual = *data.labels - data.rows * fit->second;
  std::vector<double> sq(n);
  for (int i = 0; i < n; ++i) sq[i] = residual(i) * residual(i);
  std::sort(sq.begin(), sq.end());
  std::vector<double> gamma_rel(cap + 1);
  for (int r = 1; r <= cap; ++r) {
    gamma_rel[r] = RelativeScaleChange(sq[keep + r] / keep, gamma_floor_sq);
  }

  const int m = net->size();
  const Eigen::MatrixXd z_all = data.rows * net->elements;
  std::vector<double> scale(m);
  std::vector<std::vector<double>> sigma_floor(m, std::vector<double>(cap + 1));
  std::vector<std::vector<double>> sigma_rel(m, std::vector<double>(cap + 1));
  for (int k = 0; k < m; ++k) {
    const SortedColumn z(z_all.col(k));
    scale[k] = std::sqrt(z.SumSq(tail + 1, n - tail) / mid);
    for (int r = 1; r <= cap; ++r) {
      const double low = z.values[tail - r];
      const double high = z.values[n - tail + r - 1];
      const double change = std::max(low * low, high * high) / mid;
      const int width = mid - 3 * r;
      double floor = 0.0;
      if (width >= 1) {
        double best = kInf;
        for (int s = tail + 1 + r; s + width - 1 <= n - tail - r; ++s) {
          best = std::min(best, z.SumSq(s, s + width - 1));
        }
        floor = best / mid;
      }
      sigma_floor[k][r] = floor;
      sigma_rel[k][r] = RelativeScaleChange(change, floor);
    }
    if (!(scale[k] > 0.0)) return 0;
  }

  const int count = static_cast<int>(candidates.cols());
  // bounds[g * (cap + 1) + r]
  std::vector<CandidateBounds> bounds(static_cast<size_t>(count) * (cap + 1));
  const int low_keep = tail + cap;
  ParallelFor(
      count,
      [&](int64_t g) {
        const Eigen::VectorXd res = *data.labels - data.rows * candidates.col(g);
        std::vector<double> values(n);
        for (int k = 0; k < m; ++k) {
          for (int i = 0; i < n; ++i) values[i] = z_all(i, k) * res(i);
          // Sort only the two tails the radii reach into.
          std::nth_element(values.begin(), values.begin() + low_keep,
                           values.end());
          std::sort(values.begin(), values.begin() + low_keep);
          std::nth_element(values.begin() + low_keep,
                           values.begin() + (n - low_keep), values.end());
          std::sort(values.begin() + (n - low_keep), values.end());
          double trimmed = 0.0;
          for (int i = tail; i < n - tail; ++i) trimmed += values[i];
          const double value = (trimmed / mid) / (scale[k] * gamma_hat);
          for (int r = 1; r <= cap; ++r) {
            const double range = values[n - tail + r - 1] - values[tail - r];
            const double a = range / (mid * std::sqrt(sigma_floor[k][r]) *
                                      std::sqrt(gamma_floor_sq));
            const double b = (1.0 + sigma_rel[k][r]) * (1.0 + gamma_rel[r]) - 1.0;
            const double drift = Drift(value, a, b, r);
            CandidateBounds& out = bounds[g * (cap + 1) + r];
            out.lower = std::max(out.lower, value - drift);
            out.upper = std::max(out.upper, value + drift);
            out.step = std::max(out.step, a + b * (std::abs(value) + drift));
          }
        }
      },
      Execution::kParallel);

  for (int r = 1; r <= cap; ++r) {
    std::vector<CandidateBounds> at_radius(count);
    for (int g = 0; g < count; ++g) at_radius[g] = bounds[g * (cap + 1) + r];
    if (!SupportConditionsHold(at_radius, config)) return r - 1;
  }
  return cap;
}

int CertifyPca(const Dataset& data, const Eigen::MatrixXd& candidates,
               const MechanismConfig& config) {
  const int n = data.n();
  const int drop = TrimCount(kOneSidedDropFraction, config.alpha, n);
  const int keep = n - drop;
  const int cap = std::min({config.EffectiveMarginCap(), drop, keep - 1});
  if (cap < 1) return 0;
  absl::StatusOr<DirectionNet> net = ScoreNet(config, data.d());
  if (!net.ok()) return 0;
  std::vector<double> denominator_floor(cap + 1, 0.0);
  std::vector<double> net_top(cap + 1, 0.0);
  for (int k = 0; k < net->size(); ++k) {
    const SortedColumn y(
        (data.rows * net->elements.col(k)).array().square().matrix());
    for (int r = 1; r <= cap; ++r) {
      denominator_floor[r] =
          std::max(denominator_floor[r], y.prefix[keep - r] / keep);
      net_top[r] = std::max(net_top[r], y.values[keep + r - 1]);
    }
  }
  std::vector<double> candidate_top(cap + 1, 0.0);
  for (int g = 0; g < candidates.cols(); ++g) {
    const SortedColumn y(
        (data.rows * candidates.col(g)).array().square().matrix());
    for (int r = 1; r <= cap; ++r) {
      candidate_top[r] = std::max(candidate_top[r], y.values[keep + r - 1]);
    }
  }
  for (int r = 1; r <= cap; ++r) {
    if (!(denominator_floor[r] > 0.0)) return r - 1;
    const double step =
        (candidate_top[r] + net_top[r]) / (keep * denominator_floor[r]);
    if (!(step <= config.sensitivity)) return r - 1;
  }
  return cap;
}

}  // namespace

absl::StatusOr<FiniteUniverse> FiniteUniverse::Create(
    std::vector<double> alphabet, int n) {
  if (alphabet.empty()) {
    return absl::InvalidArgumentError("invalid-parameter: empty alphabet");
  }
  if (n < 1) return absl::InvalidArgumentError("invalid-parameter: n < 1");
  FiniteUniverse universe;
  universe.alphabet_ = std::move(alphabet);
  universe.n_ = n;
  double size = 1.0;
  for (int i = 0; i < n; ++i) size *= universe.alphabet_.size();
  if (size > kMaxUniverse) {
    return absl::ResourceExhaustedError(absl::StrCat(
        "resource-error: universe of ", size, " datasets is too large"));
  }
  universe.size_ = static_cast<int64_t>(size);
  return universe;
}

Dataset FiniteUniverse::Decode(int64_t id) const {
  Dataset data;
  data.rows.resize(n_, 1);
  const int64_t base = alphabet_.size();
  for (int i = 0; i < n_; ++i) {
    data.rows(i, 0) = alphabet_[id % base];
    id /= base;
  }
  return data;
}

absl::StatusOr<int64_t> FiniteUniverse::Encode(const Dataset& data) const {
  if (data.n() != n_ || data.d() != 1 || data.labeled()) {
    return absl::InvalidArgumentError(
        "invalid-parameter: dataset shape does not match the universe");
  }
  int64_t id = 0;
  int64_t place = 1;
  for (int i = 0; i < n_; ++i) {
    auto it = std::find(alphabet_.begin(), alphabet_.end(), data.rows(i, 0));
    if (it == alphabet_.end()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "invalid-parameter: record ", data.rows(i, 0), " not in alphabet"));
    }
    id += place * (it - alphabet_.begin());
    place *= alphabet_.size();
  }
  return id;
}

std::vector<int64_t> FiniteUniverse::Neighbors(int64_t id) const {
  std::vector<int64_t> out;
  const int64_t base = alphabet_.size();
  int64_t place = 1;
  for (int i = 0; i < n_; ++i) {
    const int64_t digit = (id / place) % base;
    for (int64_t v = 0; v < base; ++v) {
      if (v != digit) out.push_back(id + (v - digit) * place);
    }
    place *= base;
  }
  return out;
}

std::vector<NeighborPair> FiniteUniverse::AllNeighborPairs() const {
  std::vector<NeighborPair> pairs;
  for (int64_t id = 0; id < size_; ++id) {
    for (int64_t other : Neighbors(id)) {
      if (other > id) {
        pairs.push_back({static_cast<int>(id), static_cast<int>(other), 1});
      }
    }
  }
  return pairs;
}

absl::StatusOr<ExactMarginOracle> ExactMarginOracle::Create(
    const MechanismConfig& config, FiniteUniverse universe, int64_t budget) {
  if (absl::Status s = ValidateConfig(config); !s.ok()) return s;
  absl::StatusOr<Eigen::MatrixXd> points = CandidatePoints(config, 1);
  if (!points.ok()) return points.status();
  ExactMarginOracle oracle;
  oracle.config_ = config;
  oracle.universe_ = std::move(universe);
  oracle.points_ = *std::move(points);
  oracle.budget_ = budget;
  oracle.laws_.resize(oracle.universe_.size());
  oracle.unsafe_.assign(oracle.universe_.size(), -1);
  return oracle;
}

const absl::StatusOr<DiscretePMF>& ExactMarginOracle::Release(int64_t id) {
  if (laws_[id] == nullptr) {
    ++evaluated_;
    laws_[id] = std::make_unique<absl::StatusOr<DiscretePMF>>(
        ReleaseLaw(universe_.Decode(id), config_, points_));
  }
  return *laws_[id];
}

absl::StatusOr<bool> ExactMarginOracle::Unsafe(int64_t id) {
  if (unsafe_[id] >= 0) return unsafe_[id] == 1;
  auto effective = [&](int64_t k) -> absl::StatusOr<DiscretePMF> {
    const absl::StatusOr<DiscretePMF>& law = Release(k);
    if (law.ok()) return *law;
    if (IsEmptySupport(law.status())) return BottomOnly(points_.cols());
    return law.status();
  };
  if (evaluated_ > budget_) {
    return absl::ResourceExhaustedError("resource-error: release law budget");
  }
  absl::StatusOr<DiscretePMF> own = effective(id);
  if (!own.ok()) return own.status();
  bool unsafe = false;
  for (int64_t other : universe_.Neighbors(id)) {
    if (evaluated_ > budget_) {
      return absl::ResourceExhaustedError("resource-error: release law budget");
    }
    absl::StatusOr<DiscretePMF> law = effective(other);
    if (!law.ok()) return law.status();
    for (int order = 0; order < 2 && !unsafe; ++order) {
      absl::StatusOr<double> hs =
          order == 0 ? HockeyStickDelta(*own, *law, config_.eps / 2.0)
                     : HockeyStickDelta(*law, *own, config_.eps / 2.0);
      if (!hs.ok()) return hs.status();
      unsafe = *hs > config_.delta / 2.0;
    }
    if (unsafe) break;
  }
  unsafe_[id] = unsafe ? 1 : 0;
  return unsafe;
}

absl::StatusOr<MarginResult> ExactMarginOracle::Margin(int64_t id, int cap) {
  MarginResult result;
  result.mode = MarginMode::kExact;
  result.cap = cap;
  result.value = cap;
  const int n = universe_.n();
  const int64_t base = universe_.alphabet().size();
  std::vector<int64_t> place(n);
  for (int i = 0; i < n; ++i) place[i] = i == 0 ? 1 : place[i - 1] * base;
  std::vector<int64_t> digits(n);
  for (int i = 0; i < n; ++i) digits[i] = (id / place[i]) % base;

  for (int radius = 0; radius <= std::min(cap, n); ++radius) {
    // Every choice of `radius` positions, each moved to a different symbol.
    std::vector<int> positions(radius);
    std::iota(positions.begin(), positions.end(), 0);
    while (true) {
      std::vector<int64_t> offsets(radius, 1);
      while (true) {
        int64_t other = id;
        for (int q = 0; q < radius; ++q) {
          const int i = positions[q];
          const int64_t symbol = (digits[i] + offsets[q]) % base;
          other += (symbol - digits[i]) * place[i];
        }
        absl::StatusOr<bool> unsafe = Unsafe(other);
        if (!unsafe.ok()) {
          return absl::Status(
              unsafe.status().code(),
              absl::StrCat(unsafe.status().message(), " (reached radius ",
                           radius, ")"));
        }
        if (*unsafe) {
          result.value = radius;
          result.witness = other;
          return result;
        }
        int q = radius - 1;
        while (q >= 0 && offsets[q] == base - 1) offsets[q--] = 1;
        if (q < 0) break;
        ++offsets[q];
      }
      int q = radius - 1;
      while (q >= 0 && positions[q] == n - radius + q) --q;
      if (q < 0) break;
      ++positions[q];
      for (int r = q + 1; r < radius; ++r) positions[r] = positions[r - 1] + 1;
    }
  }
  return result;
}

absl::StatusOr<DiscretePMF> ExactMarginOracle::OutputLaw(int64_t id, int cap) {
  absl::StatusOr<MarginResult> margin = Margin(id, cap);
  if (!margin.ok()) return margin.status();
  const absl::StatusOr<DiscretePMF>& release = Release(id);
  if (!release.ok() && !IsEmptySupport(release.status())) {
    return release.status();
  }
  return ComposeOutputLaw(margin->value, config_, release, points_.cols());
}

absl::StatusOr<MarginResult> MarginExact(const Dataset& data,
                                         const MechanismConfig& config,
                                         const std::vector<double>& alphabet,
                                         int cap, int64_t budget) {
  absl::StatusOr<FiniteUniverse> universe =
      FiniteUniverse::Create(alphabet, data.n());
  if (!universe.ok()) return universe.status();
  absl::StatusOr<int64_t> id = universe->Encode(data);
  if (!id.ok()) return id.status();
  absl::StatusOr<ExactMarginOracle> oracle =
      ExactMarginOracle::Create(config, *std::move(universe), budget);
  if (!oracle.ok()) return oracle.status();
  return oracle->Margin(*id, cap);
}

MarginResult MarginCertified(const Dataset& data,
                             const MechanismConfig& input_config) {
  MarginResult result;
  result.mode = MarginMode::kCertified;
  result.cap = input_config.EffectiveMarginCap();
  if (!ValidateConfig(input_config).ok()) return result;
  MechanismConfig config = input_config;
  if (config.task != Task::kPca && config.grid.center.size() == 0) {
    absl::StatusOr<GridSpec> grid = AutoGrid(data, config);
    if (!grid.ok()) return result;
    config.grid = *grid;
  }
  absl::StatusOr<Eigen::MatrixXd> points = CandidatePoints(config, data.d());
  if (!points.ok()) return result;
  const int d = data.d();
  switch (config.task) {
    case Task::kMean:
    case Task::kEuclideanMean: {
      absl::StatusOr<DirectionNet> net = ScoreNet(config, d);
      if (!net.ok()) return result;
      result.value = CertifyProjected(
          data.rows, *net, config.task == Task::kMean, *points,
          std::vector<bool>(points->cols(), false), config);
      break;
    }
    case Task::kCovariance: {
      absl::StatusOr<DirectionNet> net = ScoreNet(config, d);
      if (!net.ok()) return result;
      Eigen::MatrixXd flattened(d * d, points->cols());
      std::vector<bool> excluded(points->cols());
      for (int g = 0; g < points->cols(); ++g) {
        const Eigen::MatrixXd sigma = SymmetricFromUpper(points->col(g), d);
        excluded[g] = !IsPositiveDefinite(sigma);
        flattened.col(g) = Flatten(sigma);
      }
      result.value = CertifyProjected(OuterProductFeatures(data.rows), *net,
                                      true, flattened, excluded, config);
      break;
    }
    case Task::kRegression:
      if (data.labeled()) {
        result.value = CertifyRegression(data, *points, config);
      }
      break;
    case Task::kPca:
      result.value = CertifyPca(data, *points, config);
      break;
  }
  return result;
}

}  // namespace hptr
