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

#include "hptr/experiment.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "hptr/kernels.h"
#include "hptr/scores.h"
#include "string_compat.h"

namespace hptr {
namespace {

absl::Status Invalid(absl::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("invalid-parameter: ", what));
}

absl::Status SchemaError(absl::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("schema-error: ", what));
}

absl::Status ParseError(int line, absl::string_view what) {
  return absl::InvalidArgumentError(
      absl::StrCat("parse-error: line ", line, ": ", what));
}

template <typename T>
absl::StatusOr<std::vector<T>> ListOf(const Json& json, absl::string_view key) {
  auto it = json.find(std::string(key));
  if (it == json.end()) return SchemaError(absl::StrCat("missing '", key, "'"));
  std::vector<T> out;
  const Json list = it->is_array() ? *it : Json::array({*it});
  for (const Json& item : list) {
    if (!item.is_number()) {
      return SchemaError(absl::StrCat("'", key, "' must hold numbers"));
    }
    if constexpr (std::is_integral_v<T>) {
      if (!item.is_number_integer()) {
        return SchemaError(absl::StrCat("'", key, "' must hold integers"));
      }
    }
    out.push_back(item.get<T>());
  }
  return out;
}

double Number(const Json& json, absl::string_view key, double fallback) {
  auto it = json.find(std::string(key));
  return it != json.end() && it->is_number() ? it->get<double>() : fallback;
}

absl::Status ExpectKnown(const Json& json, const std::set<std::string>& known,
                         absl::string_view where) {
  for (auto it = json.begin(); it != json.end(); ++it) {
    if (known.count(it.key()) == 0) {
      return SchemaError(absl::StrCat("unknown key '", it.key(), "' in ", where));
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status ValidateSweep(const SweepSpec& spec) {
  if (spec.trials < 1) return Invalid("trials must be >= 1");
  if (spec.ns.empty() || spec.alphas.empty() || spec.epss.empty()) {
    return Invalid("sweep grid is empty");
  }
  for (int n : spec.ns) {
    if (n < 2) return Invalid("n must be >= 2");
  }
  for (double a : spec.alphas) {
    if (!(a > 0.0 && a < 0.5)) return Invalid("alpha not in (0, 1/2)");
  }
  for (double e : spec.epss) {
    if (!(e > 0.0)) return Invalid("eps must be positive");
  }
  if (!(spec.trial.corruption_fraction >= 0.0 &&
        spec.trial.corruption_fraction < 0.5)) {
    return Invalid("corruption fraction not in [0, 1/2)");
  }
  return ValidateFamily(spec.trial.family);
}

absl::StatusOr<SweepSpec> SweepFromJson(const Json& json) {
  if (!json.is_object()) return SchemaError("sweep must be a table");
  if (absl::Status s = ExpectKnown(
          json,
          {"task", "family", "n", "alpha", "eps", "trials", "seed", "output",
           "delta", "zeta", "net_size", "net_seed", "points_per_axis",
           "sphere_size", "margin_mode", "family_class", "rho_constant",
           "sensitivity", "tau", "record_runtime", "corruption"},
          "sweep");
      !s.ok()) {
    return s;
  }
  SweepSpec spec;
  MechanismConfig& base = spec.trial.base;
  if (!json.contains("task") || !json["task"].is_string()) {
    return SchemaError("missing 'task'");
  }
  absl::StatusOr<Task> task = ParseTask(json["task"].get<std::string>());
  if (!task.ok()) return SchemaError(task.status().message());
  base.task = *task;
  if (!json.contains("family")) return SchemaError("missing 'family'");
  absl::StatusOr<FamilySpec> family = FamilyFromJson(json["family"]);
  if (!family.ok()) return family.status();
  spec.trial.family = *family;

  absl::StatusOr<std::vector<int>> ns = ListOf<int>(json, "n");
  if (!ns.ok()) return ns.status();
  absl::StatusOr<std::vector<double>> alphas = ListOf<double>(json, "alpha");
  if (!alphas.ok()) return alphas.status();
  absl::StatusOr<std::vector<double>> epss = ListOf<double>(json, "eps");
  if (!epss.ok()) return epss.status();
  spec.ns = *ns;
  spec.alphas = *alphas;
  spec.epss = *epss;
  spec.trials = static_cast<int>(Number(json, "trials", 1));
  if (json.contains("seed")) {
    if (!json["seed"].is_number_integer()) return SchemaError("'seed' must be an integer");
    spec.seed = json["seed"].get<uint64_t>();
  }
  if (json.contains("output")) {
    if (!json["output"].is_string()) return SchemaError("'output' must be a string");
    spec.output = json["output"].get<std::string>();
  }
  base.delta = Number(json, "delta", base.delta);
  base.zeta = Number(json, "zeta", base.zeta);
  base.net_size = static_cast<int>(Number(json, "net_size", base.net_size));
  base.net_seed = static_cast<uint64_t>(Number(json, "net_seed", 0));
  base.grid.points_per_axis =
      static_cast<int>(Number(json, "points_per_axis", base.grid.points_per_axis));
  base.grid.sphere_size =
      static_cast<int>(Number(json, "sphere_size", base.grid.sphere_size));
  if (json.contains("margin_mode")) {
    absl::StatusOr<MarginMode> mode =
        ParseMarginMode(json["margin_mode"].get<std::string>());
    if (!mode.ok()) return SchemaError(mode.status().message());
    spec.trial.margin_mode = *mode;
  }
  if (json.contains("family_class")) {
    absl::StatusOr<FamilyClass> cls =
        ParseFamilyClass(json["family_class"].get<std::string>());
    if (!cls.ok()) return SchemaError(cls.status().message());
    spec.trial.calibration.family = *cls;
  }
  spec.trial.calibration.constant = Number(json, "rho_constant", 1.0);
  spec.trial.calibration.zeta = base.zeta;
  if (json.contains("sensitivity")) {
    spec.trial.sensitivity = Number(json, "sensitivity", 0.0);
  }
  if (json.contains("tau")) spec.trial.tau = Number(json, "tau", 0.0);
  if (json.contains("record_runtime")) {
    if (!json["record_runtime"].is_boolean()) {
      return SchemaError("'record_runtime' must be a boolean");
    }
    spec.record_runtime = json["record_runtime"].get<bool>();
  }
  if (json.contains("corruption")) {
    const Json& c = json["corruption"];
    if (!c.is_object()) return SchemaError("'corruption' must be a table");
    if (absl::Status s = ExpectKnown(
            c,
            {"fraction", "adversary", "magnitude", "factor", "budget",
             "direction"},
            "corruption");
        !s.ok()) {
      return s;
    }
    spec.trial.corruption_fraction = Number(c, "fraction", 0.0);
    if (c.contains("adversary")) {
      absl::StatusOr<AdversaryKind> kind =
          ParseAdversary(c["adversary"].get<std::string>());
      if (!kind.ok()) return SchemaError(kind.status().message());
      spec.trial.adversary = *kind;
    }
    spec.trial.magnitude = Number(c, "magnitude", spec.trial.magnitude);
    spec.trial.factor = Number(c, "factor", spec.trial.factor);
    spec.trial.adversary_budget =
        static_cast<int>(Number(c, "budget", spec.trial.adversary_budget));
    if (c.contains("direction")) {
      absl::StatusOr<std::vector<double>> direction = ListOf<double>(c, "direction");
      if (!direction.ok()) return direction.status();
      spec.trial.corruption_direction =
          Eigen::Map<const Eigen::VectorXd>(direction->data(), direction->size());
    }
  }
  if (absl::Status s = ValidateSweep(spec); !s.ok()) return s;
  return spec;
}

Eigen::VectorXd ReferenceParameter(Task task, const Reference& reference) {
  switch (task) {
    case Task::kMean:
    case Task::kEuclideanMean:
      return reference.mean;
    case Task::kRegression:
      return reference.beta;
    case Task::kCovariance:
      return UpperFromSymmetric(reference.sigma);
    case Task::kPca: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reference.sigma);
      return eig.eigenvectors().col(reference.sigma.rows() - 1);
    }
  }
  return {};
}

uint64_t TrialSeed(uint64_t sweep_seed, int64_t cell, int trial) {
  return DeriveSeed(DeriveSeed(sweep_seed, static_cast<uint64_t>(cell)),
                    static_cast<uint64_t>(trial));
}

absl::StatusOr<TrialOutcome> RunTrial(const TrialSpec& spec, int n,
                                      double alpha, double eps, uint64_t seed) {
  TrialOutcome outcome;
  absl::StatusOr<Dataset> clean = Generate(spec.family, n, DeriveSeed(seed, 1));
  if (!clean.ok()) return clean.status();
  const Reference reference = FamilyReference(spec.family);

  MechanismConfig config = spec.base;
  config.alpha = alpha;
  config.eps = eps;
  config.seed = seed;
  absl::StatusOr<Proposal> proposal =
      ProposeParams(config.task, spec.calibration, alpha, n);
  if (!proposal.ok()) return proposal.status();
  config.sensitivity = spec.sensitivity.value_or(proposal->sensitivity);
  config.tau = config.task == Task::kPca
                   ? std::nullopt
                   : std::optional<double>(spec.tau ? *spec.tau
                                                    : *proposal->tau);

  Dataset data = *std::move(clean);
  if (spec.corruption_fraction > 0.0) {
    CorruptionSpec corruption;
    corruption.fraction = spec.corruption_fraction;
    corruption.adversary = spec.adversary;
    corruption.magnitude = spec.magnitude;
    corruption.factor = spec.factor;
    corruption.budget = spec.adversary_budget;
    corruption.seed = DeriveSeed(seed, 2);
    const int dim = data.labeled() ? data.d() + 1 : data.d();
    if (spec.corruption_direction.size() == 0) {
      corruption.direction = Eigen::VectorXd::Unit(dim, 0);
    } else if (spec.corruption_direction.size() == dim) {
      corruption.direction = spec.corruption_direction.normalized();
    } else {
      return Invalid("corruption direction has the wrong length");
    }
    DatasetScore score_fn;
    if (spec.adversary == AdversaryKind::kGreedyScore) {
      const Eigen::VectorXd target = ReferenceParameter(config.task, reference);
      score_fn = [config, target](const Dataset& candidate) {
        absl::StatusOr<TaskScorer> scorer =
            TaskScorer::Build(candidate, config, Execution::kSerial);
        if (!scorer.ok()) return std::numeric_limits<double>::infinity();
        return (*scorer)(target);
      };
    }
    absl::StatusOr<Dataset> corrupted = CorruptDataset(data, corruption, score_fn);
    if (!corrupted.ok()) return corrupted.status();
    data = *std::move(corrupted);
  }

  Rng rng(seed);
  absl::StatusOr<Transcript> transcript =
      Run(data, config, spec.margin_mode, rng);
  if (!transcript.ok()) return transcript.status();
  if (transcript->output.has_value()) {
    absl::StatusOr<DistanceResult> distance = TrueDistance(
        config.task,
        CandidateToEstimate(config.task, *transcript->output, data.d()),
        reference);
    if (!distance.ok()) return distance.status();
    outcome.error = distance->value;
  }
  outcome.data = std::move(data);
  outcome.config = config;
  outcome.transcript = *std::move(transcript);
  return outcome;
}

absl::StatusOr<std::vector<ReportRow>> RunExperiment(const SweepSpec& spec) {
  if (absl::Status s = ValidateSweep(spec); !s.ok()) return s;
  struct Job {
    int64_t cell;
    int n;
    double alpha;
    double eps;
    int trial;
  };
  std::vector<Job> jobs;
  int64_t cell = 0;
  for (int n : spec.ns) {
    for (double alpha : spec.alphas) {
      for (double eps : spec.epss) {
        for (int t = 0; t < spec.trials; ++t) {
          jobs.push_back({cell, n, alpha, eps, t});
        }
        ++cell;
      }
    }
  }
  const std::string task(TaskName(spec.trial.base.task));
  const std::string family(FamilyName(spec.trial.family));
  const int d = FamilyDimension(spec.trial.family);
  std::vector<ReportRow> rows(jobs.size());
  ParallelFor(
      static_cast<int64_t>(jobs.size()),
      [&](int64_t i) {
        const Job& job = jobs[i];
        ReportRow& row = rows[i];
        row.task = task;
        row.family = family;
        row.n = job.n;
        row.d = d;
        row.alpha = job.alpha;
        row.eps = job.eps;
        row.delta = spec.trial.base.delta;
        row.trial = job.trial;
        row.seed = TrialSeed(spec.seed, job.cell, job.trial);
        const auto start = std::chrono::steady_clock::now();
        absl::StatusOr<TrialOutcome> outcome =
            RunTrial(spec.trial, job.n, job.alpha, job.eps, row.seed);
        const auto stop = std::chrono::steady_clock::now();
        if (spec.record_runtime) {
          row.runtime_ms =
              std::chrono::duration<double, std::milli>(stop - start).count();
        }
        if (!outcome.ok()) return;
        row.margin = outcome->transcript.margin;
        row.passed = outcome->error.has_value();
        row.error = outcome->error;
      },
      Execution::kParallel);
  return rows;
}

std::string RowsToCsv(const std::vector<ReportRow>& rows, bool with_header) {
  std::string out;
  if (with_header) absl::StrAppend(&out, AbslView(kReportHeader), "\n");
  for (const ReportRow& row : rows) {
    absl::StrAppend(&out, row.task, ",", row.family, ",", row.n, ",", row.d,
                    ",", FormatDouble(row.alpha), ",", FormatDouble(row.eps),
                    ",", FormatDouble(row.delta), ",", row.trial, ",",
                    row.passed ? "true" : "false", ",",
                    row.error ? FormatDouble(*row.error) : "", ",", row.margin,
                    ",", FormatDouble(row.runtime_ms), ",", row.seed, "\n");
  }
  return out;
}

absl::StatusOr<std::vector<ReportRow>> RowsFromCsv(std::string_view text) {
  std::vector<absl::string_view> lines = absl::StrSplit(AbslView(text), '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) return ParseError(1, "missing header");
  if (absl::StripTrailingAsciiWhitespace(lines[0]) != AbslView(kReportHeader)) {
    return ParseError(1, "header does not match the report schema");
  }
  std::vector<ReportRow> rows;
  for (size_t i = 1; i < lines.size(); ++i) {
    const int line = static_cast<int>(i + 1);
    std::vector<absl::string_view> f =
        absl::StrSplit(absl::StripTrailingAsciiWhitespace(lines[i]), ',');
    if (f.size() != 13) return ParseError(line, "expected 13 fields");
    ReportRow row;
    row.task = std::string(f[0]);
    row.family = std::string(f[1]);
    double error = 0.0;
    if (row.task.empty() || row.family.empty() ||
        !absl::SimpleAtoi(f[2], &row.n) || !absl::SimpleAtoi(f[3], &row.d) ||
        !absl::SimpleAtod(f[4], &row.alpha) ||
        !absl::SimpleAtod(f[5], &row.eps) ||
        !absl::SimpleAtod(f[6], &row.delta) ||
        !absl::SimpleAtoi(f[7], &row.trial) ||
        !absl::SimpleAtoi(f[10], &row.margin) ||
        !absl::SimpleAtod(f[11], &row.runtime_ms) ||
        !absl::SimpleAtoi(f[12], &row.seed)) {
      return ParseError(line, "malformed field");
    }
    if (f[8] == "true") {
      row.passed = true;
    } else if (f[8] != "false") {
      return ParseError(line, "passed must be true or false");
    }
    if (row.passed) {
      if (!absl::SimpleAtod(f[9], &error)) {
        return ParseError(line, "passed row needs an error value");
      }
      row.error = error;
    } else if (!f[9].empty()) {
      return ParseError(line, "error must be empty when the trial did not pass");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

double NearestRank(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  const double position = std::ceil(q * values.size() - 1e-9);
  const size_t rank = std::clamp<size_t>(static_cast<size_t>(position), 1,
                                         values.size());
  return values[rank - 1];
}

absl::StatusOr<std::vector<CellSummary>> SummarizeRows(
    const std::vector<ReportRow>& rows) {
  using Key = std::tuple<std::string, std::string, int, int, double, double,
                         double>;
  std::map<Key, size_t> index;
  std::vector<CellSummary> cells;
  std::vector<std::vector<double>> errors;
  for (const ReportRow& row : rows) {
    const Key key{row.task, row.family, row.n, row.d,
                  row.alpha, row.eps, row.delta};
    auto [it, inserted] = index.emplace(key, cells.size());
    if (inserted) {
      CellSummary cell;
      cell.task = row.task;
      cell.family = row.family;
      cell.n = row.n;
      cell.d = row.d;
      cell.alpha = row.alpha;
      cell.eps = row.eps;
      cell.delta = row.delta;
      cells.push_back(cell);
      errors.emplace_back();
    }
    CellSummary& cell = cells[it->second];
    ++cell.trials;
    if (row.passed) {
      ++cell.passes;
      errors[it->second].push_back(*row.error);
    }
  }
  for (size_t c = 0; c < cells.size(); ++c) {
    cells[c].pass_rate =
        static_cast<double>(cells[c].passes) / cells[c].trials;
    if (!errors[c].empty()) {
      cells[c].q10 = NearestRank(errors[c], 0.1);
      cells[c].median = NearestRank(errors[c], 0.5);
      cells[c].q90 = NearestRank(errors[c], 0.9);
    }
  }
  return cells;
}

absl::StatusOr<Report> EmitReport(std::string_view csv_text) {
  absl::StatusOr<std::vector<ReportRow>> rows = RowsFromCsv(csv_text);
  if (!rows.ok()) return rows.status();
  absl::StatusOr<std::vector<CellSummary>> cells = SummarizeRows(*rows);
  if (!cells.ok()) return cells.status();
  Report report;
  report.json = Json{{"cells", Json::array()}};
  report.table =
      "# task family n d alpha eps delta trials pass_rate q10 median q90\n";
  auto optional_json = [](const std::optional<double>& v) {
    return v ? Json(*v) : Json(nullptr);
  };
  auto optional_text = [](const std::optional<double>& v) {
    return v ? FormatDouble(*v) : std::string("NaN");
  };
  for (const CellSummary& cell : *cells) {
    report.json["cells"].push_back(Json{{"task", cell.task},
                                        {"family", cell.family},
                                        {"n", cell.n},
                                        {"d", cell.d},
                                        {"alpha", cell.alpha},
                                        {"eps", cell.eps},
                                        {"delta", cell.delta},
                                        {"trials", cell.trials},
                                        {"passes", cell.passes},
                                        {"pass_rate", cell.pass_rate},
                                        {"q10", optional_json(cell.q10)},
                                        {"median", optional_json(cell.median)},
                                        {"q90", optional_json(cell.q90)}});
    report.table += absl::StrJoin(
        {cell.task, cell.family, absl::StrCat(cell.n), absl::StrCat(cell.d),
         FormatDouble(cell.alpha), FormatDouble(cell.eps),
         FormatDouble(cell.delta), absl::StrCat(cell.trials),
         FormatDouble(cell.pass_rate), optional_text(cell.q10),
         optional_text(cell.median), optional_text(cell.q90)},
        " ");
    report.table += "\n";
  }
  return report;
}

}  // namespace hptr
