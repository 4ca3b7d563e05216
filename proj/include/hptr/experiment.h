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

#ifndef HPTR_EXPERIMENT_H_
#define HPTR_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "hptr/datagen.h"
#include "hptr/hptr.h"
#include "hptr/resilience.h"
#include "hptr/serialization.h"

namespace hptr {

// Settings shared by every trial of a sweep, and by `hptr run` when it
// generates its own data.
struct TrialSpec {
  // Task, delta, zeta, grid resolution and net come from here; alpha and eps
  // are overwritten per cell.
  MechanismConfig base;
  FamilySpec family;
  // Resilience calibration used to propose sensitivity and threshold.
  Calibration calibration;
  // Fixed values that bypass the proposal.
  std::optional<double> sensitivity;
  std::optional<double> tau;
  MarginMode margin_mode = MarginMode::kCertified;
  // Corruption applied to the clean sample; fraction 0 leaves it untouched.
  double corruption_fraction = 0.0;
  AdversaryKind adversary = AdversaryKind::kIdentity;
  double magnitude = 10.0;
  double factor = 3.0;
  int adversary_budget = 200;
  // Record-space direction of the corruption; the first axis when empty.
  Eigen::VectorXd corruption_direction;
};

struct SweepSpec {
  TrialSpec trial;
  std::vector<int> ns;
  std::vector<double> alphas;
  std::vector<double> epss;
  int trials = 1;
  uint64_t seed = 0;
  std::string output;
  // Off by default so that reruns give byte-identical CSV.
  bool record_runtime = false;
};

absl::Status ValidateSweep(const SweepSpec& spec);

// Reads the sweep table: task, family, n, alpha, eps, trials, seed, output,
// plus optional delta, zeta, net_size, net_seed, points_per_axis,
// sphere_size, margin_mode, family_class, rho_constant, sensitivity, tau,
// record_runtime and a [corruption] table {fraction, adversary, magnitude,
// factor, budget, direction}.
absl::StatusOr<SweepSpec> SweepFromJson(const Json& json);

struct ReportRow {
  std::string task;
  std::string family;
  int n = 0;
  int d = 0;
  double alpha = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  int trial = 0;
  bool passed = false;
  // Present iff passed.
  std::optional<double> error;
  int margin = 0;
  double runtime_ms = 0.0;
  uint64_t seed = 0;
};

inline constexpr std::string_view kReportHeader =
    "task,family,n,d,alpha,eps,delta,trial,passed,error,margin,runtime_ms,seed";

// Everything one trial produces.
struct TrialOutcome {
  Dataset data;
  MechanismConfig config;
  Transcript transcript;
  std::optional<double> error;
};

// One trial from its seed: the clean sample uses DeriveSeed(seed, 1), the
// corruption DeriveSeed(seed, 2), and the mechanism Rng(seed).
absl::StatusOr<TrialOutcome> RunTrial(const TrialSpec& spec, int n,
                                      double alpha, double eps, uint64_t seed);

// Estimate of the reference in the task's candidate coordinates.
Eigen::VectorXd ReferenceParameter(Task task, const Reference& reference);

// Per-trial seed of a sweep.
uint64_t TrialSeed(uint64_t sweep_seed, int64_t cell, int trial);

// One row per (cell, trial), cells ordered by n, then alpha, then eps.
// Failing trials become passed=false rows.
absl::StatusOr<std::vector<ReportRow>> RunExperiment(const SweepSpec& spec);

std::string RowsToCsv(const std::vector<ReportRow>& rows, bool with_header);
// Fails with parse-error naming the 1-based line.
absl::StatusOr<std::vector<ReportRow>> RowsFromCsv(std::string_view text);

struct CellSummary {
  std::string task;
  std::string family;
  int n = 0;
  int d = 0;
  double alpha = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  int trials = 0;
  int passes = 0;
  double pass_rate = 0.0;
  // Nearest-rank quantiles of the error over passing trials.
  std::optional<double> q10;
  std::optional<double> median;
  std::optional<double> q90;
};

// Nearest-rank quantile: the ceil(q N)-th smallest value (q in (0, 1]).
double NearestRank(std::vector<double> values, double q);

absl::StatusOr<std::vector<CellSummary>> SummarizeRows(
    const std::vector<ReportRow>& rows);

struct Report {
  Json json;
  std::string table;
};

absl::StatusOr<Report> EmitReport(std::string_view csv_text);

}  // namespace hptr

#endif  // HPTR_EXPERIMENT_H_
