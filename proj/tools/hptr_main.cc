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

// Command-line front end: gen, certify, score, margin, run, verify-dp, sweep
// and report. Results go to stdout as JSON unless --out is given.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "hptr/datagen.h"
#include "hptr/direction_net.h"
#include "hptr/experiment.h"
#include "hptr/hptr.h"
#include "hptr/resilience.h"
#include "hptr/scores.h"
#include "hptr/serialization.h"

namespace hptr {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitResource = 3;

int ExitCode(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kOk:
      return kExitOk;
    case absl::StatusCode::kResourceExhausted:
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kPermissionDenied:
      return kExitResource;
    default:
      return kExitValidation;
  }
}

int Fail(const absl::Status& status) {
  std::cerr << "hptr: " << status.message() << "\n";
  return ExitCode(status);
}

absl::StatusOr<Eigen::VectorXd> ParseVector(const std::string& text) {
  std::vector<double> values;
  for (absl::string_view field : absl::StrSplit(text, ',', absl::SkipEmpty())) {
    double v;
    if (!absl::SimpleAtod(field, &v)) {
      return absl::InvalidArgumentError(
          absl::StrCat("invalid-parameter: not a number list '", text, "'"));
    }
    values.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), values.size());
}

absl::Status Emit(const Json& json, const std::string& out) {
  const std::string text = json.dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return absl::OkStatus();
  }
  return WriteTextFile(out, text);
}

#define RETURN_IF_ERROR(expr)                  \
  do {                                         \
    absl::Status _status = (expr);             \
    if (!_status.ok()) return _status;         \
  } while (0)

#define ASSIGN_OR_RETURN(lhs, expr)            \
  auto lhs##_or = (expr);                      \
  if (!lhs##_or.ok()) return lhs##_or.status(); \
  auto lhs = std::move(*lhs##_or)

// Flags mirroring MechanismConfig; each one, when given, overrides the file.
struct ConfigFlags {
  std::string config_path;
  std::string task;
  double alpha = 0, eps = 0, delta = 0, zeta = 0, sensitivity = 0, tau = 0;
  double rho = 0;
  std::string certificate;
  int net_size = 0, margin_cap = 0, points_per_axis = 0, sphere_size = 0;
  uint64_t net_seed = 0, seed = 0;
  std::string center, half_widths;
  std::vector<CLI::Option*> options;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* eps_opt = nullptr;
  CLI::Option* delta_opt = nullptr;
  CLI::Option* zeta_opt = nullptr;
  CLI::Option* sensitivity_opt = nullptr;
  CLI::Option* tau_opt = nullptr;
  CLI::Option* rho_opt = nullptr;
  CLI::Option* net_size_opt = nullptr;
  CLI::Option* margin_cap_opt = nullptr;
  CLI::Option* ppa_opt = nullptr;
  CLI::Option* sphere_opt = nullptr;
  CLI::Option* net_seed_opt = nullptr;
  CLI::Option* seed_opt = nullptr;

  void Register(CLI::App* app) {
    app->add_option("--config", config_path, "TOML configuration file");
    app->add_option("--task", task, "mean|euclidean-mean|lr|cov|pca");
    alpha_opt = app->add_option("--alpha", alpha, "corruption level");
    eps_opt = app->add_option("--eps", eps, "privacy epsilon");
    delta_opt = app->add_option("--delta", delta, "privacy delta");
    zeta_opt = app->add_option("--zeta", zeta, "failure probability");
    sensitivity_opt =
        app->add_option("--sensitivity", sensitivity, "proposed sensitivity");
    tau_opt = app->add_option("--tau", tau, "score threshold");
    rho_opt = app->add_option("--rho", rho,
                              "resilience level used to propose sensitivity "
                              "and threshold");
    app->add_option("--certificate", certificate,
                    "resilience certificate whose rho1 proposes sensitivity "
                    "and threshold");
    net_size_opt = app->add_option("--net-size", net_size, "score net size");
    net_seed_opt = app->add_option("--net-seed", net_seed, "score net seed");
    seed_opt = app->add_option("--seed", seed, "randomness seed");
    margin_cap_opt =
        app->add_option("--margin-cap", margin_cap, "largest margin searched");
    ppa_opt = app->add_option("--points-per-axis", points_per_axis,
                              "grid points per axis");
    sphere_opt = app->add_option("--sphere-size", sphere_size,
                                 "candidate directions for pca");
    app->add_option("--center", center, "grid center, comma separated");
    app->add_option("--half-widths", half_widths,
                    "grid half widths, comma separated");
  }

  // Loads the file (if any), applies the flags, and proposes sensitivity and
  // threshold from --rho or --certificate when they were not given.
  absl::StatusOr<MechanismConfig> Resolve(int n) const {
    MechanismConfig config;
    if (!config_path.empty()) {
      ASSIGN_OR_RETURN(json, ReadTomlFile(config_path));
      ASSIGN_OR_RETURN(parsed, ConfigFromJson(json));
      config = parsed;
    }
    if (!task.empty()) {
      ASSIGN_OR_RETURN(t, ParseTask(task));
      config.task = t;
    }
    if (alpha_opt->count()) config.alpha = alpha;
    if (eps_opt->count()) config.eps = eps;
    if (delta_opt->count()) config.delta = delta;
    if (zeta_opt->count()) config.zeta = zeta;
    if (net_size_opt->count()) config.net_size = net_size;
    if (net_seed_opt->count()) config.net_seed = net_seed;
    if (seed_opt->count()) config.seed = seed;
    if (margin_cap_opt->count()) config.margin_cap = margin_cap;
    if (ppa_opt->count()) config.grid.points_per_axis = points_per_axis;
    if (sphere_opt->count()) config.grid.sphere_size = sphere_size;
    if (!center.empty()) {
      ASSIGN_OR_RETURN(c, ParseVector(center));
      config.grid.center = c;
    }
    if (!half_widths.empty()) {
      ASSIGN_OR_RETURN(h, ParseVector(half_widths));
      config.grid.half_widths = h;
    }
    std::optional<double> proposal_rho;
    if (rho_opt->count()) proposal_rho = rho;
    if (!certificate.empty()) {
      ASSIGN_OR_RETURN(json, ReadJsonFile(certificate));
      ASSIGN_OR_RETURN(cert, CertificateFromJson(json));
      const int slot = config.task == Task::kPca ? 1 : 0;
      if (!cert.rho[slot]) {
        return absl::InvalidArgumentError(
            "schema-error: certificate lacks the needed rho");
      }
      proposal_rho = *cert.rho[slot];
    }
    if (proposal_rho) {
      ASSIGN_OR_RETURN(p, ProposeFromRho(config.task, *proposal_rho,
                                         config.alpha, n));
      config.sensitivity = p.sensitivity;
      config.tau = p.tau;
    }
    if (sensitivity_opt->count()) config.sensitivity = sensitivity;
    if (tau_opt->count()) config.tau = tau;
    RETURN_IF_ERROR(ValidateConfig(config));
    return config;
  }
};

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string family = "gaussian";
  std::string family_json;
  int d = 2;
  int n = 100;
  uint64_t seed = 0;
  std::string out;
  double fraction = 0.0;
  std::string adversary = "identity";
  std::string direction;
  double magnitude = 10.0;
  double factor = 3.0;
};

absl::Status RunGen(const GenArgs& args) {
  Json family_json{{"name", args.family}, {"d", args.d}};
  if (!args.family_json.empty()) {
    family_json = Json::parse(args.family_json, nullptr, false);
    if (family_json.is_discarded()) {
      return absl::InvalidArgumentError("schema-error: --family-json is not JSON");
    }
  }
  ASSIGN_OR_RETURN(spec, FamilyFromJson(family_json));
  ASSIGN_OR_RETURN(data, Generate(spec, args.n, args.seed));
  if (args.fraction > 0.0) {
    CorruptionSpec corruption;
    corruption.fraction = args.fraction;
    ASSIGN_OR_RETURN(kind, ParseAdversary(args.adversary));
    if (kind == AdversaryKind::kGreedyScore) {
      return absl::InvalidArgumentError(
          "invalid-parameter: greedy-score corruption is available in sweeps");
    }
    corruption.adversary = kind;
    corruption.magnitude = args.magnitude;
    corruption.factor = args.factor;
    corruption.seed = DeriveSeed(args.seed, 2);
    const int dim = data.labeled() ? data.d() + 1 : data.d();
    if (args.direction.empty()) {
      corruption.direction = Eigen::VectorXd::Unit(dim, 0);
    } else {
      ASSIGN_OR_RETURN(v, ParseVector(args.direction));
      corruption.direction = v;
    }
    ASSIGN_OR_RETURN(corrupted, CorruptDataset(data, corruption));
    data = corrupted;
  }
  if (args.out.empty()) {
    std::cout << DatasetToCsv(data);
    return absl::OkStatus();
  }
  return SaveDataset(args.out, data, spec);
}

struct CertifyArgs {
  std::string data;
  std::string task = "mean";
  double alpha = 0.1;
  std::string reference;
  int net_size = 64;
  uint64_t net_seed = 0;
  std::string subset_mode = "extremal";
  uint64_t subset_seed = 0;
  std::string out;
};

absl::StatusOr<Reference> ResolveReference(const std::string& reference_path,
                                           const std::string& data_path) {
  if (!reference_path.empty()) {
    ASSIGN_OR_RETURN(json, ReadJsonFile(reference_path));
    return ReferenceFromJson(json);
  }
  ASSIGN_OR_RETURN(sidecar, ReadJsonFile(data_path + ".json"));
  if (!sidecar.contains("spec") || sidecar["spec"].is_null()) {
    return absl::InvalidArgumentError(
        "invalid-parameter: no --reference and no family in the sidecar");
  }
  ASSIGN_OR_RETURN(spec, FamilyFromJson(sidecar["spec"]));
  return FamilyReference(spec);
}

absl::Status RunCertify(const CertifyArgs& args) {
  ASSIGN_OR_RETURN(data, LoadDataset(args.data));
  ASSIGN_OR_RETURN(task, ParseTask(args.task));
  ASSIGN_OR_RETURN(reference, ResolveReference(args.reference, args.data));
  ASSIGN_OR_RETURN(mode, ParseSubsetMode(args.subset_mode));
  mode.seed = args.subset_seed;
  ASSIGN_OR_RETURN(net, MakeDirectionNet(task == Task::kCovariance
                                             ? NetKind::kSymmetricMatrix
                                             : NetKind::kVector,
                                         data.d(), args.net_size,
                                         args.net_seed));
  ASSIGN_OR_RETURN(cert,
                   CertifyResilience(task, data, args.alpha, reference, net, mode));
  return Emit(CertificateToJson(cert), args.out);
}

absl::Status RunScore(const ConfigFlags& flags, const std::string& data_path,
                      const std::string& theta_text, const std::string& out) {
  ASSIGN_OR_RETURN(data, LoadDataset(data_path));
  ASSIGN_OR_RETURN(config, flags.Resolve(data.n()));
  ASSIGN_OR_RETURN(theta, ParseVector(theta_text));
  if (theta.size() != ParameterDimension(config.task, data.d())) {
    return absl::InvalidArgumentError(
        "shape-error: --theta has the wrong dimension");
  }
  ASSIGN_OR_RETURN(scorer, TaskScorer::Build(data, config));
  return Emit(Json{{"task", TaskName(config.task)}, {"score", scorer(theta)}},
              out);
}

absl::Status RunMargin(const ConfigFlags& flags, const std::string& data_path,
                       const std::string& mode_name,
                       const std::string& alphabet_text, const std::string& out) {
  ASSIGN_OR_RETURN(data, LoadDataset(data_path));
  ASSIGN_OR_RETURN(config, flags.Resolve(data.n()));
  ASSIGN_OR_RETURN(mode, ParseMarginMode(mode_name));
  MarginResult result;
  if (mode == MarginMode::kExact) {
    ASSIGN_OR_RETURN(alphabet, ParseVector(alphabet_text));
    std::vector<double> letters(alphabet.data(),
                                alphabet.data() + alphabet.size());
    ASSIGN_OR_RETURN(exact, MarginExact(data, config, letters,
                                        config.EffectiveMarginCap()));
    result = exact;
  } else {
    if (config.task != Task::kPca && config.grid.center.size() == 0) {
      ASSIGN_OR_RETURN(grid, AutoGrid(data, config));
      config.grid = grid;
    }
    result = MarginCertified(data, config);
  }
  Json json{{"margin", result.value},
            {"mode", MarginModeName(result.mode)},
            {"cap", result.cap},
            {"k_star", config.k_star()}};
  if (result.witness) json["witness"] = *result.witness;
  return Emit(json, out);
}

struct RunArgs {
  std::string data;
  std::string mode = "certified";
  std::string alphabet;
  int n = 0;
  std::string out;
};

absl::Status RunRun(const ConfigFlags& flags, const RunArgs& args) {
  ASSIGN_OR_RETURN(mode, ParseMarginMode(args.mode));
  if (args.data.empty()) {
    // Reproduce a sweep trial: the config file is the sweep table.
    if (flags.config_path.empty()) {
      return absl::InvalidArgumentError(
          "invalid-parameter: run needs --data or a sweep --config");
    }
    ASSIGN_OR_RETURN(json, ReadTomlFile(flags.config_path));
    ASSIGN_OR_RETURN(sweep, SweepFromJson(json));
    const int n = args.n > 0 ? args.n : sweep.ns.front();
    const double alpha =
        flags.alpha_opt->count() ? flags.alpha : sweep.alphas.front();
    const double eps = flags.eps_opt->count() ? flags.eps : sweep.epss.front();
    if (flags.seed_opt->count() == 0) {
      return absl::InvalidArgumentError(
          "invalid-parameter: reproducing a trial needs --seed");
    }
    if (flags.sensitivity_opt->count()) sweep.trial.sensitivity = flags.sensitivity;
    if (flags.tau_opt->count()) sweep.trial.tau = flags.tau;
    ASSIGN_OR_RETURN(outcome,
                     RunTrial(sweep.trial, n, alpha, eps, flags.seed));
    Json transcript = TranscriptToJson(outcome.transcript);
    transcript["error"] = outcome.error ? Json(*outcome.error) : Json(nullptr);
    return Emit(transcript, args.out);
  }
  ASSIGN_OR_RETURN(data, LoadDataset(args.data));
  ASSIGN_OR_RETURN(config, flags.Resolve(data.n()));
  Rng rng(config.seed);
  std::vector<double> letters;
  if (mode == MarginMode::kExact) {
    ASSIGN_OR_RETURN(alphabet, ParseVector(args.alphabet));
    letters.assign(alphabet.data(), alphabet.data() + alphabet.size());
  }
  ASSIGN_OR_RETURN(transcript,
                   Run(data, config, mode, rng,
                       mode == MarginMode::kExact ? &letters : nullptr));
  return Emit(TranscriptToJson(transcript), args.out);
}

absl::Status RunVerifyDp(const ConfigFlags& flags, const std::string& alphabet_text,
                         int n, const std::string& what, const std::string& out) {
  ASSIGN_OR_RETURN(config, flags.Resolve(n));
  ASSIGN_OR_RETURN(alphabet, ParseVector(alphabet_text));
  ASSIGN_OR_RETURN(universe,
                   FiniteUniverse::Create(std::vector<double>(
                                              alphabet.data(),
                                              alphabet.data() + alphabet.size()),
                                          n));
  if (config.grid.center.size() == 0) {
    return absl::InvalidArgumentError(
        "invalid-parameter: verify-dp needs a pinned grid (--center, "
        "--half-widths)");
  }
  absl::StatusOr<DpReport> report =
      what == "release" ? VerifyReleaseOnUniverse(config, universe)
      : what == "full"
          ? VerifyHptrOnUniverse(config, universe)
          : absl::StatusOr<DpReport>(absl::InvalidArgumentError(
                "invalid-parameter: --mechanism must be full or release"));
  if (!report.ok()) return report.status();
  return Emit(DpReportToJson(*report), out);
}

absl::Status RunSweep(const std::string& config_path, const std::string& output,
                      CLI::Option* seed_opt, uint64_t seed) {
  ASSIGN_OR_RETURN(json, ReadTomlFile(config_path));
  ASSIGN_OR_RETURN(spec, SweepFromJson(json));
  if (!output.empty()) spec.output = output;
  if (seed_opt->count()) spec.seed = seed;
  ASSIGN_OR_RETURN(rows, RunExperiment(spec));
  const std::string csv = RowsToCsv(rows, /*with_header=*/true);
  if (spec.output.empty()) {
    std::cout << csv;
    return absl::OkStatus();
  }
  return WriteTextFile(spec.output, csv);
}

absl::Status RunReport(const std::string& csv_path, const std::string& json_out,
                       const std::string& table_out) {
  ASSIGN_OR_RETURN(text, ReadTextFile(csv_path));
  ASSIGN_OR_RETURN(report, EmitReport(text));
  if (!table_out.empty()) RETURN_IF_ERROR(WriteTextFile(table_out, report.table));
  return Emit(report.json, json_out);
}

int Main(int argc, char** argv) {
  CLI::App app{"Private robust estimation by propose-test-release"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
  gen_cmd->add_option("--family", gen.family, "family name");
  gen_cmd->add_option("--family-json", gen.family_json,
                      "family as a JSON object (overrides --family, --d)");
  gen_cmd->add_option("--d", gen.d, "dimension");
  gen_cmd->add_option("--n", gen.n, "records")->required();
  gen_cmd->add_option("--seed", gen.seed, "seed");
  gen_cmd->add_option("--out", gen.out, "CSV path (sidecar at <out>.json)");
  gen_cmd->add_option("--corrupt-fraction", gen.fraction, "corrupted fraction");
  gen_cmd->add_option("--adversary", gen.adversary, "adversary kind");
  gen_cmd->add_option("--direction", gen.direction, "adversary direction");
  gen_cmd->add_option("--magnitude", gen.magnitude, "mean-shift magnitude");
  gen_cmd->add_option("--factor", gen.factor, "variance-inflate factor");

  CertifyArgs certify;
  CLI::App* certify_cmd =
      app.add_subcommand("certify", "certify resilience of a dataset");
  certify_cmd->add_option("--data", certify.data, "dataset CSV")->required();
  certify_cmd->add_option("--task", certify.task, "task");
  certify_cmd->add_option("--alpha", certify.alpha, "corruption level");
  certify_cmd->add_option("--reference", certify.reference,
                          "reference JSON (default: the sidecar family)");
  certify_cmd->add_option("--net-size", certify.net_size, "net size");
  certify_cmd->add_option("--net-seed", certify.net_seed, "net seed");
  certify_cmd->add_option("--subset-mode", certify.subset_mode,
                          "exhaustive|extremal|sampled(count)");
  certify_cmd->add_option("--subset-seed", certify.subset_seed,
                          "seed of sampled subsets");
  certify_cmd->add_option("--out", certify.out, "output JSON path");

  ConfigFlags score_flags;
  std::string score_data, score_theta, score_out;
  CLI::App* score_cmd = app.add_subcommand("score", "evaluate the task score");
  score_flags.Register(score_cmd);
  score_cmd->add_option("--data", score_data, "dataset CSV")->required();
  score_cmd->add_option("--theta", score_theta, "candidate, comma separated")
      ->required();
  score_cmd->add_option("--out", score_out, "output JSON path");

  ConfigFlags margin_flags;
  std::string margin_data, margin_mode = "certified", margin_alphabet,
                           margin_out;
  CLI::App* margin_cmd = app.add_subcommand("margin", "compute the safety margin");
  margin_flags.Register(margin_cmd);
  margin_cmd->add_option("--data", margin_data, "dataset CSV")->required();
  margin_cmd->add_option("--mode", margin_mode, "exact|certified");
  margin_cmd->add_option("--alphabet", margin_alphabet,
                         "record alphabet for exact mode");
  margin_cmd->add_option("--out", margin_out, "output JSON path");

  ConfigFlags run_flags;
  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "run the full mechanism");
  run_flags.Register(run_cmd);
  run_cmd->add_option("--data", run.data, "dataset CSV");
  run_cmd->add_option("--mode", run.mode, "exact|certified");
  run_cmd->add_option("--alphabet", run.alphabet, "alphabet for exact mode");
  run_cmd->add_option("--n", run.n, "records when reproducing a sweep trial");
  run_cmd->add_option("--out", run.out, "output JSON path");

  ConfigFlags verify_flags;
  std::string verify_alphabet, verify_mechanism = "full", verify_out;
  int verify_n = 3;
  CLI::App* verify_cmd =
      app.add_subcommand("verify-dp", "exact privacy check on a finite universe");
  verify_flags.Register(verify_cmd);
  verify_cmd->add_option("--alphabet", verify_alphabet, "record alphabet")
      ->required();
  verify_cmd->add_option("--n", verify_n, "records per dataset");
  verify_cmd->add_option("--mechanism", verify_mechanism, "full|release");
  verify_cmd->add_option("--out", verify_out, "output JSON path");

  std::string sweep_config, sweep_output;
  uint64_t sweep_seed = 0;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a parameter sweep");
  sweep_cmd->add_option("--config", sweep_config, "sweep TOML")->required();
  sweep_cmd->add_option("--output", sweep_output, "CSV path");
  CLI::Option* sweep_seed_opt =
      sweep_cmd->add_option("--seed", sweep_seed, "sweep seed");

  std::string report_csv, report_json, report_table;
  CLI::App* report_cmd = app.add_subcommand("report", "summarize a sweep CSV");
  report_cmd->add_option("--csv", report_csv, "sweep CSV")->required();
  report_cmd->add_option("--out", report_json, "summary JSON path");
  report_cmd->add_option("--table", report_table, "gnuplot table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& error) {
    const int code = app.exit(error);
    return code == 0 ? kExitOk : kExitValidation;
  }

  absl::Status status;
  if (*gen_cmd) {
    status = RunGen(gen);
  } else if (*certify_cmd) {
    status = RunCertify(certify);
  } else if (*score_cmd) {
    status = RunScore(score_flags, score_data, score_theta, score_out);
  } else if (*margin_cmd) {
    status = RunMargin(margin_flags, margin_data, margin_mode, margin_alphabet,
                       margin_out);
  } else if (*run_cmd) {
    status = RunRun(run_flags, run);
  } else if (*verify_cmd) {
    status = RunVerifyDp(verify_flags, verify_alphabet, verify_n,
                         verify_mechanism, verify_out);
  } else if (*sweep_cmd) {
    status = RunSweep(sweep_config, sweep_output, sweep_seed_opt, sweep_seed);
  } else if (*report_cmd) {
    status = RunReport(report_csv, report_json, report_table);
  }
  return status.ok() ? kExitOk : Fail(status);
}

}  // namespace
}  // namespace hptr

int main(int argc, char** argv) { return hptr::Main(argc, argv); }
