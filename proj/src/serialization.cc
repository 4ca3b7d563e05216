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

#include "hptr/serialization.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"
#include "toml.hpp"
#include "string_compat.h"

namespace hptr {
namespace {

absl::Status SchemaError(absl::string_view what) {
  return absl::InvalidArgumentError(absl::StrCat("schema-error: ", what));
}

#define HPTR_ASSIGN_OR_RETURN(lhs, expr)   \
  auto lhs##_or = (expr);                  \
  if (!lhs##_or.ok()) return lhs##_or.status(); \
  auto lhs = std::move(*lhs##_or)

Json VectorToJson(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Json MatrixToJson(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (int i = 0; i < m.rows(); ++i) out.push_back(VectorToJson(m.row(i)));
  return out;
}

absl::StatusOr<double> GetNumber(const Json& json, absl::string_view key) {
  if (!json.is_object()) return SchemaError("expected an object");
  auto it = json.find(std::string(key));
  if (it == json.end()) return SchemaError(absl::StrCat("missing '", key, "'"));
  if (!it->is_number()) {
    return SchemaError(absl::StrCat("'", key, "' must be a number"));
  }
  return it->get<double>();
}

absl::StatusOr<int64_t> GetInteger(const Json& json, absl::string_view key) {
  if (!json.is_object()) return SchemaError("expected an object");
  auto it = json.find(std::string(key));
  if (it == json.end()) return SchemaError(absl::StrCat("missing '", key, "'"));
  if (!it->is_number_integer()) {
    return SchemaError(absl::StrCat("'", key, "' must be an integer"));
  }
  return it->get<int64_t>();
}

absl::StatusOr<uint64_t> GetSeed(const Json& json, absl::string_view key) {
  auto it = json.find(std::string(key));
  if (it == json.end()) return SchemaError(absl::StrCat("missing '", key, "'"));
  if (it->is_number_unsigned()) return it->get<uint64_t>();
  if (it->is_number_integer() && it->get<int64_t>() >= 0) {
    return static_cast<uint64_t>(it->get<int64_t>());
  }
  return SchemaError(absl::StrCat("'", key, "' must be a non-negative integer"));
}

absl::StatusOr<std::string> GetString(const Json& json, absl::string_view key) {
  if (!json.is_object()) return SchemaError("expected an object");
  auto it = json.find(std::string(key));
  if (it == json.end()) return SchemaError(absl::StrCat("missing '", key, "'"));
  if (!it->is_string()) {
    return SchemaError(absl::StrCat("'", key, "' must be a string"));
  }
  return it->get<std::string>();
}

absl::StatusOr<Eigen::VectorXd> VectorFromJson(const Json& json,
                                               absl::string_view what) {
  if (!json.is_array()) {
    return SchemaError(absl::StrCat("'", what, "' must be an array"));
  }
  Eigen::VectorXd v(json.size());
  for (size_t i = 0; i < json.size(); ++i) {
    if (!json[i].is_number()) {
      return SchemaError(absl::StrCat("'", what, "' must hold numbers"));
    }
    v(i) = json[i].get<double>();
  }
  return v;
}

absl::StatusOr<Eigen::MatrixXd> MatrixFromJson(const Json& json,
                                               absl::string_view what) {
  if (!json.is_array()) {
    return SchemaError(absl::StrCat("'", what, "' must be an array of rows"));
  }
  const size_t rows = json.size();
  const size_t cols = rows == 0 ? 0 : json[0].size();
  Eigen::MatrixXd m(rows, cols);
  for (size_t i = 0; i < rows; ++i) {
    HPTR_ASSIGN_OR_RETURN(row, VectorFromJson(json[i], what));
    if (static_cast<size_t>(row.size()) != cols) {
      return SchemaError(absl::StrCat("'", what, "' rows differ in length"));
    }
    m.row(i) = row.transpose();
  }
  return m;
}

std::optional<const Json*> Find(const Json& json, absl::string_view key) {
  auto it = json.find(std::string(key));
  if (it == json.end() || it->is_null()) return std::nullopt;
  return &*it;
}

absl::Status RejectUnknown(const Json& json,
                           const std::set<std::string>& known,
                           absl::string_view where) {
  for (auto it = json.begin(); it != json.end(); ++it) {
    if (known.count(it.key()) == 0) {
      return SchemaError(
          absl::StrCat("unknown key '", it.key(), "' in ", where));
    }
  }
  return absl::OkStatus();
}

Json TomlNodeToJson(const toml::node& node) {
  if (const auto* table = node.as_table()) {
    Json out = Json::object();
    for (const auto& [key, value] : *table) {
      out[std::string(key.str())] = TomlNodeToJson(value);
    }
    return out;
  }
  if (const auto* array = node.as_array()) {
    Json out = Json::array();
    for (const auto& value : *array) out.push_back(TomlNodeToJson(value));
    return out;
  }
  if (const auto* v = node.as_integer()) return v->get();
  if (const auto* v = node.as_floating_point()) return v->get();
  if (const auto* v = node.as_boolean()) return v->get();
  if (const auto* v = node.as_string()) return v->get();
  return nullptr;
}

}  // namespace

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

Json PmfToJson(const DiscretePMF& pmf) {
  Json atoms = Json::array();
  for (const auto& [id, prob] : pmf.atoms) {
    atoms.push_back(id == kBottom ? Json::array({"BOTTOM", prob})
                                  : Json::array({id, prob}));
  }
  return Json{{"atoms", atoms}};
}

absl::StatusOr<DiscretePMF> PmfFromJson(const Json& json) {
  if (!json.is_object() || !json.contains("atoms") ||
      !json["atoms"].is_array()) {
    return SchemaError("pmf needs an 'atoms' array");
  }
  DiscretePMF pmf;
  for (const Json& atom : json["atoms"]) {
    if (!atom.is_array() || atom.size() != 2 || !atom[1].is_number()) {
      return SchemaError("atom must be [id, probability]");
    }
    int64_t id;
    if (atom[0].is_string() && atom[0].get<std::string>() == "BOTTOM") {
      id = kBottom;
    } else if (atom[0].is_number_integer()) {
      id = atom[0].get<int64_t>();
    } else {
      return SchemaError("atom id must be an integer or \"BOTTOM\"");
    }
    pmf.atoms.emplace_back(id, atom[1].get<double>());
  }
  if (absl::Status s = ValidatePmf(pmf); !s.ok()) return s;
  return pmf;
}

Json DpReportToJson(const DpReport& report) {
  return Json{{"pass", report.pass},
              {"eps", report.eps},
              {"delta", report.delta},
              {"worst_delta", report.worst_delta},
              {"worst_pair",
               {{"left", report.worst_pair.left},
                {"right", report.worst_pair.right},
                {"hamming", report.worst_pair.hamming}}}};
}

absl::StatusOr<DpReport> DpReportFromJson(const Json& json) {
  DpReport report;
  if (!json.is_object() || !json.contains("pass") || !json["pass"].is_boolean()) {
    return SchemaError("report needs a boolean 'pass'");
  }
  report.pass = json["pass"].get<bool>();
  HPTR_ASSIGN_OR_RETURN(eps, GetNumber(json, "eps"));
  HPTR_ASSIGN_OR_RETURN(delta, GetNumber(json, "delta"));
  HPTR_ASSIGN_OR_RETURN(worst, GetNumber(json, "worst_delta"));
  report.eps = eps;
  report.delta = delta;
  report.worst_delta = worst;
  if (!json.contains("worst_pair")) return SchemaError("missing 'worst_pair'");
  const Json& pair = json["worst_pair"];
  HPTR_ASSIGN_OR_RETURN(left, GetInteger(pair, "left"));
  HPTR_ASSIGN_OR_RETURN(right, GetInteger(pair, "right"));
  HPTR_ASSIGN_OR_RETURN(hamming, GetInteger(pair, "hamming"));
  report.worst_pair = {static_cast<int>(left), static_cast<int>(right),
                       static_cast<int>(hamming)};
  return report;
}

Json RobustMomentsToJson(const RobustMoments& moments) {
  return Json{{"mean", moments.mean}, {"var", moments.var},
              {"kept", moments.kept}};
}

Json NetToJson(const DirectionNet& net) {
  return Json{{"kind", NetKindName(net.kind)},
              {"seed", net.seed},
              {"size", net.size()},
              {"d", net.d}};
}

absl::StatusOr<DirectionNet> NetFromJson(const Json& json) {
  HPTR_ASSIGN_OR_RETURN(kind_name, GetString(json, "kind"));
  absl::StatusOr<NetKind> kind = ParseNetKind(kind_name);
  if (!kind.ok()) return SchemaError(kind.status().message());
  HPTR_ASSIGN_OR_RETURN(seed, GetSeed(json, "seed"));
  HPTR_ASSIGN_OR_RETURN(size, GetInteger(json, "size"));
  HPTR_ASSIGN_OR_RETURN(d, GetInteger(json, "d"));
  return MakeDirectionNet(*kind, static_cast<int>(d), static_cast<int>(size),
                          seed);
}

Json ReferenceToJson(const Reference& reference) {
  Json out = Json::object();
  if (reference.mean.size() > 0) out["mean"] = VectorToJson(reference.mean);
  if (reference.sigma.size() > 0) out["sigma"] = MatrixToJson(reference.sigma);
  if (reference.beta.size() > 0) out["beta"] = VectorToJson(reference.beta);
  out["gamma"] = reference.gamma;
  if (reference.psi.size() > 0) out["psi"] = MatrixToJson(reference.psi);
  return out;
}

absl::StatusOr<Reference> ReferenceFromJson(const Json& json) {
  if (!json.is_object()) return SchemaError("reference must be an object");
  if (absl::Status s = RejectUnknown(
          json, {"mean", "sigma", "beta", "gamma", "psi"}, "reference");
      !s.ok()) {
    return s;
  }
  Reference reference;
  if (auto v = Find(json, "mean")) {
    HPTR_ASSIGN_OR_RETURN(mean, VectorFromJson(**v, "mean"));
    reference.mean = mean;
  }
  if (auto v = Find(json, "sigma")) {
    HPTR_ASSIGN_OR_RETURN(sigma, MatrixFromJson(**v, "sigma"));
    reference.sigma = sigma;
  }
  if (auto v = Find(json, "beta")) {
    HPTR_ASSIGN_OR_RETURN(beta, VectorFromJson(**v, "beta"));
    reference.beta = beta;
  }
  if (Find(json, "gamma")) {
    HPTR_ASSIGN_OR_RETURN(gamma, GetNumber(json, "gamma"));
    reference.gamma = gamma;
  }
  if (auto v = Find(json, "psi")) {
    HPTR_ASSIGN_OR_RETURN(psi, MatrixFromJson(**v, "psi"));
    reference.psi = psi;
  }
  return reference;
}

Json CertificateToJson(const ResilienceCertificate& certificate) {
  Json out{{"task", TaskName(certificate.task)},
           {"alpha", certificate.alpha}};
  Json witnesses = Json::object();
  for (int j = 0; j < 4; ++j) {
    if (!certificate.rho[j].has_value()) continue;
    const std::string key = absl::StrCat("rho", j + 1);
    out[key] = *certificate.rho[j];
    witnesses[key] = {{"removed", certificate.witness[j].removed},
                      {"net_index", certificate.witness[j].net_index}};
  }
  out["witness"] = witnesses;
  out["reference"] = ReferenceToJson(certificate.reference);
  out["net_seed"] = certificate.net_seed;
  out["net_size"] = certificate.net_size;
  out["subset_mode"] = SubsetModeName(certificate.subset_mode);
  if (certificate.subset_mode.kind == SubsetModeKind::kSampled) {
    out["subset_seed"] = certificate.subset_mode.seed;
  }
  out["lower_bound"] = certificate.lower_bound;
  return out;
}

absl::StatusOr<ResilienceCertificate> CertificateFromJson(const Json& json) {
  ResilienceCertificate certificate;
  HPTR_ASSIGN_OR_RETURN(task_name, GetString(json, "task"));
  absl::StatusOr<Task> task = ParseTask(task_name);
  if (!task.ok()) return SchemaError(task.status().message());
  certificate.task = *task;
  HPTR_ASSIGN_OR_RETURN(alpha, GetNumber(json, "alpha"));
  certificate.alpha = alpha;
  for (int j = 0; j < 4; ++j) {
    const std::string key = absl::StrCat("rho", j + 1);
    if (!Find(json, key)) continue;
    HPTR_ASSIGN_OR_RETURN(rho, GetNumber(json, key));
    if (!(rho >= 0.0)) return SchemaError("rho values must be non-negative");
    certificate.rho[j] = rho;
    if (json.contains("witness") && json["witness"].contains(key)) {
      const Json& w = json["witness"][key];
      if (!w.contains("removed") || !w["removed"].is_array()) {
        return SchemaError("witness needs a 'removed' array");
      }
      certificate.witness[j].removed = w["removed"].get<std::vector<int>>();
      HPTR_ASSIGN_OR_RETURN(index, GetInteger(w, "net_index"));
      certificate.witness[j].net_index = static_cast<int>(index);
    }
  }
  if (!json.contains("reference")) return SchemaError("missing 'reference'");
  HPTR_ASSIGN_OR_RETURN(reference, ReferenceFromJson(json["reference"]));
  certificate.reference = reference;
  HPTR_ASSIGN_OR_RETURN(net_seed, GetSeed(json, "net_seed"));
  certificate.net_seed = net_seed;
  if (Find(json, "net_size")) {
    HPTR_ASSIGN_OR_RETURN(net_size, GetInteger(json, "net_size"));
    certificate.net_size = static_cast<int>(net_size);
  }
  HPTR_ASSIGN_OR_RETURN(mode_name, GetString(json, "subset_mode"));
  absl::StatusOr<SubsetMode> mode = ParseSubsetMode(mode_name);
  if (!mode.ok()) return SchemaError(mode.status().message());
  certificate.subset_mode = *mode;
  if (Find(json, "subset_seed")) {
    HPTR_ASSIGN_OR_RETURN(subset_seed, GetSeed(json, "subset_seed"));
    certificate.subset_mode.seed = subset_seed;
  }
  certificate.lower_bound = mode->kind == SubsetModeKind::kSampled;
  return certificate;
}

Json TranscriptToJson(const Transcript& transcript) {
  Json out{{"margin", transcript.margin},
           {"margin_mode", MarginModeName(transcript.margin_mode)},
           {"noisy_margin", transcript.noisy_margin},
           {"pass", transcript.pass}};
  out["output"] = transcript.output.has_value()
                      ? VectorToJson(*transcript.output)
                      : Json("BOTTOM");
  out["empty_support"] = transcript.empty_support;
  out["pmf_entropy"] = transcript.pmf_entropy;
  out["feasible_count"] = transcript.feasible_count;
  out["seed"] = transcript.seed;
  return out;
}

Json UtilityReportToJson(const UtilityReport& report) {
  return Json{{"a", report.a},
              {"b", report.b},
              {"c", report.c},
              {"d", report.d},
              {"k_star", report.k_star},
              {"monte_carlo", Json::array({"a", "b", "d"})},
              {"outer_count", report.outer_count},
              {"inner_count", report.inner_count},
              {"volume_bound", report.volume_bound},
              {"a_reason", report.a_reason},
              {"max_swap_change", report.max_swap_change},
              {"c_bound", report.c_bound},
              {"max_robust_gap", report.max_robust_gap}};
}

Json FamilyToJson(const FamilySpec& spec) {
  Json out{{"name", FamilyName(spec)}};
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, GaussianFamily>) {
          out["mean"] = VectorToJson(f.mean);
          out["sigma"] = MatrixToJson(f.sigma);
        } else if constexpr (std::is_same_v<T, SubGaussianBoundedFamily>) {
          out["mean"] = VectorToJson(f.mean);
          out["sigma"] = MatrixToJson(f.sigma);
          out["truncation"] = f.truncation;
        } else if constexpr (std::is_same_v<T, StudentTFamily> ||
                             std::is_same_v<T, CovBoundedFamily>) {
          out["mean"] = VectorToJson(f.mean);
          out["sigma"] = MatrixToJson(f.sigma);
          out["dof"] = f.dof;
        } else if constexpr (std::is_same_v<T, LinearModelFamily>) {
          out["beta"] = VectorToJson(f.beta);
          out["sigma_x"] = MatrixToJson(f.sigma_x);
          out["noise"] = f.coupling_kind == NoiseCoupling::kDependent
                             ? "dependent"
                             : "independent";
          out["gamma"] = f.gamma;
          out["noise_dof"] = f.noise_dof;
          out["coupling"] = f.coupling;
        } else {
          out["alpha"] = f.alpha;
          out["k"] = f.k;
          out["side"] = f.side;
        }
      },
      spec);
  return out;
}

absl::StatusOr<FamilySpec> FamilyFromJson(const Json& json) {
  HPTR_ASSIGN_OR_RETURN(name, GetString(json, "name"));
  std::optional<int> d;
  if (Find(json, "d")) {
    HPTR_ASSIGN_OR_RETURN(dim, GetInteger(json, "d"));
    if (dim < 1) return SchemaError("'d' must be positive");
    d = static_cast<int>(dim);
  } else {
    // Otherwise the covariance fixes the dimension when present.
    for (const char* key : {"sigma", "sigma_x"}) {
      if (auto m = Find(json, key); m && (**m).is_array() && !d) {
        d = static_cast<int>((**m).size());
      }
    }
  }
  auto vector_or_zero = [&](absl::string_view key)
      -> absl::StatusOr<Eigen::VectorXd> {
    if (auto v = Find(json, key)) return VectorFromJson(**v, key);
    if (!d) return SchemaError(absl::StrCat("missing '", key, "' and 'd'"));
    return Eigen::VectorXd::Zero(*d);
  };
  auto matrix_or_identity = [&](absl::string_view key, int dim)
      -> absl::StatusOr<Eigen::MatrixXd> {
    if (auto v = Find(json, key)) return MatrixFromJson(**v, key);
    return Eigen::MatrixXd::Identity(dim, dim);
  };
  auto number_or = [&](absl::string_view key,
                       double fallback) -> absl::StatusOr<double> {
    if (!Find(json, key)) return fallback;
    return GetNumber(json, key);
  };

  FamilySpec spec;
  if (name == "gaussian" || name == "subgaussian-bounded" ||
      name == "student-t" || name == "cov-bounded") {
    HPTR_ASSIGN_OR_RETURN(mean, vector_or_zero("mean"));
    HPTR_ASSIGN_OR_RETURN(sigma,
                          matrix_or_identity("sigma",
                                             static_cast<int>(mean.size())));
    if (name == "gaussian") {
      spec = GaussianFamily{mean, sigma};
    } else if (name == "subgaussian-bounded") {
      HPTR_ASSIGN_OR_RETURN(truncation, number_or("truncation", 2.0));
      spec = SubGaussianBoundedFamily{mean, sigma, truncation};
    } else if (name == "student-t") {
      HPTR_ASSIGN_OR_RETURN(dof, number_or("dof", 8.0));
      spec = StudentTFamily{dof, mean, sigma};
    } else {
      HPTR_ASSIGN_OR_RETURN(dof, number_or("dof", 3.0));
      spec = CovBoundedFamily{mean, sigma, dof};
    }
  } else if (name == "linear-model") {
    LinearModelFamily f;
    if (auto v = Find(json, "beta")) {
      HPTR_ASSIGN_OR_RETURN(beta, VectorFromJson(**v, "beta"));
      f.beta = beta;
    } else if (d) {
      f.beta = Eigen::VectorXd::Ones(*d);
    } else {
      return SchemaError("missing 'beta' and 'd'");
    }
    HPTR_ASSIGN_OR_RETURN(sigma_x,
                          matrix_or_identity("sigma_x",
                                             static_cast<int>(f.beta.size())));
    f.sigma_x = sigma_x;
    if (Find(json, "noise")) {
      HPTR_ASSIGN_OR_RETURN(noise, GetString(json, "noise"));
      if (noise == "dependent") {
        f.coupling_kind = NoiseCoupling::kDependent;
      } else if (noise != "independent") {
        return SchemaError("'noise' must be independent or dependent");
      }
    }
    HPTR_ASSIGN_OR_RETURN(gamma, number_or("gamma", 1.0));
    HPTR_ASSIGN_OR_RETURN(noise_dof, number_or("noise_dof", 0.0));
    HPTR_ASSIGN_OR_RETURN(coupling, number_or("coupling", 1.0));
    f.gamma = gamma;
    f.noise_dof = noise_dof;
    f.coupling = coupling;
    spec = f;
  } else if (name == "hard-pair") {
    HPTR_ASSIGN_OR_RETURN(alpha, number_or("alpha", 0.1));
    HPTR_ASSIGN_OR_RETURN(k, number_or("k", 4));
    HPTR_ASSIGN_OR_RETURN(side, number_or("side", 1));
    spec = HardPairFamily{alpha, static_cast<int>(k), static_cast<int>(side)};
  } else {
    return SchemaError(absl::StrCat("unknown family '", name, "'"));
  }
  if (absl::Status s = ValidateFamily(spec); !s.ok()) return s;
  return spec;
}

Json ConfigToJson(const MechanismConfig& config) {
  Json out{{"task", TaskName(config.task)},
           {"alpha", config.alpha},
           {"eps", config.eps},
           {"delta", config.delta},
           {"zeta", config.zeta},
           {"sensitivity", config.sensitivity},
           {"net_size", config.net_size},
           {"net_seed", config.net_seed},
           {"seed", config.seed},
           {"margin_cap", config.margin_cap}};
  if (config.tau) out["tau"] = *config.tau;
  Json grid{{"points_per_axis", config.grid.points_per_axis},
            {"sphere_size", config.grid.sphere_size},
            {"max_points", config.grid.max_points}};
  if (config.grid.center.size() > 0) {
    grid["center"] = VectorToJson(config.grid.center);
    grid["half_widths"] = VectorToJson(config.grid.half_widths);
  }
  out["grid"] = grid;
  return out;
}

absl::StatusOr<MechanismConfig> ConfigFromJson(const Json& json) {
  if (!json.is_object()) return SchemaError("config must be a table");
  if (absl::Status s = RejectUnknown(
          json,
          {"task", "alpha", "eps", "delta", "zeta", "sensitivity", "tau",
           "net_size", "net_seed", "seed", "margin_cap", "grid"},
          "config");
      !s.ok()) {
    return s;
  }
  MechanismConfig config;
  if (Find(json, "task")) {
    HPTR_ASSIGN_OR_RETURN(task_name, GetString(json, "task"));
    absl::StatusOr<Task> task = ParseTask(task_name);
    if (!task.ok()) return SchemaError(task.status().message());
    config.task = *task;
  }
  for (auto [key, field] :
       {std::pair{"alpha", &config.alpha}, std::pair{"eps", &config.eps},
        std::pair{"delta", &config.delta}, std::pair{"zeta", &config.zeta},
        std::pair{"sensitivity", &config.sensitivity}}) {
    if (!Find(json, key)) continue;
    HPTR_ASSIGN_OR_RETURN(value, GetNumber(json, key));
    *field = value;
  }
  if (Find(json, "tau")) {
    HPTR_ASSIGN_OR_RETURN(tau, GetNumber(json, "tau"));
    config.tau = tau;
  }
  if (Find(json, "net_size")) {
    HPTR_ASSIGN_OR_RETURN(net_size, GetInteger(json, "net_size"));
    config.net_size = static_cast<int>(net_size);
  }
  if (Find(json, "margin_cap")) {
    HPTR_ASSIGN_OR_RETURN(cap, GetInteger(json, "margin_cap"));
    config.margin_cap = static_cast<int>(cap);
  }
  if (Find(json, "net_seed")) {
    HPTR_ASSIGN_OR_RETURN(net_seed, GetSeed(json, "net_seed"));
    config.net_seed = net_seed;
  }
  if (Find(json, "seed")) {
    HPTR_ASSIGN_OR_RETURN(seed, GetSeed(json, "seed"));
    config.seed = seed;
  }
  if (auto grid = Find(json, "grid")) {
    const Json& g = **grid;
    if (!g.is_object()) return SchemaError("'grid' must be a table");
    if (absl::Status s = RejectUnknown(
            g,
            {"center", "half_widths", "points_per_axis", "sphere_size",
             "max_points"},
            "grid");
        !s.ok()) {
      return s;
    }
    if (auto v = Find(g, "center")) {
      HPTR_ASSIGN_OR_RETURN(center, VectorFromJson(**v, "center"));
      config.grid.center = center;
    }
    if (auto v = Find(g, "half_widths")) {
      HPTR_ASSIGN_OR_RETURN(half, VectorFromJson(**v, "half_widths"));
      config.grid.half_widths = half;
    }
    if (Find(g, "points_per_axis")) {
      HPTR_ASSIGN_OR_RETURN(ppa, GetInteger(g, "points_per_axis"));
      config.grid.points_per_axis = static_cast<int>(ppa);
    }
    if (Find(g, "sphere_size")) {
      HPTR_ASSIGN_OR_RETURN(sphere, GetInteger(g, "sphere_size"));
      config.grid.sphere_size = static_cast<int>(sphere);
    }
    if (Find(g, "max_points")) {
      HPTR_ASSIGN_OR_RETURN(cap, GetInteger(g, "max_points"));
      config.grid.max_points = cap;
    }
  }
  return config;
}

absl::StatusOr<Json> TomlToJson(std::string_view text) {
  try {
    toml::table table = toml::parse(text);
    return TomlNodeToJson(table);
  } catch (const toml::parse_error& error) {
    return SchemaError(absl::StrCat("line ", error.source().begin.line, ": ",
                                    std::string(error.description())));
  }
}

absl::StatusOr<std::string> ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("io-error: cannot read ", path));
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

absl::Status WriteTextFile(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::PermissionDeniedError(
        absl::StrCat("io-error: cannot write ", path));
  }
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) {
    return absl::PermissionDeniedError(
        absl::StrCat("io-error: write failed for ", path));
  }
  return absl::OkStatus();
}

absl::StatusOr<Json> ReadTomlFile(const std::string& path) {
  HPTR_ASSIGN_OR_RETURN(text, ReadTextFile(path));
  return TomlToJson(text);
}

absl::StatusOr<Json> ReadJsonFile(const std::string& path) {
  HPTR_ASSIGN_OR_RETURN(text, ReadTextFile(path));
  Json json = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (json.is_discarded()) {
    return SchemaError(absl::StrCat(path, " is not valid JSON"));
  }
  return json;
}

std::string DatasetToCsv(const Dataset& data) {
  std::string out;
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.d(); ++j) {
      if (j > 0) out += ',';
      out += FormatDouble(data.rows(i, j));
    }
    if (data.labeled()) {
      out += ',';
      out += FormatDouble((*data.labels)(i));
    }
    out += '\n';
  }
  return out;
}

absl::StatusOr<Dataset> DatasetFromCsv(std::string_view text, bool labeled) {
  std::vector<std::vector<double>> rows;
  int line_number = 0;
  for (absl::string_view line : absl::StrSplit(AbslView(text), '\n')) {
    ++line_number;
    line = absl::StripTrailingAsciiWhitespace(line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (absl::string_view field : absl::StrSplit(line, ',')) {
      double value;
      if (!absl::SimpleAtod(absl::StripAsciiWhitespace(field), &value) ||
          !std::isfinite(value)) {
        return SchemaError(absl::StrCat("line ", line_number,
                                        ": not a finite number '", field,
                                        "'"));
      }
      row.push_back(value);
    }
    if (!rows.empty() && row.size() != rows[0].size()) {
      return SchemaError(
          absl::StrCat("line ", line_number, ": wrong number of columns"));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return SchemaError("dataset has no rows");
  const int cols = static_cast<int>(rows[0].size());
  const int d = labeled ? cols - 1 : cols;
  if (d < 1) return SchemaError("dataset has no feature columns");
  Dataset data;
  data.rows.resize(rows.size(), d);
  if (labeled) data.labels = Eigen::VectorXd(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d; ++j) data.rows(i, j) = rows[i][j];
    if (labeled) (*data.labels)(i) = rows[i][d];
  }
  return data;
}

absl::Status SaveDataset(const std::string& path, const Dataset& data,
                         const std::optional<FamilySpec>& spec) {
  if (absl::Status s = WriteTextFile(path, DatasetToCsv(data)); !s.ok()) {
    return s;
  }
  Json sidecar{{"spec", spec ? FamilyToJson(*spec) : Json(nullptr)},
               {"seed", data.seed},
               {"n", data.n()},
               {"d", data.d()},
               {"labeled", data.labeled()}};
  if (data.provenance.corrupted) {
    sidecar["corruption"] = data.provenance.detail;
  }
  return WriteTextFile(path + ".json", sidecar.dump(2) + "\n");
}

absl::StatusOr<Dataset> LoadDataset(const std::string& path,
                                    bool labeled_fallback) {
  HPTR_ASSIGN_OR_RETURN(text, ReadTextFile(path));
  bool labeled = labeled_fallback;
  std::optional<Json> sidecar;
  if (std::ifstream probe(path + ".json"); probe) {
    HPTR_ASSIGN_OR_RETURN(json, ReadJsonFile(path + ".json"));
    sidecar = json;
    if (json.contains("labeled") && json["labeled"].is_boolean()) {
      labeled = json["labeled"].get<bool>();
    }
  }
  HPTR_ASSIGN_OR_RETURN(data, DatasetFromCsv(text, labeled));
  if (sidecar) {
    HPTR_ASSIGN_OR_RETURN(n, GetInteger(*sidecar, "n"));
    HPTR_ASSIGN_OR_RETURN(d, GetInteger(*sidecar, "d"));
    if (n != data.n() || d != data.d()) {
      return SchemaError("sidecar shape does not match the CSV");
    }
    HPTR_ASSIGN_OR_RETURN(seed, GetSeed(*sidecar, "seed"));
    data.seed = seed;
    if (sidecar->contains("corruption")) {
      data.provenance.corrupted = true;
      data.provenance.detail = (*sidecar)["corruption"].get<std::string>();
    }
  }
  return data;
}

}  // namespace hptr
