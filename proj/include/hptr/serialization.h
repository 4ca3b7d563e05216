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

#ifndef HPTR_SERIALIZATION_H_
#define HPTR_SERIALIZATION_H_

#include <optional>
#include <string>
#include <string_view>

#include "absl/status/statusor.h"
#include "hptr/datagen.h"
#include "hptr/dataset.h"
#include "hptr/direction_net.h"
#include "hptr/hptr.h"
#include "hptr/mechanisms.h"
#include "hptr/resilience.h"
#include "hptr/robust1d.h"
#include "json.hpp"

namespace hptr {

using Json = nlohmann::json;

// Decoding failures are InvalidArgument with a "schema-error" prefix; file
// access failures are NotFound / PermissionDenied with an "io-error" prefix.

// {"atoms": [[id, prob], ...]}; the abort atom is written as "BOTTOM".
Json PmfToJson(const DiscretePMF& pmf);
absl::StatusOr<DiscretePMF> PmfFromJson(const Json& json);

// {pass, eps, delta, worst_delta, worst_pair: {left, right, hamming}}.
Json DpReportToJson(const DpReport& report);
absl::StatusOr<DpReport> DpReportFromJson(const Json& json);

Json RobustMomentsToJson(const RobustMoments& moments);

// {kind, seed, size, d}; decoding regenerates the net from these fields.
Json NetToJson(const DirectionNet& net);
absl::StatusOr<DirectionNet> NetFromJson(const Json& json);

Json ReferenceToJson(const Reference& reference);
absl::StatusOr<Reference> ReferenceFromJson(const Json& json);

// Unused statistic slots are left out.
Json CertificateToJson(const ResilienceCertificate& certificate);
absl::StatusOr<ResilienceCertificate> CertificateFromJson(const Json& json);

Json TranscriptToJson(const Transcript& transcript);

Json UtilityReportToJson(const UtilityReport& report);

// {"name": ..., family fields}. When "mean" / "sigma" (or "beta" / "sigma_x")
// are absent, a "d" field gives zero mean and identity covariance.
Json FamilyToJson(const FamilySpec& spec);
absl::StatusOr<FamilySpec> FamilyFromJson(const Json& json);

// Keys mirror the MechanismConfig fields, with the grid under "grid".
// Unknown keys are rejected.
Json ConfigToJson(const MechanismConfig& config);
absl::StatusOr<MechanismConfig> ConfigFromJson(const Json& json);

// TOML document as JSON (tables become objects, arrays stay arrays).
absl::StatusOr<Json> TomlToJson(std::string_view text);
absl::StatusOr<Json> ReadTomlFile(const std::string& path);

absl::StatusOr<Json> ReadJsonFile(const std::string& path);
absl::Status WriteTextFile(const std::string& path, std::string_view text);
absl::StatusOr<std::string> ReadTextFile(const std::string& path);

// Rows as CSV, one record per line with the label as the last column, no
// header, shortest round-trip decimal form.
std::string DatasetToCsv(const Dataset& data);
// `labeled` says whether the last column is the label.
absl::StatusOr<Dataset> DatasetFromCsv(std::string_view text, bool labeled);

// Writes `path` and the sidecar `path`.json {spec, seed, n, d, labeled}.
absl::Status SaveDataset(const std::string& path, const Dataset& data,
                         const std::optional<FamilySpec>& spec);
// Reads the sidecar when present to learn d and the label column; without a
// sidecar every column is a feature unless `labeled_fallback` is set.
absl::StatusOr<Dataset> LoadDataset(const std::string& path,
                                    bool labeled_fallback = false);

// Shortest decimal that parses back to the same double.
std::string FormatDouble(double value);

}  // namespace hptr

#endif  // HPTR_SERIALIZATION_H_
