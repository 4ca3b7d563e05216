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

#ifndef HPTR_DATASET_H_
#define HPTR_DATASET_H_

#include <cstdint>
#include <optional>
#include <string>

#include "Eigen/Dense"

namespace hptr {

struct Provenance {
  bool corrupted = false;
  // Free-form description of the corruption (adversary, fraction, seed).
  std::string detail;
};

// n records in R^d, stored one per row, with an optional response column.
struct Dataset {
  Eigen::MatrixXd rows;
  std::optional<Eigen::VectorXd> labels;
  Provenance provenance;
  uint64_t seed = 0;

  int n() const { return static_cast<int>(rows.rows()); }
  int d() const { return static_cast<int>(rows.cols()); }
  bool labeled() const { return labels.has_value(); }
};

// Number of record positions at which the two datasets differ. A record is
// the row together with its label. Shapes must agree.
int HammingDistance(const Dataset& a, const Dataset& b);

}  // namespace hptr

#endif  // HPTR_DATASET_H_
