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

#ifndef HPTR_DIRECTION_NET_H_
#define HPTR_DIRECTION_NET_H_

#include <cstdint>
#include <string_view>

#include "Eigen/Dense"
#include "absl/status/statusor.h"

namespace hptr {

enum class NetKind { kVector, kSymmetricMatrix };

std::string_view NetKindName(NetKind kind);
absl::StatusOr<NetKind> ParseNetKind(std::string_view name);

// Finite set of unit directions standing in for a supremum over the sphere.
//
// Vector nets hold unit vectors in R^d. Symmetric-matrix nets hold d x d
// symmetric matrices of unit Frobenius norm, stored flattened row-major so
// that <V, A> is a dot product of columns.
//
// Elements come in a fixed order: the signed canonical basis first, then
// low-discrepancy points (d = 2, 3) or seeded Gaussian directions, each
// followed by its negation. A net of size m is therefore a prefix of every
// larger net with the same (kind, d, seed).
struct DirectionNet {
  NetKind kind = NetKind::kVector;
  int d = 1;
  uint64_t seed = 0;
  // One element per column: d rows for vectors, d*d rows for matrices.
  Eigen::MatrixXd elements;

  int size() const { return static_cast<int>(elements.cols()); }
};

// Builds the net. `size` is clamped from below to the number of canonical
// elements (2d for vectors, d(d+1) for matrices); for d = 1 vector nets are
// exactly {+1, -1}.
absl::StatusOr<DirectionNet> MakeDirectionNet(NetKind kind, int d, int size,
                                              uint64_t seed);

// Same net with `extra` appended as the last element (normalized).
DirectionNet WithExtraDirection(const DirectionNet& net,
                                const Eigen::VectorXd& extra);

}  // namespace hptr

#endif  // HPTR_DIRECTION_NET_H_
