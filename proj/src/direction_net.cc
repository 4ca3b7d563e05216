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

#include "hptr/direction_net.h"

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "hptr/random.h"

namespace hptr {
namespace {

double RadicalInverse(uint64_t k, uint64_t base) {
  double inverse = 1.0 / static_cast<double>(base);
  double factor = inverse;
  double value = 0.0;
  while (k > 0) {
    value += static_cast<double>(k % base) * factor;
    k /= base;
    factor *= inverse;
  }
  return value;
}

class ElementSink {
 public:
  ElementSink(int rows, int capacity) : rows_(rows), capacity_(capacity) {}

  bool full() const { return static_cast<int>(columns_.size()) >= capacity_; }

  // Adds v and then -v, as long as there is room.
  void AddPair(const Eigen::VectorXd& v) {
    if (!full()) columns_.push_back(v);
    if (!full()) columns_.push_back(-v);
  }

  Eigen::MatrixXd Finish() const {
    Eigen::MatrixXd out(rows_, columns_.size());
    for (size_t j = 0; j < columns_.size(); ++j) out.col(j) = columns_[j];
    return out;
  }

 private:
  int rows_;
  int capacity_;
  std::vector<Eigen::VectorXd> columns_;
};

Eigen::MatrixXd VectorElements(int d, int size, uint64_t seed) {
  ElementSink sink(d, size);
  for (int i = 0; i < d; ++i) {
    sink.AddPair(Eigen::VectorXd::Unit(d, i));
  }
  if (d == 2) {
    // Half-circle angles pi * r(k); k = 0, 1 are the axes already present.
    for (uint64_t k = 2; !sink.full(); ++k) {
      const double angle = std::numbers::pi * RadicalInverse(k, 2);
      Eigen::VectorXd v(2);
      v << std::cos(angle), std::sin(angle);
      sink.AddPair(v);
    }
  } else if (d == 3) {
    // Halton points mapped to the sphere by the equal-area z-projection.
    for (uint64_t k = 1; !sink.full(); ++k) {
      const double z = 1.0 - 2.0 * RadicalInverse(k, 2);
      const double phi = 2.0 * std::numbers::pi * RadicalInverse(k, 3);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Eigen::VectorXd v(3);
      v << r * std::cos(phi), r * std::sin(phi), z;
      sink.AddPair(v.normalized());
    }
  } else if (d > 3) {
    Rng rng(seed);
    std::normal_distribution<double> normal;
    while (!sink.full()) {
      Eigen::VectorXd g(d);
      for (int i = 0; i < d; ++i) g(i) = normal(rng);
      const double norm = g.norm();
      if (norm == 0.0) continue;
      sink.AddPair(g / norm);
    }
  }
  return sink.Finish();
}

Eigen::MatrixXd SymmetricElements(int d, int size, uint64_t seed) {
  ElementSink sink(d * d, size);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d * d);
      const double value = i == j ? 1.0 : std::sqrt(0.5);
      v(i * d + j) = value;
      v(j * d + i) = value;
      sink.AddPair(v);
    }
  }
  Rng rng(seed);
  std::normal_distribution<double> normal;
  while (!sink.full()) {
    Eigen::VectorXd v(d * d);
    for (int i = 0; i < d; ++i) {
      for (int j = i; j < d; ++j) {
        const double g = normal(rng);
        v(i * d + j) = g;
        v(j * d + i) = g;
      }
    }
    const double norm = v.norm();
    if (norm == 0.0) continue;
    sink.AddPair(v / norm);
  }
  return sink.Finish();
}

}  // namespace

std::string_view NetKindName(NetKind kind) {
  return kind == NetKind::kVector ? "vector" : "symmetric-matrix";
}

absl::StatusOr<NetKind> ParseNetKind(std::string_view name) {
  if (name == "vector") return NetKind::kVector;
  if (name == "symmetric-matrix") return NetKind::kSymmetricMatrix;
  return absl::InvalidArgumentError("invalid-parameter: unknown net kind");
}

absl::StatusOr<DirectionNet> MakeDirectionNet(NetKind kind, int d, int size,
                                              uint64_t seed) {
  if (d < 1) {
    return absl::InvalidArgumentError("invalid-parameter: d must be >= 1");
  }
  DirectionNet net;
  net.kind = kind;
  net.d = d;
  net.seed = seed;
  if (kind == NetKind::kVector) {
    const int canonical = 2 * d;
    net.elements = VectorElements(d, d == 1 ? 2 : std::max(size, canonical),
                                  seed);
  } else {
    const int canonical = d * (d + 1);
    net.elements = SymmetricElements(d, std::max(size, canonical), seed);
  }
  return net;
}

DirectionNet WithExtraDirection(const DirectionNet& net,
                                const Eigen::VectorXd& extra) {
  DirectionNet out = net;
  out.elements.conservativeResize(Eigen::NoChange, net.size() + 1);
  out.elements.col(net.size()) = extra.normalized();
  return out;
}

}  // namespace hptr
