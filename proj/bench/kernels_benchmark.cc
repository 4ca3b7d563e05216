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

// Serial reference against the OpenMP kernels. Set HPTR_THREADS to vary the
// worker count.

#include <benchmark/benchmark.h>

#include "hptr/datagen.h"
#include "hptr/direction_net.h"
#include "hptr/hptr.h"
#include "hptr/kernels.h"

namespace hptr {
namespace {

Dataset Sample(int n, int d) {
  return *Generate(GaussianFamily{Eigen::VectorXd::Zero(d),
                                  Eigen::MatrixXd::Identity(d, d)},
                   n, 7);
}

void BM_ProjectedTrimmedMoments(benchmark::State& state, Execution execution) {
  const int n = static_cast<int>(state.range(0));
  const Dataset data = Sample(n, 4);
  const DirectionNet net = *MakeDirectionNet(NetKind::kVector, 4, 128, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ProjectedTrimmedMoments(data.rows, net.elements, n / 20, execution));
  }
  state.SetItemsProcessed(state.iterations() * n * net.size());
}
BENCHMARK_CAPTURE(BM_ProjectedTrimmedMoments, serial, Execution::kSerial)
    ->Arg(2000)
    ->Arg(16000);
BENCHMARK_CAPTURE(BM_ProjectedTrimmedMoments, parallel, Execution::kParallel)
    ->Arg(2000)
    ->Arg(16000);

void BM_ScoreGrid(benchmark::State& state, Execution execution) {
  const Dataset data = Sample(4000, 2);
  MechanismConfig config;
  config.alpha = 0.1;
  config.tau = 1.0;
  config.grid.center = Eigen::VectorXd::Zero(2);
  config.grid.half_widths = Eigen::VectorXd::Constant(2, 0.5);
  config.grid.points_per_axis = static_cast<int>(state.range(0));
  const TaskScorer scorer = *TaskScorer::Build(data, config, execution);
  const Eigen::MatrixXd points = *CandidatePoints(config, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(scorer.ScoreAll(points, execution));
  }
  state.SetItemsProcessed(state.iterations() * points.cols());
}
BENCHMARK_CAPTURE(BM_ScoreGrid, serial, Execution::kSerial)->Arg(41)->Arg(101);
BENCHMARK_CAPTURE(BM_ScoreGrid, parallel, Execution::kParallel)
    ->Arg(41)
    ->Arg(101);

}  // namespace
}  // namespace hptr

BENCHMARK_MAIN();
