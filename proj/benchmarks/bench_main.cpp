#include <benchmark/benchmark.h>

#include <loopflow/frame.hpp>
#include <loopflow/homogeneous.hpp>
#include <loopflow/killing.hpp>
#include <loopflow/lax.hpp>

using namespace loopflow;

namespace {

LaxState fixture_state(int p) {
  return LaxState::random_admissible(p, Complex(0.5, 0.15), 0.1, 99);
}

void BM_eigenspace_project(benchmark::State& state) {
  Rng rng(3);
  CMat m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = rng.cgaussian();
  for (auto _ : state) {
    benchmark::DoNotOptimize(eigenspace_project(m, 1));
  }
}
BENCHMARK(BM_eigenspace_project);

void BM_loop_split_twisted(benchmark::State& state) {
  const LaxState s = fixture_state(static_cast<int>(state.range(0)));
  const LaurentLoop shifted = s.xi.shifted(4 * s.p);
  for (auto _ : state) {
    benchmark::DoNotOptimize(loop_split_twisted(shifted));
  }
}
BENCHMARK(BM_loop_split_twisted)->Arg(0)->Arg(1)->Arg(2);

void BM_vector_field(benchmark::State& state) {
  const LaxState s = fixture_state(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(vector_field(s, FlowDirection::X2));
  }
}
BENCHMARK(BM_vector_field)->Arg(0)->Arg(1)->Arg(2);

void BM_flow_row(benchmark::State& state) {
  const LaxState s = fixture_state(0);
  const int n = static_cast<int>(state.range(0));
  const GridSpec spec{1, n, 1.0, 1.0 / (n - 1)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_flow(s, spec));
  }
  state.SetItemsProcessed(state.iterations() * (n - 1));
}
BENCHMARK(BM_flow_row)->Arg(65)->Arg(257);

void BM_frame_grid(benchmark::State& state) {
  const LaxState v = LaxState::vacuum(0, Complex(0.4, 0.1));
  const int n = static_cast<int>(state.range(0));
  const GridSpec spec{n, n, 1.0 / (n - 1), 1.0 / (n - 1)};
  const StateGrid grid = integrate_flow(v, spec);
  const AField a = connection_field(grid);
  for (auto _ : state) {
    benchmark::DoNotOptimize(integrate_frame(a, Complex(0, 1)));
  }
  state.SetItemsProcessed(state.iterations() * spec.nodes());
}
BENCHMARK(BM_frame_grid)->Arg(33)->Arg(65);

void BM_killing_recursion(benchmark::State& state) {
  const auto prm = HomogeneousParams::from_fractions({1, 25}, {1, 20});
  const HomogeneousFrameData fd = homogeneous_frame_connection(prm);
  const ConnectionData conn =
      ConnectionData::constant(fd.X, fd.C, fd.a, GridSpec{8, 8, 0.1, 0.1});
  const int order = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(killing_recursion(conn, order));
  }
}
BENCHMARK(BM_killing_recursion)->Arg(8)->Arg(12)->Arg(16);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
