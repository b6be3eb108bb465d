#include <benchmark/benchmark.h>

#include <numbers>

#include "magdirac/operators.hpp"
#include "magdirac/parallel.hpp"

using namespace magdirac;

namespace {

struct Case {
  Lattice lattice;
  TargetManifold target;
  MapField phi;
  SpinorField psi;
};

Case make_case(int n) {
  auto lattice = Lattice::torus(n, n, 2.0 * std::numbers::pi, 2.0 * std::numbers::pi);
  auto target = TargetManifold::sphere(2);
  MapInit init;
  init.seed = 3;
  init.amplitude = 0.5;
  auto phi = init_map(init, lattice, target);
  auto psi = constant_spinor(lattice, phi, target, {Complex(1.0, 0.0), Complex(0.0, 0.5)});
  return {lattice, target, phi, psi};
}

// range(0): grid size, range(1): threads (1 is the serial reference path)
void BM_MapResidual(benchmark::State& state) {
  const auto c = make_case(static_cast<int>(state.range(0)));
  set_num_threads(static_cast<int>(state.range(1)));
  const auto magnetic = MagneticData::none(3);
  for (auto _ : state) {
    auto r = el_residual_map(c.lattice, c.target, magnetic, c.phi, &c.psi);
    benchmark::DoNotOptimize(r.norm);
  }
  set_num_threads(1);
}

void BM_TwistedDirac(benchmark::State& state) {
  const auto c = make_case(static_cast<int>(state.range(0)));
  set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) {
    auto out = twisted_dirac(c.lattice, c.target, c.phi, c.psi);
    benchmark::DoNotOptimize(out.values.data());
  }
  set_num_threads(1);
}

void BM_Energy(benchmark::State& state) {
  const auto c = make_case(static_cast<int>(state.range(0)));
  set_num_threads(static_cast<int>(state.range(1)));
  const auto magnetic = MagneticData::none(3);
  for (auto _ : state) {
    auto e = energy(c.lattice, c.target, magnetic, c.phi, &c.psi);
    benchmark::DoNotOptimize(e.total);
  }
  set_num_threads(1);
}

}  // namespace

BENCHMARK(BM_MapResidual)->ArgsProduct({{32, 64, 128}, {1, 4}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_TwistedDirac)->ArgsProduct({{32, 64, 128}, {1, 4}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Energy)->ArgsProduct({{32, 64, 128}, {1, 4}})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
