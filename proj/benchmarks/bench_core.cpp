#include <benchmark/benchmark.h>

#include "calderon/analysis.hpp"

using namespace calderon;

namespace {

GeometryParams bench_params(double h) {
  GeometryParams p;
  p.h = h;
  return p;
}

const MeshedDomain& bench_mesh() {
  static MeshedDomain m = build_domain(bench_params(0.018));
  return m;
}

const MeshGradients& bench_grads() {
  static MeshGradients g(bench_mesh());
  return g;
}

const ConductivityField& bench_gamma() {
  static ConductivityField g = make_reference(bench_mesh(), {}, 0.4, 60.0);
  return g;
}

void BM_BuildDomain(benchmark::State& state) {
  GeometryParams p = bench_params(0.018);
  for (auto _ : state) {
    MeshedDomain m = build_domain(p);
    benchmark::DoNotOptimize(m.numCells());
  }
}
BENCHMARK(BM_BuildDomain)->Unit(benchmark::kMillisecond);

void BM_AssembleStiffness(benchmark::State& state) {
  std::vector<int> cells = bench_mesh().cellsOf(
      {Region::DtildeMinusDprime, Region::DprimeMinusD, Region::D});
  for (auto _ : state) {
    RegionSystem sys(bench_mesh(), bench_grads(), bench_gamma(), cells);
    benchmark::DoNotOptimize(sys.stiffness().nonZeros());
  }
}
BENCHMARK(BM_AssembleStiffness)->Unit(benchmark::kMillisecond);

void BM_DirichletSolve(benchmark::State& state) {
  std::vector<int> cells = bench_mesh().cellsOf(
      {Region::DtildeMinusDprime, Region::DprimeMinusD, Region::D});
  RegionSystem sys(bench_mesh(), bench_grads(), bench_gamma(), cells);
  VecX data = fourier_on_circle(
      bench_mesh(), bench_mesh().facetVertices(bench_mesh().facetsOf(Boundary::dDtilde)),
      2, false);
  // Warm the factorization outside the timed loop.
  solve_dirichlet(sys, data);
  for (auto _ : state) {
    FieldSolution u = solve_dirichlet(sys, data);
    benchmark::DoNotOptimize(u.local.sum());
  }
}
BENCHMARK(BM_DirichletSolve)->Unit(benchmark::kMillisecond);

void BM_FullDtn(benchmark::State& state) {
  for (auto _ : state) {
    BoundaryOperator op = assemble_full_dtn(bench_mesh(), bench_grads(), bench_gamma());
    benchmark::DoNotOptimize(op.op.norm());
  }
}
BENCHMARK(BM_FullDtn)->Unit(benchmark::kMillisecond);

void BM_OpNorm(benchmark::State& state) {
  static BoundaryOperator op =
      assemble_full_dtn(bench_mesh(), bench_grads(), bench_gamma());
  for (auto _ : state) {
    double n = op_norm(op.op, op.gram);
    benchmark::DoNotOptimize(n);
  }
}
BENCHMARK(BM_OpNorm)->Unit(benchmark::kMillisecond);

void BM_SKernelValue(benchmark::State& state) {
  static ConductivityField g1 = [] {
    BumpSpec b;
    b.width = 0.15;
    b.amplitude = 0.3;
    return perturb_in_D(bench_gamma(), b).gamma;
  }();
  static SKernelEngine engine(bench_mesh(), bench_grads(), bench_gamma(), g1);
  static std::vector<int> verts = vertices_in_source_ball(bench_mesh());
  engine.s_direct_vertices(verts[0], verts[1]);  // warm caches
  size_t i = 0;
  for (auto _ : state) {
    double s = engine.s_direct_vertices(verts[i % verts.size()],
                                        verts[(i + 3) % verts.size()]);
    benchmark::DoNotOptimize(s);
    ++i;
  }
}
BENCHMARK(BM_SKernelValue)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
