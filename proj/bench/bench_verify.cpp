// Serial reference against the OpenMP path for the sample-parallel kernels.

#include <benchmark/benchmark.h>

#include "gtw/catalog.hpp"
#include "gtw/gibbons_tsarev.hpp"

using namespace gtw;

namespace {

Exec exec_of(const benchmark::State& st) { return st.range(0) == 0 ? Exec::serial : Exec::parallel; }

void BM_VerifyAxioms(benchmark::State& st) {
  const auto s = genus1(2).structure.base;
  VerifyOptions o;
  o.samples = 100;
  o.exec = exec_of(st);
  for (auto _ : st) benchmark::DoNotOptimize(verify_axioms(s, o));
  st.SetLabel(st.range(0) == 0 ? "serial" : "parallel");
}

void BM_Compatibility(benchmark::State& st) {
  const GTSystem sys = build_system(genus0(2).structure.base, 3);
  for (auto _ : st) benchmark::DoNotOptimize(compatibility_suite(sys, 20, 3, 1e-9, exec_of(st)));
  st.SetLabel(st.range(0) == 0 ? "serial" : "parallel");
}

}  // namespace

BENCHMARK(BM_VerifyAxioms)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Compatibility)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
