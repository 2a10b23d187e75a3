// Serial vs OpenMP for the three hot kernels: field assembly, batched
// sampling and psi table construction. The unfused reference assembly is
// included as a baseline for the fused kernel.
//
//   ./vmfflow_bench --benchmark_filter=Field

#include <benchmark/benchmark.h>

#include "vmfflow/flow_field.hpp"
#include "vmfflow/posterior.hpp"
#include "vmfflow/samplers.hpp"
#include "vmfflow/sphere.hpp"
#include "vmfflow/training.hpp"
#include "vmfflow/vmf_kernel.hpp"

using namespace vmfflow;

namespace {

const VmfTables& tables_d64() {
  static const VmfTables t = [] {
    KernelConfig c;
    c.d = 64;
    c.kappa_max = 50.0;
    return build_tables(c);
  }();
  return t;
}

struct FieldCase {
  PathKind kind = PathKind::vmf(50.0);
  EmbeddingTable emb;
  Matrix x, post;
};

// L positions, N tokens, d = 64.
FieldCase field_case(int l, int n) {
  Rng rng(1);
  FieldCase c;
  c.emb = init_embeddings(n, 64, NormConvention::Unit, rng);
  c.x = Matrix(static_cast<std::size_t>(l), 64);
  for (std::size_t i = 0; i < c.x.rows(); ++i) sample_uniform_sphere(c.x.row(i), rng);
  c.post = Matrix(static_cast<std::size_t>(l), static_cast<std::size_t>(n));
  for (double& v : c.post.flat()) v = rng.normal();
  softmax_rows(c.post, c.post);
  return c;
}

void Field(benchmark::State& state, Exec exec) {
  const auto c = field_case(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const auto& tables = tables_d64();
  FieldTerms terms;
  terms.velocity = 1.0;
  Matrix out;
  for (auto _ : state) {
    assemble_field(c.kind, c.post, c.x, 0.5, c.emb, &tables, terms, out, exec);
    benchmark::DoNotOptimize(out.flat().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void FieldReference(benchmark::State& state) {
  const auto c = field_case(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  const auto& tables = tables_d64();
  for (auto _ : state) {
    auto out = reference::marginal_velocity(c.kind, c.post, c.x, 0.5, c.emb, &tables);
    benchmark::DoNotOptimize(out.flat().data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(1));
}

void SampleBatch(benchmark::State& state, Exec exec) {
  static const VmfTables tables = build_tables(KernelConfig{});
  const auto kind = PathKind::vmf(50.0);
  const auto emb = tiny_task_embeddings();
  const OracleSource src(tiny_task_spec(), kind, emb);
  const SamplerContext ctx{kind, &emb, &tables, &src, nullptr, 3};
  SamplerConfig cfg;
  cfg.n_predictor = 64;
  cfg.k_corrector = 1;
  for (auto _ : state) {
    auto rs = sample_batch(ctx, cfg, static_cast<int>(state.range(0)), {}, exec);
    benchmark::DoNotOptimize(rs.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void PsiTableBuild(benchmark::State& state, Exec exec) {
  KernelConfig c;
  c.d = 8;
  c.n_mu = static_cast<int>(state.range(0));
  c.n_kappa = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto t = build_psi_table(c, exec);
    benchmark::DoNotOptimize(t.values.data());
  }
}

}  // namespace

BENCHMARK_CAPTURE(Field, serial, Exec::Serial)->Args({256, 64})->Args({1024, 256});
BENCHMARK_CAPTURE(Field, parallel, Exec::Parallel)->Args({256, 64})->Args({1024, 256});
BENCHMARK(FieldReference)->Args({256, 64})->Args({1024, 256});
BENCHMARK_CAPTURE(SampleBatch, serial, Exec::Serial)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(SampleBatch, parallel, Exec::Parallel)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(PsiTableBuild, serial, Exec::Serial)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(PsiTableBuild, parallel, Exec::Parallel)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
