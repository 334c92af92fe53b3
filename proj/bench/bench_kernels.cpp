// OpenMP kernels against their serial references. Run with OMP_NUM_THREADS=N to
// see scaling; on one core the two should be close.

#include <benchmark/benchmark.h>

#include "hgtok/kernels.hpp"
#include "hgtok/rng.hpp"

namespace {

using hgtok::Matrix;

Matrix<float> random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  hgtok::Rng rng(seed);
  Matrix<float> m(rows, cols);
  for (auto& x : m.storage()) x = static_cast<float>(rng.normal());
  return m;
}

hgtok::Hypergraph random_hypergraph(std::size_t n, std::size_t m, std::uint64_t seed) {
  hgtok::Rng rng(seed);
  std::vector<hgtok::VertexId> vertices(n);
  for (std::size_t i = 0; i < n; ++i) vertices[i] = i;
  std::vector<std::vector<hgtok::VertexId>> edges;
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<hgtok::VertexId> members;
    const std::size_t r = 2 + rng.index(6);
    while (members.size() < r) {
      const hgtok::VertexId v = rng.index(n);
      if (std::find(members.begin(), members.end(), v) == members.end()) members.push_back(v);
    }
    edges.push_back(members);
  }
  return hgtok::Hypergraph::from_edges(vertices, edges);
}

template <bool kParallel>
void BM_Linear(benchmark::State& state) {
  const std::size_t rows = state.range(0), d = 448;
  const auto x = random_matrix(rows, d, 1), w = random_matrix(d, d, 2);
  Matrix<float> y(rows, d);
  const std::vector<float> bias(d, 0.1f);
  for (auto _ : state) {
    if constexpr (kParallel) hgtok::kernels::linear<float>(x.cview(), w.cview(), bias, y.view());
    else hgtok::kernels::reference::linear<float>(x.cview(), w.cview(), bias, y.view());
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(rows * d * d));
}
BENCHMARK(BM_Linear<true>)->Arg(81)->Arg(512);
BENCHMARK(BM_Linear<false>)->Arg(81)->Arg(512);

template <bool kParallel>
void BM_CausalAttention(benchmark::State& state) {
  const std::size_t len = state.range(0), d = 128, heads = 4;
  const auto qkv = random_matrix(len, 3 * d, 3);
  Matrix<float> out(len, d), probs(heads * len, len);
  for (auto _ : state) {
    if constexpr (kParallel) hgtok::kernels::causal_attention<float>(qkv.cview(), heads, out.view(), probs.view());
    else hgtok::kernels::reference::causal_attention<float>(qkv.cview(), heads, out.view(), probs.view());
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_CausalAttention<true>)->Arg(256)->Arg(512);
BENCHMARK(BM_CausalAttention<false>)->Arg(256)->Arg(512);

template <bool kParallel>
void BM_HyperedgeMean(benchmark::State& state) {
  const auto h = random_hypergraph(20000, 15000, 4);
  const auto v = random_matrix(h.num_vertices(), 64, 5);
  Matrix<float> e(h.num_hyperedges(), 64);
  for (auto _ : state) {
    if constexpr (kParallel) hgtok::kernels::hyperedge_mean<float>(h, v.cview(), e.view());
    else hgtok::kernels::reference::hyperedge_mean<float>(h, v.cview(), e.view());
    benchmark::DoNotOptimize(e.data());
  }
}
BENCHMARK(BM_HyperedgeMean<true>);
BENCHMARK(BM_HyperedgeMean<false>);

}  // namespace

BENCHMARK_MAIN();
