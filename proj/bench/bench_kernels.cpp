// Serial references against the OpenMP kernels on realistic graph sizes.

#include <benchmark/benchmark.h>

#include "sigat/data_pipeline.hpp"
#include "sigat/rng.hpp"
#include "sigat/train.hpp"

using namespace sigat;

namespace {

NodeSet make_nodes(std::size_t n) {
  SplitMix64 rng(n);
  NodeSet set;
  for (std::size_t i = 0; i < n; ++i) {
    Node node;
    node.id = i;
    node.centroid = {rng.uniform(), rng.uniform()};
    node.mean_intensity = rng.uniform();
    node.features = {node.mean_intensity, rng.uniform() * 0.1, node.centroid.x, node.centroid.y};
    set.nodes.push_back(node);
  }
  return set;
}

template <auto Kernel>
void BM_correlation(benchmark::State& state) {
  const NodeSet nodes = make_nodes(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(nodes, 0.5));
}

template <auto Kernel>
void BM_select(benchmark::State& state) {
  const auto w = correlation_matrix(make_nodes(static_cast<std::size_t>(state.range(0))), 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(w, 8));
}

template <auto Kernel>
void BM_reweight(benchmark::State& state) {
  const NodeSet nodes = make_nodes(static_cast<std::size_t>(state.range(0)));
  const auto lists = select_neighbors(correlation_matrix(nodes, 0.5), 8);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(nodes, lists, 0.5));
}

template <auto Kernel>
void BM_batch(benchmark::State& state) {
  const SIGATModel model = build_model(default_model_config(3, 1));
  std::vector<LabeledGraph> graphs;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    const NodeSet nodes = make_nodes(100 + i);
    graphs.push_back({make_graph_input(nodes, sparsify(nodes, 0.5, 8)), i % 3});
  }
  std::vector<const LabeledGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(model, batch));
}

}  // namespace

BENCHMARK(BM_correlation<correlation_matrix_serial>)->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_correlation<correlation_matrix>)->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_select<select_neighbors_serial>)->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_select<select_neighbors>)->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_reweight<reweight_serial>)->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_reweight<reweight>)->Arg(100)->Arg(400)->Arg(1600);
BENCHMARK(BM_batch<batch_gradients_serial>)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_batch<batch_gradients>)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
