#include <doctest.h>

#include <omp.h>

#include "oracles.hpp"
#include "sigat/train.hpp"

using namespace sigat;

namespace {

struct Threads {
  int saved = omp_get_max_threads();
  explicit Threads(int n) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("OpenMP kernels match the serial references bit for bit") {
  SplitMix64 rng(4);
  for (int threads : {1, 3, 8}) {
    Threads guard(threads);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t n = 3 + rng.below(60);
      const NodeSet nodes = oracle::random_nodes(rng, n, trial % 2 == 0);
      const double gamma = rng.uniform();
      const auto a = correlation_matrix(nodes, gamma);
      const auto b = correlation_matrix_serial(nodes, gamma);
      CHECK(a.weights == b.weights);
      CHECK(a.delta_x == b.delta_x);
      CHECK(a.delta_f == b.delta_f);
      const std::size_t k = 1 + rng.below(n - 1);
      const auto la = select_neighbors(a, k);
      CHECK(la == select_neighbors_serial(a, k));
      CHECK(reweight(nodes, la, gamma) == reweight_serial(nodes, la, gamma));
    }
  }
}

TEST_CASE("batched gradients do not depend on the thread count") {
  SplitMix64 rng(5);
  const SIGATModel model = build_model(stacked_model_config(3, 2, 2, 4, 6, 1));
  std::vector<LabeledGraph> graphs;
  for (std::size_t i = 0; i < 7; ++i) {
    const NodeSet nodes = oracle::random_nodes(rng, 5 + rng.below(20));
    graphs.push_back({make_graph_input(nodes, sparsify(nodes, 0.5, 3)), i % 3});
  }
  std::vector<const LabeledGraph*> batch;
  for (const auto& g : graphs) batch.push_back(&g);
  const LossAndGrad ref = batch_gradients_serial(model, batch);
  for (int threads : {1, 2, 5}) {
    Threads guard(threads);
    const LossAndGrad got = batch_gradients(model, batch);
    CHECK(got.loss == ref.loss);
    REQUIRE(got.grads.size() == ref.grads.size());
    for (std::size_t t = 0; t < ref.grads.size(); ++t) CHECK(got.grads[t].values == ref.grads[t].values);
  }
}
