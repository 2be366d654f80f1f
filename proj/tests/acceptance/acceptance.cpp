// Prints one PASS/FAIL line per acceptance criterion and exits non-zero if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sigat/cli.hpp"
#include "sigat/data_pipeline.hpp"
#include "sigat/fixtures.hpp"
#include "sigat/gat_layer.hpp"
#include "sigat/train.hpp"
#include "support.hpp"

using namespace sigat;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Outcome weight_oracles() {
  const auto t0 = Clock::now();
  SplitMix64 rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(29);
    const NodeSet nodes = oracle::random_nodes(rng, n, trial % 3 == 0);
    const double gamma = rng.uniform();
    const auto w = correlation_matrix(nodes, gamma);
    const auto ref = oracle::correlation(nodes, gamma);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::fabs(w.weights(i, j) - ref[i][j]));
    }
    const std::size_t k = 1 + rng.below(n - 1);
    const auto lists = select_neighbors(w, k);
    const auto rw = oracle::reweighted(nodes, lists, gamma);
    const CsrMatrix csr = reweight(nodes, lists, gamma);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t e = csr.offsets[i]; e < csr.offsets[i + 1]; ++e) {
        worst = std::max(worst, std::fabs(csr.values[e] - rw[i][csr.columns[e]]));
      }
    }
  }
  const double s = seconds_since(t0);
  return {worst <= 1e-12 && s < 10.0, "max error " + num(worst) + ", " + num(s) + " s"};
}

Outcome knn_exhaustive() {
  SplitMix64 rng(102);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(24);
    // Coarse coordinates and intensities produce many tied weights.
    const NodeSet nodes = oracle::random_nodes(rng, n, trial % 2 == 0);
    const auto w = correlation_matrix(nodes, rng.uniform());
    // Subset enumeration is combinatorial, so k stays small or covers everything.
    const std::size_t k = trial % 5 == 4 ? n - 1 : 1 + rng.below(std::min<std::size_t>(n - 1, 5));
    const auto lists = select_neighbors(w, k);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) row[j] = w.weights(i, j);
      std::vector<std::size_t> picked(lists[i].begin() + 1, lists[i].end());
      std::sort(picked.begin(), picked.end());
      mismatches += lists[i].front() != i || picked != oracle::top_k_exhaustive(row, i, k);
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatched rows"};
}

Outcome attention_invariants() {
  SplitMix64 rng(103);
  double row_err = 0.0, off_support = 0.0, mask_err = 0.0, perm_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(20);
    const auto lists = oracle::random_lists(rng, n, 1 + rng.below(n - 1));
    const AttentionGraph g = attention_graph(lists);
    const ad::Tensor h = oracle::random_tensor(rng, n, 5);
    const AttentionHead head = init_head(5, 4, rng.next());

    ad::Tape tape;
    const auto z = gat::transform(tape, tape.constant(h), tape.constant(head.q));
    const auto e = gat::attention_logits(tape, z, tape.constant(head.a), g);
    const auto alpha = gat::dense_coefficients(tape.value(gat::masked_attention(tape, e, g)), g);

    const auto logits = oracle::pair_logits(oracle::transform(oracle::to_dense(h), head.q), head.a, kLeakySlope);
    const auto ref = oracle::dense_mask_softmax(logits, oracle::mask(lists));
    const auto m = oracle::mask(lists);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double a = alpha[i * n + j];
        sum += a;
        if (m[i][j] == 0.0) off_support = std::max(off_support, std::fabs(a));
        mask_err = std::max(mask_err, std::fabs(a - ref[i][j]));
      }
      row_err = std::max(row_err, std::fabs(sum - 1.0));
    }

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = 0; i + 1 < n; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
    NeighborLists plists(n);
    ad::Tensor ph = h;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j : lists[i]) plists[perm[i]].push_back(perm[j]);
      for (std::size_t f = 0; f < 5; ++f) ph(perm[i], f) = h(i, f);
    }
    const LayerConfig cfg{5, 4, 3, HeadCombine::kConcat, kLeakySlope, Activation::kElu};
    std::vector<AttentionHead> heads;
    for (std::size_t k = 0; k < 3; ++k) heads.push_back(init_head(5, 4, rng.next()));
    const auto run = [&](const ad::Tensor& x, const NeighborLists& l) {
      ad::Tape t;
      std::vector<gat::HeadVars> vars;
      for (const auto& hd : heads) vars.push_back({t.constant(hd.q), t.constant(hd.a)});
      return t.value(gat::multi_head(t, t.constant(x), vars, cfg, attention_graph(l)));
    };
    const ad::Tensor a = run(h, lists), b = run(ph, plists);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < a.cols(); ++c) perm_err = std::max(perm_err, std::fabs(a(i, c) - b(perm[i], c)));
    }
  }
  const bool pass = row_err <= 1e-9 && off_support == 0.0 && mask_err <= 1e-9 && perm_err <= 1e-12;
  return {pass, "row " + num(row_err) + ", off-support " + num(off_support) + ", mask " + num(mask_err) +
                    ", permutation " + num(perm_err)};
}

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const BuiltGraph fx = gradcheck_graph();
  const ModelConfig cfg = gradcheck_model_config();
  const SIGATModel model = build_model(cfg);
  const GraphInput in = make_graph_input(fx.nodes, fx.graph);
  double worst = 0.0;
  for (std::size_t label : {0, 1}) {
    ad::GradCheckOptions o;
    o.epsilon = 1e-5;
    const auto r = ad::grad_check(
        [&](ad::Tape& t, std::span<const ad::Var> p) { return classification_loss(t, forward_logits(t, p, cfg, in), label); },
        model.parameters(), o);
    worst = std::max(worst, r.max_relative_error);
  }
  const double s = seconds_since(t0);
  return {fx.graph.n == 6 && worst < 1e-4 && s < 30.0,
          std::to_string(model.parameter_count()) + " coordinates, max relative error " + num(worst) + ", " +
              num(s) + " s"};
}

std::string read_key(const std::filesystem::path& file, const std::string& key) {
  std::ifstream in(file);
  std::string k, v;
  while (in >> k >> v) {
    if (k == key) return v;
  }
  return "";
}

int cli(std::vector<std::string> args, std::string* output = nullptr) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (output) *output = out.str();
  if (code != 0) std::fprintf(stderr, "%s", err.str().c_str());
  return code;
}

Outcome desk_training(const std::filesystem::path& dir) {
  const auto t0 = Clock::now();
  const std::string data = (dir / "desk").string(), run = (dir / "desk_run").string();
  std::string synth_out;
  // 40 per class at 0.75 : 1/12 : 1/6 gives 90 / 10 / 20.
  if (cli({"synth", "--out", data, "--per-class", "40", "--seed", "7", "--ratios",
           "0.75,0.08333333333333333,0.16666666666666667"},
          &synth_out) != 0) {
    return {false, "synth failed"};
  }
  if (synth_out != "images 120 train 90 val 10 test 20\n") return {false, "unexpected split: " + synth_out};
  if (cli({"train", "--manifest", data + "/manifest.csv", "--out", run, "--gamma", "0.5", "--k", "8", "--grid",
           "10x10", "--epochs", "250", "--batch-size", "4", "--lr", "0.001", "--lr-decay", "0.5", "--decay-every",
           "50", "--seed", "1"}) != 0) {
    return {false, "train failed"};
  }
  const std::string acc_text = read_key(std::filesystem::path(run) / "summary.txt", "test_accuracy");
  const double acc = acc_text.empty() ? 0.0 : std::stod(acc_text);
  const double s = seconds_since(t0);
  return {acc >= 0.90 && s < 600.0, "test accuracy " + num(acc) + ", " + num(s) + " s"};
}

Outcome overfit() {
  SyntheticConfig sc;
  sc.per_class = 1;
  const auto images = synth_sonar(sc, 12);
  GraphSettings gs;
  gs.k = 8;
  const BuiltGraph b = build_graph(images[2].image, gs);
  const std::vector<LabeledGraph> one = {{make_graph_input(b.nodes, b.graph), images[2].label}};
  TrainConfig c;
  c.epochs = 100;
  c.seed = 5;
  const auto r = train(build_model(default_model_config(3, 5)), one, {}, c);
  std::size_t first = 0;
  for (; first < r.metrics.epochs.size() && r.metrics.epochs[first].train_loss >= 0.01; ++first) {
  }
  const bool pass = first < r.metrics.epochs.size();
  return {pass, pass ? "loss below 0.01 at epoch " + std::to_string(first) : "loss never below 0.01"};
}

Outcome determinism(const std::filesystem::path& dir) {
  const std::string data = (dir / "det").string();
  if (cli({"synth", "--out", data, "--per-class", "6", "--width", "64", "--height", "64", "--seed", "2"}) != 0) {
    return {false, "synth failed"};
  }
  std::vector<std::string> metrics, checkpoints;
  for (const char* name : {"det_a", "det_b"}) {
    const std::string run = (dir / name).string();
    if (cli({"train", "--manifest", data + "/manifest.csv", "--out", run, "--grid", "6x6", "--k", "5", "--epochs",
             "6", "--seed", "3"}) != 0) {
      return {false, "train failed"};
    }
    metrics.push_back(support::slurp(run + "/metrics.csv"));
    checkpoints.push_back(support::slurp(run + "/checkpoint.txt"));
  }
  const bool same_metrics = metrics[0] == metrics[1], same_ckpt = checkpoints[0] == checkpoints[1];
  return {same_metrics && same_ckpt, std::string("metrics ") + (same_metrics ? "identical" : "differ") +
                                         ", checkpoint " + (same_ckpt ? "identical" : "differ")};
}

Outcome parameter_budget() {
  const std::size_t p = build_model(default_model_config(3)).parameter_count();
  return {p >= 50000 && p <= 200000, std::to_string(p) + " parameters"};
}

Outcome split_counts(const std::filesystem::path& dir) {
  DatasetManifest m;
  const std::vector<std::pair<std::string, std::size_t>> classes = {{"disk", 268}, {"bar", 268}, {"ring", 267}};
  for (const auto& [name, count] : classes) {
    m.class_names.push_back(name);
    for (std::size_t i = 0; i < count; ++i) m.entries.push_back({name + std::to_string(i) + ".pgm", name, Split::kTrain});
  }
  write_manifest(m, dir / "m803.csv");
  const DatasetManifest back = read_manifest(dir / "m803.csv");
  const SplitCounts c = count_splits(split_dataset(back, {0.7, 0.1, 0.2}, 4));
  return {back.entries.size() == 803 && c.train == 562 && c.val == 80 && c.test == 161,
          std::to_string(c.train) + "/" + std::to_string(c.val) + "/" + std::to_string(c.test)};
}

}  // namespace

int main() {
  support::TempDir dir("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"graph weight oracles", weight_oracles},
      {"knn matches exhaustive top-k", knn_exhaustive},
      {"attention invariants", attention_invariants},
      {"gradient check", gradient_check},
      {"desk-scale training", [&] { return desk_training(dir.path()); }},
      {"overfit single graph", overfit},
      {"pipeline determinism", [&] { return determinism(dir.path()); }},
      {"parameter budget", parameter_budget},
      {"split counts", [&] { return split_counts(dir.path()); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
