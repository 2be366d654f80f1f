#include "sigat/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sigat/autodiff.hpp"
#include "sigat/checkpoint.hpp"
#include "sigat/data_pipeline.hpp"
#include "sigat/error.hpp"
#include "sigat/fixtures.hpp"
#include "sigat/format.hpp"
#include "sigat/image.hpp"
#include "sigat/model.hpp"
#include "sigat/report.hpp"
#include "sigat/train.hpp"

namespace sigat {
namespace {

namespace fs = std::filesystem;

constexpr double kGradTolerance = 1e-4;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, "cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

std::string fixed(double value, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string one_line(std::string text) {
  for (char& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!text.empty() && text.back() == ' ') text.pop_back();
  return text;
}

struct GraphOptions {
  double gamma = 0.5;
  std::size_t k = kDefaultK;
  std::string grid = "10x10";
  std::string nodes = "grid";
  std::size_t superpixels = 100;
  std::size_t iterations = 10;
  std::uint64_t node_seed = 0;
};

void add_graph_options(CLI::App* sub, GraphOptions& g) {
  sub->add_option("--gamma", g.gamma, "coordinate/intensity mixing weight in [0,1]")->capture_default_str();
  sub->add_option("--k", g.k, "neighbors kept per node")->capture_default_str();
  sub->add_option("--grid", g.grid, "grid patches as WxH")->capture_default_str();
  sub->add_option("--nodes", g.nodes, "node scheme: grid or superpixel")
      ->check(CLI::IsMember({"grid", "superpixel"}))
      ->capture_default_str();
  sub->add_option("--superpixels", g.superpixels, "superpixel count")->capture_default_str();
  sub->add_option("--iterations", g.iterations, "superpixel k-means iterations")->capture_default_str();
  sub->add_option("--node-seed", g.node_seed, "superpixel seed")->capture_default_str();
}

GraphSettings graph_settings(const GraphOptions& g) {
  GraphSettings s;
  if (!(g.gamma >= 0.0 && g.gamma <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "--gamma must lie in [0, 1], got " + format_real(g.gamma));
  }
  if (g.k < 1) fail(ErrorCode::kInvalidConfig, "--k must be at least 1");
  s.gamma = g.gamma;
  s.k = g.k;

  const auto x = g.grid.find('x');
  const auto gw = x == std::string::npos ? std::nullopt : parse_count(std::string_view(g.grid).substr(0, x));
  const auto gh = x == std::string::npos ? std::nullopt : parse_count(std::string_view(g.grid).substr(x + 1));
  if (!gw || !gh || *gw < 1 || *gh < 1) {
    fail(ErrorCode::kInvalidConfig, "--grid expects WxH with positive integers, got '" + g.grid + "'");
  }
  s.nodes.grid_w = *gw;
  s.nodes.grid_h = *gh;
  s.nodes.superpixels = g.superpixels;
  s.nodes.iterations = g.iterations;
  s.nodes.seed = g.node_seed;

  std::size_t max_nodes = 0;
  if (g.nodes == "grid") {
    s.nodes.scheme = NodeScheme::kGrid;
    max_nodes = s.nodes.grid_w * s.nodes.grid_h;
  } else if (g.nodes == "superpixel") {
    s.nodes.scheme = NodeScheme::kSuperpixel;
    if (g.superpixels < 2) fail(ErrorCode::kInvalidConfig, "--superpixels must be at least 2");
    max_nodes = g.superpixels;
  } else {
    fail(ErrorCode::kInvalidConfig, "--nodes must be grid or superpixel, got '" + g.nodes + "'");
  }
  if (max_nodes < 2) fail(ErrorCode::kInvalidConfig, "node scheme yields fewer than 2 nodes");
  if (s.k > max_nodes - 1) {
    fail(ErrorCode::kInvalidConfig, "--k " + std::to_string(s.k) + " exceeds n - 1 = " +
                                        std::to_string(max_nodes - 1));
  }
  return s;
}

fs::path resolve(const fs::path& base, const std::string& entry) {
  const fs::path p(entry);
  return p.is_absolute() ? p : base / p;
}

struct LoadedSplit {
  std::vector<LabeledGraph> train, val, test;
};

LoadedSplit load_dataset(const fs::path& manifest_path, const DatasetManifest& manifest,
                         const GraphSettings& settings, const std::vector<std::string>& class_names) {
  const fs::path base = manifest_path.parent_path();
  LoadedSplit out;
  for (const auto& entry : manifest.entries) {
    std::size_t label = class_names.size();
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      if (class_names[c] == entry.label) label = c;
    }
    if (label == class_names.size()) {
      fail(ErrorCode::kInvalidConfig, manifest_path.string() + ": unknown class '" + entry.label + "'");
    }
    const SonarImage image = read_image(resolve(base, entry.path));
    BuiltGraph built;
    try {
      built = build_graph(image, settings);
    } catch (const Error& e) {
      fail(e.code(), entry.path + ": " + e.what());
    }
    LabeledGraph g{make_graph_input(built.nodes, built.graph), label};
    switch (entry.split) {
      case Split::kTrain: out.train.push_back(std::move(g)); break;
      case Split::kVal: out.val.push_back(std::move(g)); break;
      case Split::kTest: out.test.push_back(std::move(g)); break;
    }
  }
  return out;
}

// key = value lines become --key value arguments placed before the command
// line flags, so explicit flags override the file.
std::vector<std::string> config_arguments(const fs::path& path, const CLI::App& sub) {
  std::istringstream in(read_text(path));
  std::vector<std::string> args;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto where = path.string() + ":" + std::to_string(number) + ": ";
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kInvalidConfig, where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) fail(ErrorCode::kInvalidConfig, where + "expected key = value");
    if (key == "config" || sub.get_option_no_throw("--" + key) == nullptr) {
      fail(ErrorCode::kInvalidConfig, where + "unknown key '" + key + "' for " + sub.get_name());
    }
    args.push_back("--" + key);
    args.push_back(value);
  }
  return args;
}

int cmd_synth(const std::string& out_dir, const SyntheticConfig& config, std::uint64_t seed,
              const std::vector<double>& ratios, std::ostream& out) {
  config.validate();
  SplitRatios r{ratios.at(0), ratios.at(1), ratios.at(2)};
  const auto images = synth_sonar(config, seed);

  DatasetManifest manifest;
  for (const auto a : config.classes) manifest.class_names.emplace_back(to_string(a));
  const fs::path root(out_dir);
  ensure_dir(root / "images");
  std::vector<std::size_t> seen(config.classes.size(), 0);
  for (const auto& s : images) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.pgm", manifest.class_names[s.label].c_str(), seen[s.label]++);
    const std::string rel = std::string("images/") + name;
    write_pgm(s.image, root / rel);
    manifest.entries.push_back({rel, manifest.class_names[s.label], Split::kTrain});
  }
  const auto splits = split_dataset(manifest, r, seed);
  for (std::size_t i = 0; i < splits.size(); ++i) manifest.entries[i].split = splits[i];
  write_manifest(manifest, root / "manifest.csv");
  const auto counts = count_splits(splits);
  out << "images " << images.size() << " train " << counts.train << " val " << counts.val << " test "
      << counts.test << "\n";
  return 0;
}

int cmd_build_graph(const std::string& image_path, const std::string& out_path, const GraphOptions& g,
                    std::ostream& out) {
  const GraphSettings settings = graph_settings(g);
  const SonarImage image = read_image(image_path);
  const BuiltGraph built = build_graph(image, settings);
  ensure_parent(out_path);
  cache_graph(built, out_path);
  const std::size_t n = built.graph.n;
  const double density = static_cast<double>(built.graph.weights_prime.nnz()) /
                         (static_cast<double>(n) * static_cast<double>(n));
  out << "n " << n << "\nk " << built.graph.k << "\ndensity " << format_real(density) << "\n";
  return 0;
}

struct TrainOptions {
  std::string manifest;
  std::string out_dir;
  GraphOptions graph;
  TrainConfig train;
  std::string optimizer = "adam";
  std::size_t layers = 4;
  std::size_t heads = 8;
  std::size_t hidden = 10;
  std::size_t embedding = 152;
};

int cmd_train(TrainOptions& o, std::ostream& out) {
  const GraphSettings settings = graph_settings(o.graph);
  o.train.optimizer = parse_optimizer(o.optimizer);
  o.train.gamma = settings.gamma;
  o.train.k = settings.k;
  o.train.validate();
  const DatasetManifest manifest = read_manifest(o.manifest);
  manifest.validate();
  const ModelConfig model_config =
      stacked_model_config(manifest.class_names.size(), o.layers, o.heads, o.hidden, o.embedding, o.train.seed);

  const auto data = load_dataset(o.manifest, manifest, settings, manifest.class_names);
  if (data.train.empty()) fail(ErrorCode::kInvalidConfig, o.manifest + ": no training entries");

  const fs::path root(o.out_dir);
  ensure_dir(root);
  SIGATModel model = build_model(model_config);
  out << "parameters " << model.parameter_count() << "\n";
  out << "graphs train " << data.train.size() << " val " << data.val.size() << " test " << data.test.size()
      << "\n";

  TrainResult result = train(std::move(model), data.train, data.val, o.train, [&](const EpochRecord& r) {
    out << "epoch " << r.epoch << " lr " << fixed(r.lr, 8) << " train_loss " << fixed(r.train_loss)
        << " val_loss " << fixed(r.val_loss) << " val_acc " << fixed(r.val_acc, 4) << "\n";
    out.flush();
  });

  std::ostringstream summary;
  summary << "parameters " << result.best.parameter_count() << "\n";
  summary << "best_epoch " << result.metrics.best_epoch << "\n";
  if (!data.test.empty()) {
    const EvalResult test = evaluate(result.best, data.test);
    result.metrics.test_accuracy = test.accuracy;
    result.metrics.confusion = test.confusion;
    write_text(root / "test_confusion.csv", confusion_csv(test.confusion, manifest.class_names));
    summary << "test_accuracy " << format_real(test.accuracy) << "\n";
    summary << "test_loss " << format_real(test.mean_loss) << "\n";
    out << "test_accuracy " << fixed(test.accuracy, 4) << "\n";
  }
  write_text(root / "metrics.csv", metrics_csv(result.metrics));
  save_checkpoint({result.best, settings, manifest.class_names}, root / "checkpoint.txt");
  write_text(root / "summary.txt", summary.str());
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& manifest_path, const std::string& split,
             const std::string& out_dir, std::ostream& out) {
  if (split != "train" && split != "val" && split != "test" && split != "all") {
    fail(ErrorCode::kInvalidConfig, "--split must be train, val, test or all, got '" + split + "'");
  }
  const Checkpoint checkpoint = load_checkpoint(checkpoint_path);
  DatasetManifest manifest = read_manifest(manifest_path);
  manifest.validate();
  auto data = load_dataset(manifest_path, manifest, checkpoint.graph, checkpoint.class_names);
  std::vector<LabeledGraph> chosen;
  const auto take = [&](std::vector<LabeledGraph>& v) {
    for (auto& g : v) chosen.push_back(std::move(g));
  };
  if (split == "train" || split == "all") take(data.train);
  if (split == "val" || split == "all") take(data.val);
  if (split == "test" || split == "all") take(data.test);
  if (chosen.empty()) fail(ErrorCode::kInvalidConfig, manifest_path + ": no entries in split " + split);

  const EvalResult result = evaluate(checkpoint.model, chosen);
  const fs::path root(out_dir);
  ensure_dir(root);
  write_text(root / "confusion.csv", confusion_csv(result.confusion, checkpoint.class_names));
  write_text(root / "eval.txt", "split " + split + "\ngraphs " + std::to_string(chosen.size()) +
                                    "\naccuracy " + format_real(result.accuracy) + "\nloss " +
                                    format_real(result.mean_loss) + "\n");
  out << "graphs " << chosen.size() << "\naccuracy " << fixed(result.accuracy, 4) << "\nloss "
      << fixed(result.mean_loss) << "\n";
  return 0;
}

int cmd_gradcheck(double epsilon, std::uint64_t seed, std::size_t label, std::ostream& out) {
  const BuiltGraph fixture = gradcheck_graph();
  const ModelConfig config = gradcheck_model_config(seed);
  if (label >= config.num_classes) fail(ErrorCode::kInvalidConfig, "--label must be 0 or 1");
  const SIGATModel model = build_model(config);
  const GraphInput input = make_graph_input(fixture.nodes, fixture.graph);

  ad::GradCheckOptions options;
  options.epsilon = epsilon;
  options.seed = seed;
  const auto result = ad::grad_check(
      [&](ad::Tape& tape, std::span<const ad::Var> params) {
        return classification_loss(tape, forward_logits(tape, params, config, input), label);
      },
      model.parameters(), options);

  out << "nodes " << fixture.graph.n << "\nparameters " << model.parameter_count() << "\ncoordinates "
      << result.coordinates << "\nmax_relative_error " << format_real(result.max_relative_error) << "\n";
  if (result.max_relative_error >= kGradTolerance) {
    fail(ErrorCode::kNumeric, "gradient check failed: max relative error " +
                                  format_real(result.max_relative_error) + " at parameter " +
                                  std::to_string(result.worst_param) + " index " +
                                  std::to_string(result.worst_index));
  }
  return 0;
}

int cmd_report(const std::string& metrics_path, const std::string& out_path, std::ostream& out) {
  const auto records = parse_metrics_csv(read_text(metrics_path), metrics_path);
  ensure_parent(out_path);
  write_text(out_path, render_svg(records));
  out << "points " << records.size() << "\n";
  return 0;
}

}  // namespace

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sigat: sonar image graph attention networks", "sigat"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value file; flags override it");
  };

  SyntheticConfig synth;
  std::string synth_out;
  std::uint64_t synth_seed = 0;
  std::vector<std::string> synth_classes = {"disk", "bar", "ring"};
  std::vector<double> ratios = {0.7, 0.1, 0.2};
  auto* s = app.add_subcommand("synth", "generate a labeled synthetic sonar dataset");
  s->add_option("--out", synth_out, "dataset directory")->required();
  s->add_option("--seed", synth_seed)->capture_default_str();
  s->add_option("--per-class", synth.per_class)->capture_default_str();
  s->add_option("--width", synth.width)->capture_default_str();
  s->add_option("--height", synth.height)->capture_default_str();
  s->add_option("--classes", synth_classes, "archetypes: disk, bar, ring")
      ->check(CLI::IsMember({"disk", "bar", "ring"}))
      ->delimiter(',')
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->expected(1, 3);
  s->add_option("--noise", synth.noise_amplitude, "speckle amplitude in [0,1]")->capture_default_str();
  s->add_option("--ratios", ratios, "train,val,test fractions")->delimiter(',')->expected(3)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  add_config(s);

  std::string image_path, graph_out;
  GraphOptions bg;
  auto* b = app.add_subcommand("build-graph", "build and cache the sparse graph of one image");
  b->add_option("--image", image_path, "PGM or PNG image")->required();
  b->add_option("--out", graph_out, "graph cache file")->required();
  add_graph_options(b, bg);
  add_config(b);

  TrainOptions to;
  auto* t = app.add_subcommand("train", "train a model on a manifest");
  t->add_option("--manifest", to.manifest)->required();
  t->add_option("--out", to.out_dir, "output directory")->required();
  add_graph_options(t, to.graph);
  t->add_option("--epochs", to.train.epochs)->capture_default_str();
  t->add_option("--batch-size", to.train.batch_size)->capture_default_str();
  t->add_option("--lr", to.train.lr0)->capture_default_str();
  t->add_option("--lr-decay", to.train.lr_decay)->capture_default_str();
  t->add_option("--decay-every", to.train.decay_every)->capture_default_str();
  t->add_option("--optimizer", to.optimizer, "sgd or adam")
      ->check(CLI::IsMember({"sgd", "adam"}))
      ->capture_default_str();
  t->add_option("--seed", to.train.seed)->capture_default_str();
  t->add_option("--layers", to.layers)->capture_default_str();
  t->add_option("--heads", to.heads)->capture_default_str();
  t->add_option("--hidden", to.hidden, "width per head of the concatenating layers")->capture_default_str();
  t->add_option("--embedding", to.embedding, "width of the averaged last layer")->capture_default_str();
  add_config(t);

  std::string ckpt, eval_manifest, eval_split = "test", eval_out;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint");
  e->add_option("--checkpoint", ckpt)->required();
  e->add_option("--manifest", eval_manifest)->required();
  e->add_option("--split", eval_split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}))
      ->capture_default_str();
  e->add_option("--out", eval_out, "output directory")->required();
  add_config(e);

  double epsilon = 1e-5;
  std::uint64_t gc_seed = kGradcheckSeed;
  std::size_t gc_label = 1;
  auto* g = app.add_subcommand("gradcheck", "finite-difference check of the model gradients");
  g->add_option("--epsilon", epsilon)->capture_default_str();
  g->add_option("--seed", gc_seed)->capture_default_str();
  g->add_option("--label", gc_label)->capture_default_str();
  add_config(g);

  std::string metrics_path, svg_out;
  auto* r = app.add_subcommand("report", "render training curves as SVG");
  r->add_option("--metrics", metrics_path)->required();
  r->add_option("--out", svg_out, "SVG file")->required();
  add_config(r);

  try {
    std::vector<std::string> argv(args.begin(), args.end());
    // Splice config entries in front of the flags of the subcommand.
    for (std::size_t i = 0; i < argv.size(); ++i) {
      std::string path;
      std::size_t width = 0;
      if (argv[i] == "--config" && i + 1 < argv.size()) {
        path = argv[i + 1];
        width = 2;
      } else if (argv[i].rfind("--config=", 0) == 0) {
        path = argv[i].substr(9);
        width = 1;
      } else {
        continue;
      }
      const CLI::App* sub = argv.empty() ? nullptr : app.get_subcommand_no_throw(argv[0]);
      if (sub == nullptr) fail(ErrorCode::kInvalidConfig, "--config must follow a subcommand name");
      auto extra = config_arguments(path, *sub);
      argv.erase(argv.begin() + static_cast<std::ptrdiff_t>(i), argv.begin() + static_cast<std::ptrdiff_t>(i + width));
      argv.insert(argv.begin() + 1, extra.begin(), extra.end());
      break;
    }

    try {
      std::vector<std::string> reversed(argv.rbegin(), argv.rend());
      app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
      if (app.get_subcommands().empty()) {
        out << app.help();
      } else {
        out << app.get_subcommands().front()->help(app.get_name());
      }
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& pe) {
      fail(ErrorCode::kInvalidConfig, pe.what());
    }

    if (s->parsed()) {
      synth.classes.clear();
      for (const auto& name : synth_classes) synth.classes.push_back(parse_archetype(name));
      return cmd_synth(synth_out, synth, synth_seed, ratios, out);
    }
    if (b->parsed()) return cmd_build_graph(image_path, graph_out, bg, out);
    if (t->parsed()) return cmd_train(to, out);
    if (e->parsed()) return cmd_eval(ckpt, eval_manifest, eval_split, eval_out, out);
    if (g->parsed()) return cmd_gradcheck(epsilon, gc_seed, gc_label, out);
    if (r->parsed()) return cmd_report(metrics_path, svg_out, out);
    fail(ErrorCode::kInvalidConfig, "no subcommand given");
  } catch (const Error& ex) {
    err << "error[" << error_code_name(ex.code()) << "]: " << one_line(ex.what()) << "\n";
    return static_cast<int>(ex.code());
  } catch (const std::exception& ex) {
    err << "error[io]: " << one_line(ex.what()) << "\n";
    return static_cast<int>(ErrorCode::kIo);
  }
}

}  // namespace sigat
