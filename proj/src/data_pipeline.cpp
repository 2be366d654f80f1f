#include "sigat/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sigat/error.hpp"
#include "sigat/format.hpp"
#include "sigat/rng.hpp"
#include "text_reader.hpp"

namespace sigat {

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "val") return Split::kVal;
  if (text == "test") return Split::kTest;
  fail(ErrorCode::kParse, "unknown split '" + std::string(text) + "'");
}

std::size_t DatasetManifest::label_index(std::string_view label) const {
  const auto it = std::find(class_names.begin(), class_names.end(), label);
  if (it == class_names.end()) fail(ErrorCode::kContract, "unknown class label '" + std::string(label) + "'");
  return static_cast<std::size_t>(it - class_names.begin());
}

void DatasetManifest::validate() const {
  for (const ManifestEntry& e : entries) label_index(e.label);
}

namespace {

std::vector<std::string> split_fields(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  if (!line.empty() && line.back() == sep) fields.emplace_back();
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

}  // namespace

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "path,label,split") {
    fail(ErrorCode::kParse, path.string() + ":1: expected header 'path,label,split'");
  }
  DatasetManifest manifest;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_fields(line, ',');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": expected path,label,split");
    }
    ManifestEntry entry{fields[0], fields[1], Split::kTrain};
    try {
      entry.split = parse_split(fields[2]);
    } catch (const Error& e) {
      fail(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (std::find(manifest.class_names.begin(), manifest.class_names.end(), entry.label) ==
        manifest.class_names.end()) {
      manifest.class_names.push_back(entry.label);
    }
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "path,label,split\n";
  for (const ManifestEntry& e : manifest.entries) {
    if (e.path.find(',') != std::string::npos || e.label.find(',') != std::string::npos) {
      fail(ErrorCode::kInvalidConfig, "manifest fields may not contain commas: " + e.path);
    }
    out << e.path << ',' << e.label << ',' << to_string(e.split) << '\n';
  }
  write_file(path, out.str());
}

namespace {

std::size_t floor_count(double ratio, std::size_t n) {
  return static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 1e-9));
}

// Adds the entries missing from the per-class floors to the classes with the
// largest fractional remainder, respecting each class's remaining capacity.
void apportion(std::vector<std::size_t>& counts, const std::vector<std::size_t>& sizes,
               const std::vector<std::size_t>& capacity, double ratio, std::size_t target) {
  const std::size_t have = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  if (have >= target) return;
  std::vector<std::size_t> order(counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto frac = [&](std::size_t c) { return ratio * static_cast<double>(sizes[c]) - static_cast<double>(counts[c]); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return frac(a) > frac(b); });
  std::size_t missing = target - have;
  for (std::size_t c : order) {
    if (missing == 0) break;
    if (counts[c] < capacity[c]) {
      ++counts[c];
      --missing;
    }
  }
}

}  // namespace

std::vector<Split> split_dataset(const DatasetManifest& manifest, const SplitRatios& ratios,
                                 std::uint64_t seed) {
  if (ratios.train < 0.0 || ratios.val < 0.0 || ratios.test < 0.0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidConfig, "split ratios must be non-negative and sum to 1");
  }
  manifest.validate();
  const std::size_t classes = manifest.class_names.size();
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    members[manifest.label_index(manifest.entries[i].label)].push_back(i);
  }
  std::vector<std::size_t> sizes(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    sizes[c] = members[c].size();
    if (sizes[c] < 3) {
      fail(ErrorCode::kInsufficientClass, "class '" + manifest.class_names[c] + "' has " +
                                              std::to_string(sizes[c]) + " examples; at least 3 are required");
    }
  }
  const std::size_t total = manifest.entries.size();
  std::vector<std::size_t> train(classes);
  std::vector<std::size_t> val(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    train[c] = floor_count(ratios.train, sizes[c]);
    val[c] = floor_count(ratios.val, sizes[c]);
  }
  std::vector<std::size_t> capacity(classes);
  for (std::size_t c = 0; c < classes; ++c) capacity[c] = sizes[c] - val[c];
  apportion(train, sizes, capacity, ratios.train, floor_count(ratios.train, total));
  for (std::size_t c = 0; c < classes; ++c) capacity[c] = sizes[c] - train[c];
  apportion(val, sizes, capacity, ratios.val, floor_count(ratios.val, total));

  std::vector<Split> splits(total, Split::kTest);
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<std::size_t> idx = members[c];
    SplitMix64 rng(derive_seed(seed, c));
    for (std::size_t i = idx.size(); i > 1; --i) {
      std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.below(i))]);
    }
    for (std::size_t i = 0; i < idx.size(); ++i) {
      splits[idx[i]] = i < train[c] ? Split::kTrain : (i < train[c] + val[c] ? Split::kVal : Split::kTest);
    }
  }
  return splits;
}

SplitCounts count_splits(const std::vector<Split>& splits) {
  SplitCounts counts;
  for (Split s : splits) {
    if (s == Split::kTrain) ++counts.train;
    else if (s == Split::kVal) ++counts.val;
    else ++counts.test;
  }
  return counts;
}

std::string_view to_string(Archetype archetype) {
  switch (archetype) {
    case Archetype::kDisk: return "disk";
    case Archetype::kBar: return "bar";
    case Archetype::kRing: return "ring";
  }
  return "disk";
}

Archetype parse_archetype(std::string_view text) {
  if (text == "disk") return Archetype::kDisk;
  if (text == "bar") return Archetype::kBar;
  if (text == "ring") return Archetype::kRing;
  fail(ErrorCode::kParse, "unknown archetype '" + std::string(text) + "'");
}

namespace {

struct ShapeExtent {
  double half_w;
  double half_h;
};

// Nominal size relative to the shorter image side.
ShapeExtent nominal_extent(Archetype archetype, double side) {
  switch (archetype) {
    case Archetype::kDisk: return {0.09 * side, 0.09 * side};
    case Archetype::kBar: return {0.05 * side, 0.30 * side};
    case Archetype::kRing: return {0.24 * side, 0.24 * side};
  }
  return {0.0, 0.0};
}

bool inside(Archetype archetype, double dx, double dy, double scale, double side) {
  const double r2 = dx * dx + dy * dy;
  switch (archetype) {
    case Archetype::kDisk: {
      const double r = 0.09 * side * scale;
      return r2 <= r * r;
    }
    case Archetype::kBar:
      return std::abs(dx) <= 0.05 * side * scale && std::abs(dy) <= 0.30 * side * scale;
    case Archetype::kRing: {
      const double outer = 0.24 * side * scale;
      const double inner = 0.14 * side * scale;
      return r2 <= outer * outer && r2 > inner * inner;
    }
  }
  return false;
}

bool in_range(double lo, double hi) { return lo >= 0.0 && hi <= 1.0 && lo <= hi; }

double speckle(double level, double amplitude, SplitMix64& rng) {
  const double v = level * (1.0 + amplitude * (rng.exponential() - 1.0));
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

void SyntheticConfig::validate() const {
  if (classes.empty()) fail(ErrorCode::kInvalidConfig, "synthetic config needs at least one class");
  if (width < 8 || height < 8) fail(ErrorCode::kInvalidConfig, "synthetic images must be at least 8x8");
  if (!in_range(target_lo, target_hi) || !in_range(shadow_lo, shadow_hi)) {
    fail(ErrorCode::kInvalidConfig, "intensity ranges must lie within [0,1]");
  }
  if (!(background_mean >= 0.0 && background_mean <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "background mean must lie in [0,1]");
  }
  if (!(noise_amplitude >= 0.0 && noise_amplitude <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "noise amplitude must lie in [0,1]");
  }
  if (!(shadow_length > 0.0 && shadow_length < 1.0)) {
    fail(ErrorCode::kInvalidConfig, "shadow length must lie in (0,1)");
  }
  if (!(size_jitter >= 0.0 && size_jitter < 0.5)) {
    fail(ErrorCode::kInvalidConfig, "size jitter must lie in [0,0.5)");
  }
  if (per_class < 1) fail(ErrorCode::kInvalidConfig, "per-class count must be >= 1");
  const double side = static_cast<double>(std::min(width, height));
  const double shadow_px = std::ceil(shadow_length * static_cast<double>(width));
  for (Archetype a : classes) {
    const ShapeExtent e = nominal_extent(a, side);
    const double scale = 1.0 + size_jitter;
    if (2.0 * e.half_w * scale + shadow_px + 2.0 >= static_cast<double>(width) ||
        2.0 * e.half_h * scale + 2.0 >= static_cast<double>(height)) {
      fail(ErrorCode::kInvalidConfig, std::string("archetype '") + std::string(to_string(a)) +
                                          "' with its shadow does not fit the image");
    }
  }
}

std::vector<SyntheticImage> synth_sonar(const SyntheticConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t total = config.classes.size() * config.per_class;
  const double side = static_cast<double>(std::min(config.width, config.height));
  const auto shadow_px = static_cast<std::size_t>(std::ceil(config.shadow_length * static_cast<double>(config.width)));
  std::vector<SyntheticImage> images(total);
  std::vector<std::string> errors(total);

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(total); ++t) {
    const auto idx = static_cast<std::size_t>(t);
    const std::size_t label = idx / config.per_class;
    const Archetype archetype = config.classes[label];
    SplitMix64 rng(derive_seed(seed, idx));
    SyntheticImage& out = images[idx];
    out.label = label;
    const std::size_t w = config.width;
    const std::size_t h = config.height;

    bool placed = false;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      const double scale = 1.0 + config.size_jitter * rng.uniform(-1.0, 1.0);
      const ShapeExtent e = nominal_extent(archetype, side);
      const double hw = e.half_w * scale;
      const double hh = e.half_h * scale;
      const double cx_lo = hw + 1.0;
      const double cx_hi = static_cast<double>(w) - 2.0 - hw - static_cast<double>(shadow_px);
      const double cy_lo = hh + 1.0;
      const double cy_hi = static_cast<double>(h) - 2.0 - hh;
      if (cx_hi < cx_lo || cy_hi < cy_lo) continue;
      const double cx = rng.uniform(cx_lo, cx_hi);
      const double cy = rng.uniform(cy_lo, cy_hi);

      out.target_mask.assign(w * h, 0);
      out.shadow_mask.assign(w * h, 0);
      std::size_t target_pixels = 0;
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          if (inside(archetype, static_cast<double>(x) + 0.5 - cx, static_cast<double>(y) + 0.5 - cy, scale, side)) {
            out.target_mask[y * w + x] = 1;
            ++target_pixels;
          }
        }
      }
      // Shadow: non-target pixels with a target pixel within shadow_px to the left.
      std::size_t shadow_pixels = 0;
      for (std::size_t y = 0; y < h; ++y) {
        std::size_t since_target = shadow_px + 1;
        for (std::size_t x = 0; x < w; ++x) {
          if (out.target_mask[y * w + x]) {
            since_target = 0;
            continue;
          }
          ++since_target;
          if (since_target <= shadow_px) {
            out.shadow_mask[y * w + x] = 1;
            ++shadow_pixels;
          }
        }
      }
      placed = target_pixels > 0 && shadow_pixels > 0;
    }
    if (!placed) {
      errors[idx] = "could not place archetype '" + std::string(to_string(archetype)) + "' in 100 attempts";
      continue;
    }

    const double target_level = rng.uniform(config.target_lo, config.target_hi);
    const double shadow_level = rng.uniform(config.shadow_lo, config.shadow_hi);
    out.image = SonarImage(w, h);
    for (std::size_t p = 0; p < w * h; ++p) {
      const double level = out.target_mask[p] ? target_level
                           : out.shadow_mask[p] ? shadow_level
                                                : config.background_mean;
      out.image.intensities[p] = speckle(level, config.noise_amplitude, rng);
    }
  }
  for (const std::string& e : errors) {
    if (!e.empty()) fail(ErrorCode::kInvalidConfig, e);
  }
  return images;
}

BuiltGraph build_graph(const SonarImage& image, const GraphSettings& settings) {
  BuiltGraph built;
  built.nodes = extract_nodes(image, settings.nodes);
  built.graph = sparsify(built.nodes, settings.gamma, settings.k);
  return built;
}

std::string serialize_graph(const BuiltGraph& built) {
  const NodeSet& nodes = built.nodes;
  const SparseGraph& g = built.graph;
  std::ostringstream out;
  out << "sigat-graph 1\n";
  out << "n " << g.n << '\n';
  out << "k " << g.k << '\n';
  out << "gamma " << format_real(g.gamma) << '\n';
  out << "source " << nodes.source_width << ' ' << nodes.source_height << '\n';
  out << "feature_dim " << nodes.feature_dim() << '\n';
  for (const Node& node : nodes.nodes) {
    out << "node " << node.id << ' ' << format_real(node.centroid.x) << ' ' << format_real(node.centroid.y)
        << ' ' << format_real(node.mean_intensity);
    for (double f : node.features) out << ' ' << format_real(f);
    out << '\n';
  }
  const CsrMatrix& w = g.weights_prime;
  out << "edges " << w.nnz() << '\n';
  for (std::size_t i = 0; i < w.n; ++i) {
    for (std::size_t e = w.offsets[i]; e < w.offsets[i + 1]; ++e) {
      out << "edge " << i << ' ' << w.columns[e] << ' ' << format_real(w.values[e]) << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

BuiltGraph parse_graph(std::string_view text, const std::string& source) {
  detail::LineReader in(text, source);
  const auto magic = in.expect("sigat-graph", 1);
  if (magic[1] != "1") in.error("unsupported graph cache version '" + magic[1] + "'", ErrorCode::kUnsupportedVersion);

  BuiltGraph built;
  SparseGraph& g = built.graph;
  NodeSet& nodes = built.nodes;
  g.n = in.count(in.expect("n", 1)[1], "n");
  g.k = in.count(in.expect("k", 1)[1], "k");
  g.gamma = in.real(in.expect("gamma", 1)[1], "gamma");
  const auto src = in.expect("source", 2);
  nodes.source_width = in.count(src[1], "width");
  nodes.source_height = in.count(src[2], "height");
  const std::size_t f = in.count(in.expect("feature_dim", 1)[1], "feature_dim");
  for (std::size_t i = 0; i < g.n; ++i) {
    const auto fields = in.expect("node", 4 + f);
    if (fields.size() != 5 + f) in.error("node line has " + std::to_string(fields.size() - 1) + " fields");
    Node node;
    node.id = in.count(fields[1], "id");
    if (node.id != i) in.error("node ids must be consecutive from 0; expected " + std::to_string(i));
    node.centroid = {in.real(fields[2], "cx"), in.real(fields[3], "cy")};
    node.mean_intensity = in.real(fields[4], "mean_intensity");
    for (std::size_t c = 0; c < f; ++c) node.features.push_back(in.real(fields[5 + c], "feature"));
    nodes.nodes.push_back(std::move(node));
  }
  const std::size_t edge_count = in.count(in.expect("edges", 1)[1], "edges");
  g.neighbor_lists.assign(g.n, {});
  CsrMatrix& w = g.weights_prime;
  w.n = g.n;
  w.offsets.assign(g.n + 1, 0);
  std::size_t last_row = 0;
  for (std::size_t e = 0; e < edge_count; ++e) {
    const auto fields = in.expect("edge", 3);
    const std::size_t i = in.count(fields[1], "i");
    const std::size_t j = in.count(fields[2], "j");
    if (i >= g.n || j >= g.n) in.error("edge endpoint out of range");
    if (i < last_row) in.error("edges must be grouped by ascending source node");
    last_row = i;
    g.neighbor_lists[i].push_back(j);
    w.columns.push_back(j);
    w.values.push_back(in.real(fields[3], "w_prime"));
    ++w.offsets[i + 1];
  }
  in.expect("end", 0);
  for (std::size_t i = 0; i < g.n; ++i) w.offsets[i + 1] += w.offsets[i];
  for (std::size_t i = 0; i < g.n; ++i) {
    if (g.neighbor_lists[i].empty()) {
      fail(ErrorCode::kParse, source + ": node " + std::to_string(i) + " has an empty neighborhood");
    }
  }
  g.binary_mask = binary_mask(g.neighbor_lists);
  try {
    nodes.validate();
    g.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kParse, source + ": " + e.what());
  }
  return built;
}

void cache_graph(const BuiltGraph& graph, const std::filesystem::path& path) {
  write_file(path, serialize_graph(graph));
}

BuiltGraph load_graph(const std::filesystem::path& path) {
  return parse_graph(read_file(path), path.string());
}

}  // namespace sigat
