#pragma once

// Dataset manifests, stratified splits, the synthetic sonar generator and the
// per-image graph cache.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sigat/graph_builder.hpp"
#include "sigat/image.hpp"
#include "sigat/knn_sparsifier.hpp"

namespace sigat {

enum class Split { kTrain, kVal, kTest };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

struct ManifestEntry {
  std::string path;  // relative paths resolve against the manifest directory
  std::string label;
  Split split = Split::kTrain;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  // order of first appearance

  std::size_t label_index(std::string_view label) const;
  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

// CSV with header path,label,split.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// Stratified split. Overall train and val counts are floor(ratio * total);
// each class receives floor(ratio * class size), and the few entries left
// over by the per-class floors go to the classes with the largest fractional
// remainders (ties to the earlier class). Test takes the rest. Entries are
// shuffled per class with `seed` before assignment.
std::vector<Split> split_dataset(const DatasetManifest& manifest, const SplitRatios& ratios,
                                 std::uint64_t seed);
SplitCounts count_splits(const std::vector<Split>& splits);

enum class Archetype { kDisk, kBar, kRing };

std::string_view to_string(Archetype archetype);
Archetype parse_archetype(std::string_view text);

struct SyntheticConfig {
  std::vector<Archetype> classes = {Archetype::kDisk, Archetype::kBar, Archetype::kRing};
  std::size_t width = 200;
  std::size_t height = 200;
  double target_lo = 0.8;
  double target_hi = 1.0;
  double shadow_lo = 0.0;
  double shadow_hi = 0.1;
  // Shadow length as a fraction of the image width, cast along +x (away from
  // a sonar looking from the left edge).
  double shadow_length = 0.15;
  double background_mean = 0.3;
  // 0 gives flat plateaus; 1 gives fully developed exponential speckle.
  double noise_amplitude = 1.0;
  // Relative size jitter of the archetype.
  double size_jitter = 0.05;
  std::size_t per_class = 30;

  void validate() const;
};

struct SyntheticImage {
  SonarImage image;
  std::size_t label = 0;
  std::vector<std::uint8_t> target_mask;
  std::vector<std::uint8_t> shadow_mask;
};

// Images are ordered class by class. Image t draws from its own stream
// derive_seed(seed, t), so the output does not depend on evaluation order.
std::vector<SyntheticImage> synth_sonar(const SyntheticConfig& config, std::uint64_t seed);

struct GraphSettings {
  double gamma = 0.5;
  std::size_t k = kDefaultK;
  NodeExtractionConfig nodes;
};

struct BuiltGraph {
  NodeSet nodes;
  SparseGraph graph;
  bool operator==(const BuiltGraph&) const = default;
};

BuiltGraph build_graph(const SonarImage& image, const GraphSettings& settings);

// Text graph cache, version 1:
//
//   sigat-graph 1
//   n <n>
//   k <k>
//   gamma <real>
//   source <width> <height>
//   feature_dim <F>
//   node <id> <cx> <cy> <mean_intensity> <f_1> ... <f_F>      (n lines)
//   edges <count>
//   edge <i> <j> <w_prime>                                     (N_i order)
//   end
//
// Reals carry 17 significant digits, so a round trip is exact.
std::string serialize_graph(const BuiltGraph& graph);
BuiltGraph parse_graph(std::string_view text, const std::string& source = "<memory>");
void cache_graph(const BuiltGraph& graph, const std::filesystem::path& path);
BuiltGraph load_graph(const std::filesystem::path& path);

}  // namespace sigat
