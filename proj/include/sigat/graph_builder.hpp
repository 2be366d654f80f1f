#pragma once

// Image-to-graph conversion and the dense correlation measurement matrix.
//
// A node carries its normalized centroid, its mean intensity and a feature
// vector [mean, std-dev, x, y]. Edge weight between nodes i and j mixes a
// spatial kernel and a pixel kernel:
//
//   W[i,j] = gamma * exp(-|p_i - p_j|^2 / dx_i^2)
//          + (1 - gamma) / (1 + exp(-(|f_i - f_j| / df_i^2)^2))
//
// where dx_i and df_i are the mean spatial and intensity distances from node i
// to every other node. The scales are per row, so W is generally asymmetric.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "sigat/dense.hpp"
#include "sigat/image.hpp"

namespace sigat {

inline constexpr double kScaleFloor = 1e-9;
inline constexpr std::size_t kNodeFeatureDim = 4;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

struct Node {
  std::size_t id = 0;
  Point2 centroid;
  double mean_intensity = 0.0;
  std::vector<double> features;
  bool operator==(const Node&) const = default;
};

struct NodeSet {
  std::vector<Node> nodes;
  std::size_t source_width = 0;
  std::size_t source_height = 0;

  std::size_t size() const { return nodes.size(); }
  std::size_t feature_dim() const { return nodes.empty() ? 0 : nodes.front().features.size(); }
  void validate() const;
  bool operator==(const NodeSet&) const = default;
};

enum class NodeScheme { kGrid, kSuperpixel };

struct NodeExtractionConfig {
  NodeScheme scheme = NodeScheme::kGrid;
  std::size_t grid_w = 10;
  std::size_t grid_h = 10;
  // Superpixel mode: k-means on (intensity, x, y).
  std::size_t superpixels = 100;
  std::size_t iterations = 10;
  std::uint64_t seed = 0;
};

NodeSet extract_nodes(const SonarImage& image, const NodeExtractionConfig& config);

// Literal (x / x_max, y / y_max). Zero extents raise kDegenerateAxis.
Point2 normalize_coords(double x, double y, double x_max, double y_max);

struct ScaleParams {
  std::vector<double> delta_x;
  std::vector<double> delta_f;
};

ScaleParams row_scale_params(const NodeSet& nodes);

double coord_affinity(Point2 p_i, Point2 p_j, double delta_x_i);
double pixel_affinity(double f_i, double f_j, double delta_f_i);

struct CorrelationMatrix {
  std::size_t n = 0;
  DenseMatrix weights;
  std::vector<double> delta_x;
  std::vector<double> delta_f;
  double gamma = 0.5;
};

// Row-parallel (OpenMP) evaluation.
CorrelationMatrix correlation_matrix(const NodeSet& nodes, double gamma);
// Single-threaded reference; bit-identical to correlation_matrix.
CorrelationMatrix correlation_matrix_serial(const NodeSet& nodes, double gamma);

// Mixed affinity for one ordered pair given row i's scales.
double edge_weight(const Node& i, const Node& j, double delta_x_i, double delta_f_i,
                   double gamma);

}  // namespace sigat
