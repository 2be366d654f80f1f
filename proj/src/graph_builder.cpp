#include "sigat/graph_builder.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sigat/error.hpp"
#include "sigat/rng.hpp"

namespace sigat {

void NodeSet::validate() const {
  const std::size_t f = feature_dim();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& node = nodes[i];
    if (node.id != i) fail(ErrorCode::kContract, "node ids must be 0..n-1 without gaps");
    if (!(node.centroid.x >= 0.0 && node.centroid.x <= 1.0 && node.centroid.y >= 0.0 &&
          node.centroid.y <= 1.0)) {
      fail(ErrorCode::kContract, "node " + std::to_string(i) + " centroid outside [0,1]^2");
    }
    if (f < 1 || node.features.size() != f) {
      fail(ErrorCode::kShape, "node " + std::to_string(i) + " has inconsistent feature length");
    }
  }
}

namespace {

struct PatchStats {
  double sum = 0.0;
  double sum_sq = 0.0;
  double sum_x = 0.0;
  double sum_y = 0.0;
  std::size_t count = 0;

  void add(double v, double x, double y) {
    sum += v;
    sum_sq += v * v;
    sum_x += x;
    sum_y += y;
    ++count;
  }
};

Node make_node(std::size_t id, Point2 centroid, double mean, double std_dev) {
  Node node;
  node.id = id;
  node.centroid = centroid;
  node.mean_intensity = mean;
  node.features = {mean, std_dev, centroid.x, centroid.y};
  return node;
}

NodeSet grid_nodes(const SonarImage& image, const NodeExtractionConfig& config) {
  const std::size_t gw = config.grid_w;
  const std::size_t gh = config.grid_h;
  if (gw < 1 || gh < 1 || gw > image.width || gh > image.height) {
    fail(ErrorCode::kInvalidConfig,
         "grid " + std::to_string(gw) + "x" + std::to_string(gh) + " does not fit image " +
             std::to_string(image.width) + "x" + std::to_string(image.height));
  }
  NodeSet set;
  set.source_width = image.width;
  set.source_height = image.height;
  set.nodes.reserve(gw * gh);
  for (std::size_t r = 0; r < gh; ++r) {
    const std::size_t y0 = r * image.height / gh;
    const std::size_t y1 = (r + 1) * image.height / gh;
    for (std::size_t c = 0; c < gw; ++c) {
      const std::size_t x0 = c * image.width / gw;
      const std::size_t x1 = (c + 1) * image.width / gw;
      const double count = static_cast<double>((x1 - x0) * (y1 - y0));
      double sum = 0.0;
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) sum += image.at(x, y);
      }
      const double mean = sum / count;
      double var = 0.0;
      for (std::size_t y = y0; y < y1; ++y) {
        for (std::size_t x = x0; x < x1; ++x) {
          const double d = image.at(x, y) - mean;
          var += d * d;
        }
      }
      // Pixel-center convention: the patch center is the mean of (col + 0.5) / width.
      const Point2 centroid{0.5 * static_cast<double>(x0 + x1) / static_cast<double>(image.width),
                            0.5 * static_cast<double>(y0 + y1) / static_cast<double>(image.height)};
      set.nodes.push_back(make_node(set.nodes.size(), centroid, mean, std::sqrt(var / count)));
    }
  }
  return set;
}

NodeSet superpixel_nodes(const SonarImage& image, const NodeExtractionConfig& config) {
  const std::size_t pixels = image.width * image.height;
  const std::size_t k = config.superpixels;
  if (k < 1 || k > pixels) {
    fail(ErrorCode::kInvalidConfig, "superpixel count must be in [1, pixel count]");
  }
  struct Sample {
    double v, x, y;
  };
  std::vector<Sample> samples(pixels);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      samples[y * image.width + x] = {image.at(x, y),
                                      (static_cast<double>(x) + 0.5) / static_cast<double>(image.width),
                                      (static_cast<double>(y) + 0.5) / static_cast<double>(image.height)};
    }
  }
  // Seeded choice of k distinct initial pixels (partial Fisher-Yates).
  std::vector<std::size_t> order(pixels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(config.seed);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pixels - i));
    std::swap(order[i], order[j]);
  }
  std::vector<Sample> centers(k);
  for (std::size_t c = 0; c < k; ++c) centers[c] = samples[order[c]];

  std::vector<std::size_t> assignment(pixels, 0);
  auto assign = [&] {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(pixels); ++p) {
      const Sample& s = samples[static_cast<std::size_t>(p)];
      double best = std::numeric_limits<double>::infinity();
      std::size_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double dv = s.v - centers[c].v;
        const double dx = s.x - centers[c].x;
        const double dy = s.y - centers[c].y;
        const double d = dv * dv + dx * dx + dy * dy;
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      assignment[static_cast<std::size_t>(p)] = best_c;
    }
  };
  for (std::size_t it = 0; it < config.iterations; ++it) {
    assign();
    std::vector<PatchStats> stats(k);
    for (std::size_t p = 0; p < pixels; ++p) {
      stats[assignment[p]].add(samples[p].v, samples[p].x, samples[p].y);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (stats[c].count == 0) continue;  // empty cluster keeps its center
      const double n = static_cast<double>(stats[c].count);
      centers[c] = {stats[c].sum / n, stats[c].sum_x / n, stats[c].sum_y / n};
    }
  }
  assign();

  std::vector<PatchStats> stats(k);
  for (std::size_t p = 0; p < pixels; ++p) {
    stats[assignment[p]].add(samples[p].v, samples[p].x, samples[p].y);
  }
  NodeSet set;
  set.source_width = image.width;
  set.source_height = image.height;
  for (std::size_t c = 0; c < k; ++c) {
    if (stats[c].count == 0) continue;
    const double n = static_cast<double>(stats[c].count);
    const double mean = stats[c].sum / n;
    const double var = std::max(0.0, stats[c].sum_sq / n - mean * mean);
    set.nodes.push_back(make_node(set.nodes.size(), {stats[c].sum_x / n, stats[c].sum_y / n}, mean,
                                  std::sqrt(var)));
  }
  return set;
}

double pair_mean(const std::vector<Node>& nodes, std::size_t i, bool spatial) {
  double sum = 0.0;
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    if (j == i) continue;
    if (spatial) {
      sum += std::hypot(nodes[i].centroid.x - nodes[j].centroid.x,
                        nodes[i].centroid.y - nodes[j].centroid.y);
    } else {
      sum += std::abs(nodes[i].mean_intensity - nodes[j].mean_intensity);
    }
  }
  const double mean = sum / static_cast<double>(nodes.size() - 1);
  return mean > 0.0 ? mean : kScaleFloor;
}

void check_gamma(double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    fail(ErrorCode::kInvalidConfig, "gamma must lie in [0,1], got " + std::to_string(gamma));
  }
}

void fill_row(const NodeSet& nodes, CorrelationMatrix& w, std::size_t i) {
  const Node& ni = nodes.nodes[i];
  auto row = w.weights.row(i);
  for (std::size_t j = 0; j < w.n; ++j) {
    row[j] = edge_weight(ni, nodes.nodes[j], w.delta_x[i], w.delta_f[i], w.gamma);
  }
}

CorrelationMatrix prepare(const NodeSet& nodes, double gamma) {
  check_gamma(gamma);
  ScaleParams scales = row_scale_params(nodes);
  CorrelationMatrix w;
  w.n = nodes.size();
  w.weights = DenseMatrix(w.n, w.n);
  w.delta_x = std::move(scales.delta_x);
  w.delta_f = std::move(scales.delta_f);
  w.gamma = gamma;
  return w;
}

}  // namespace

NodeSet extract_nodes(const SonarImage& image, const NodeExtractionConfig& config) {
  image.validate();
  NodeSet set = config.scheme == NodeScheme::kGrid ? grid_nodes(image, config)
                                                   : superpixel_nodes(image, config);
  set.validate();
  return set;
}

Point2 normalize_coords(double x, double y, double x_max, double y_max) {
  if (!(x_max > 0.0) || !(y_max > 0.0)) {
    fail(ErrorCode::kDegenerateAxis, "normalize_coords: axis extent must be positive");
  }
  if (x < 0.0 || x > x_max || y < 0.0 || y > y_max) {
    fail(ErrorCode::kInvalidConfig, "normalize_coords: coordinate outside [0, max]");
  }
  return {x / x_max, y / y_max};
}

ScaleParams row_scale_params(const NodeSet& nodes) {
  const std::size_t n = nodes.size();
  if (n < 2) {
    fail(ErrorCode::kInsufficientNodes,
         "at least 2 nodes are required, got " + std::to_string(n));
  }
  ScaleParams out{std::vector<double>(n), std::vector<double>(n)};
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto row = static_cast<std::size_t>(i);
    out.delta_x[row] = pair_mean(nodes.nodes, row, true);
    out.delta_f[row] = pair_mean(nodes.nodes, row, false);
  }
  return out;
}

double coord_affinity(Point2 p_i, Point2 p_j, double delta_x_i) {
  const double dx = p_i.x - p_j.x;
  const double dy = p_i.y - p_j.y;
  return std::exp(-(dx * dx + dy * dy) / (delta_x_i * delta_x_i));
}

double pixel_affinity(double f_i, double f_j, double delta_f_i) {
  const double t = std::abs(f_i - f_j) / (delta_f_i * delta_f_i);
  return 1.0 / (1.0 + std::exp(-(t * t)));
}

double edge_weight(const Node& i, const Node& j, double delta_x_i, double delta_f_i,
                   double gamma) {
  return gamma * coord_affinity(i.centroid, j.centroid, delta_x_i) +
         (1.0 - gamma) * pixel_affinity(i.mean_intensity, j.mean_intensity, delta_f_i);
}

CorrelationMatrix correlation_matrix(const NodeSet& nodes, double gamma) {
  CorrelationMatrix w = prepare(nodes, gamma);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(w.n); ++i) {
    fill_row(nodes, w, static_cast<std::size_t>(i));
  }
  return w;
}

CorrelationMatrix correlation_matrix_serial(const NodeSet& nodes, double gamma) {
  CorrelationMatrix w = prepare(nodes, gamma);
  for (std::size_t i = 0; i < w.n; ++i) fill_row(nodes, w, i);
  return w;
}

}  // namespace sigat
