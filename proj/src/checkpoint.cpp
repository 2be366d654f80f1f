#include "sigat/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "sigat/error.hpp"
#include "sigat/format.hpp"
#include "text_reader.hpp"

namespace sigat {

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  const ModelConfig& config = checkpoint.model.config;
  const GraphSettings& g = checkpoint.graph;
  if (checkpoint.class_names.size() != config.num_classes) {
    fail(ErrorCode::kContract, "checkpoint class names do not match the model class count");
  }
  std::ostringstream out;
  out << "sigat-checkpoint 1\n";
  out << "seed " << config.seed << '\n';
  out << "input_dim " << config.input_dim << '\n';
  out << "classes " << config.num_classes;
  for (const std::string& name : checkpoint.class_names) {
    if (name.empty() || name.find_first_of(" \n\r") != std::string::npos) {
      fail(ErrorCode::kInvalidConfig, "class names may not be empty or contain whitespace");
    }
    out << ' ' << name;
  }
  out << '\n';
  out << "graph " << format_real(g.gamma) << ' ' << g.k << ' '
      << (g.nodes.scheme == NodeScheme::kGrid ? "grid" : "superpixel") << ' ' << g.nodes.grid_w << ' '
      << g.nodes.grid_h << ' ' << g.nodes.superpixels << ' ' << g.nodes.iterations << ' ' << g.nodes.seed
      << '\n';
  out << "layers " << config.layers.size() << '\n';
  for (const LayerConfig& l : config.layers) {
    out << "layer " << l.in_dim << ' ' << l.out_dim << ' ' << l.heads << ' ' << to_string(l.combine) << ' '
        << format_real(l.leaky_slope) << ' ' << to_string(l.activation) << '\n';
  }
  const std::vector<ad::Tensor> params = checkpoint.model.parameters();
  out << "tensors " << params.size() << '\n';
  for (const ad::Tensor& t : params) {
    out << "tensor " << t.rows() << ' ' << t.cols();
    for (double v : t.values) out << ' ' << format_real(v);
    out << '\n';
  }
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text, const std::string& source) {
  detail::LineReader in(text, source);
  const auto magic = in.expect("sigat-checkpoint", 1);
  if (magic[1] != "1") {
    in.error("unsupported checkpoint version '" + magic[1] + "'", ErrorCode::kUnsupportedVersion);
  }
  Checkpoint cp;
  ModelConfig config;
  config.seed = in.count(in.expect("seed", 1)[1], "seed");
  config.input_dim = in.count(in.expect("input_dim", 1)[1], "input_dim");
  const auto classes = in.expect("classes", 1);
  config.num_classes = in.count(classes[1], "classes");
  if (classes.size() != config.num_classes + 2) in.error("class name count does not match");
  cp.class_names.assign(classes.begin() + 2, classes.end());

  const auto graph = in.expect("graph", 8);
  cp.graph.gamma = in.real(graph[1], "gamma");
  cp.graph.k = in.count(graph[2], "k");
  if (graph[3] == "grid") {
    cp.graph.nodes.scheme = NodeScheme::kGrid;
  } else if (graph[3] == "superpixel") {
    cp.graph.nodes.scheme = NodeScheme::kSuperpixel;
  } else {
    in.error("unknown node scheme '" + graph[3] + "'");
  }
  cp.graph.nodes.grid_w = in.count(graph[4], "grid_w");
  cp.graph.nodes.grid_h = in.count(graph[5], "grid_h");
  cp.graph.nodes.superpixels = in.count(graph[6], "superpixels");
  cp.graph.nodes.iterations = in.count(graph[7], "iterations");
  cp.graph.nodes.seed = in.count(graph[8], "node_seed");

  const std::size_t layer_count = in.count(in.expect("layers", 1)[1], "layers");
  for (std::size_t l = 0; l < layer_count; ++l) {
    const auto f = in.expect("layer", 6);
    LayerConfig layer;
    layer.in_dim = in.count(f[1], "in");
    layer.out_dim = in.count(f[2], "out");
    layer.heads = in.count(f[3], "heads");
    try {
      layer.combine = parse_head_combine(f[4]);
      layer.activation = parse_activation(f[6]);
    } catch (const Error& e) {
      in.error(e.what());
    }
    layer.leaky_slope = in.real(f[5], "leaky_slope");
    config.layers.push_back(layer);
  }
  try {
    config.validate();
  } catch (const Error& e) {
    in.error(e.what(), ErrorCode::kInvalidConfig);
  }

  cp.model = build_model(config);
  const std::size_t tensor_count = in.count(in.expect("tensors", 1)[1], "tensors");
  std::vector<ad::Tensor> params;
  for (std::size_t t = 0; t < tensor_count; ++t) {
    const auto f = in.expect("tensor", 2);
    const std::size_t rows = in.count(f[1], "rows");
    const std::size_t cols = in.count(f[2], "cols");
    if (f.size() != 3 + rows * cols) in.error("tensor value count does not match its shape");
    std::vector<double> values(rows * cols);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = in.real(f[3 + i], "value");
    params.push_back(ad::Tensor::matrix(rows, cols, std::move(values)));
  }
  in.expect("end", 0);
  // Shapes were serialized as rows x cols; restore the model's own extents.
  const std::vector<ad::Tensor> layout = cp.model.parameters();
  if (params.size() != layout.size()) in.error("checkpoint holds the wrong number of tensors", ErrorCode::kShape);
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p].rows() != layout[p].rows() || params[p].cols() != layout[p].cols()) {
      in.error("tensor " + std::to_string(p) + " has shape " + ad::shape_string(params[p].shape) +
                   ", expected " + ad::shape_string(layout[p].shape),
               ErrorCode::kShape);
    }
    params[p].shape = layout[p].shape;
  }
  cp.model.set_parameters(std::move(params));
  return cp;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << serialize_checkpoint(checkpoint);
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str(), path.string());
}

}  // namespace sigat
