#pragma once

// Model checkpoint: architecture, graph-construction settings, class names and
// every parameter tensor, as text with 17 significant digits so that loading
// reproduces forward outputs bit-exactly.
//
//   sigat-checkpoint 1
//   seed <u64>
//   input_dim <F>
//   classes <C> <name_1> ... <name_C>
//   graph <gamma> <k> <grid|superpixel> <grid_w> <grid_h> <superpixels> <iterations> <node_seed>
//   layers <L>
//   layer <in> <out> <heads> <concat|average> <leaky_slope> <elu|relu|identity>   (L lines)
//   tensors <T>
//   tensor <rows> <cols> <v_1> ... <v_rows*cols>                                   (T lines)
//   end

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sigat/data_pipeline.hpp"
#include "sigat/model.hpp"

namespace sigat {

struct Checkpoint {
  SIGATModel model;
  GraphSettings graph;
  std::vector<std::string> class_names;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text, const std::string& source = "<memory>");
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sigat
