#include "sigat/fixtures.hpp"

namespace sigat {

BuiltGraph gradcheck_graph() {
  SonarImage image(6, 4);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      const double ramp = 0.1 + 0.12 * static_cast<double>(x) + 0.05 * static_cast<double>(y);
      image.at(x, y) = (x + y) % 2 == 0 ? ramp : 0.5 * ramp;
    }
  }
  GraphSettings settings;
  settings.gamma = 0.5;
  settings.k = 2;
  settings.nodes.grid_w = 3;
  settings.nodes.grid_h = 2;
  return build_graph(image, settings);
}

ModelConfig gradcheck_model_config(std::uint64_t seed) {
  ModelConfig config;
  config.input_dim = kNodeFeatureDim;
  config.num_classes = 2;
  config.seed = seed;
  config.layers = {
      {4, 3, 2, HeadCombine::kConcat, kLeakySlope, Activation::kElu},
      {6, 3, 2, HeadCombine::kConcat, kLeakySlope, Activation::kElu},
      {6, 3, 2, HeadCombine::kConcat, kLeakySlope, Activation::kElu},
      {6, 4, 2, HeadCombine::kAverage, kLeakySlope, Activation::kIdentity},
  };
  return config;
}

}  // namespace sigat
