#pragma once

// Small deterministic fixtures shared by the gradcheck subcommand and tests.

#include "sigat/data_pipeline.hpp"
#include "sigat/model.hpp"

namespace sigat {

// 6-node graph: a 6x4 gradient-and-checker image cut into a 3x2 grid, k = 2.
BuiltGraph gradcheck_graph();

// With this seed every parameter coordinate of the fixture model receives a
// gradient of at least 1e-6 for either label. Under most seeds some attention
// heads never cross the LeakyReLU kink, which leaves the a_1 half of their
// attention vector with a gradient of exactly zero in exact arithmetic.
inline constexpr std::uint64_t kGradcheckSeed = 715;

// Same topology as the default model (three concat layers, one averaged
// layer, classifier) at reduced width so every coordinate can be checked.
ModelConfig gradcheck_model_config(std::uint64_t seed = kGradcheckSeed);

}  // namespace sigat
