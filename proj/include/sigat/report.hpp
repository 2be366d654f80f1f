#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "sigat/train.hpp"

namespace sigat {

// Parses the metrics CSV written by metrics_csv().
std::vector<EpochRecord> parse_metrics_csv(std::string_view text, const std::string& source = "<memory>");

// Tick positions at round numbers (1, 2 or 5 times a power of ten) covering
// [lo, hi] with roughly `target` intervals.
std::vector<double> nice_ticks(double lo, double hi, std::size_t target = 5);

// Two stacked line charts: train/val loss and validation accuracy. Every
// data point is emitted as <circle class="point SERIES" .../>.
std::string render_svg(const std::vector<EpochRecord>& records);

}  // namespace sigat
