#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace sigat {

// Row-major grayscale image with intensities in [0, 1].
struct SonarImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> intensities;

  SonarImage() = default;
  SonarImage(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), intensities(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return intensities[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return intensities[y * width + x]; }

  // Throws kInvalidConfig when dimensions or intensities are out of range.
  void validate() const;
};

// 8-bit I/O. Intensities map to [0, 1] by v / 255 on read and round(v * 255)
// on write.
SonarImage read_pgm(const std::filesystem::path& path);
void write_pgm(const SonarImage& image, const std::filesystem::path& path);
SonarImage read_png(const std::filesystem::path& path);

// Dispatches on the file signature (P5 or PNG).
SonarImage read_image(const std::filesystem::path& path);

}  // namespace sigat
