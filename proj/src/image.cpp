#include "sigat/image.hpp"

#include <png.h>

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "sigat/error.hpp"

namespace sigat {

void SonarImage::validate() const {
  if (width < 1 || height < 1) {
    fail(ErrorCode::kInvalidConfig, "image dimensions must be at least 1x1");
  }
  if (intensities.size() != width * height) {
    fail(ErrorCode::kInvalidConfig, "image intensity count does not match width*height");
  }
  for (std::size_t i = 0; i < intensities.size(); ++i) {
    const double v = intensities[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      fail(ErrorCode::kInvalidConfig,
           "image intensity out of [0,1] at index " + std::to_string(i));
    }
  }
}

namespace {

// Reads the next whitespace-delimited PGM header token, skipping comments.
std::string next_token(std::istream& in) {
  std::string token;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(c);
  }
  return token;
}

std::size_t parse_header_int(const std::string& token, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(token, &pos);
    if (pos != token.size() || v < 0) throw std::invalid_argument(token);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    fail(ErrorCode::kParse, path.string() + ": bad PGM header field '" + token + "'");
  }
}

}  // namespace

SonarImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  if (next_token(in) != "P5") {
    fail(ErrorCode::kParse, path.string() + ": not a binary PGM (P5)");
  }
  const std::size_t width = parse_header_int(next_token(in), path);
  const std::size_t height = parse_header_int(next_token(in), path);
  const std::size_t maxval = parse_header_int(next_token(in), path);
  if (maxval != 255) {
    fail(ErrorCode::kParse, path.string() + ": only maxval 255 is supported");
  }
  SonarImage image(width, height);
  std::vector<unsigned char> bytes(width * height);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    fail(ErrorCode::kParse, path.string() + ": truncated pixel data");
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) image.intensities[i] = bytes[i] / 255.0;
  image.validate();
  return image;
}

void write_pgm(const SonarImage& image, const std::filesystem::path& path) {
  image.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> bytes(image.intensities.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<unsigned char>(std::lround(image.intensities[i] * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing " + path.string());
}

SonarImage read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorCode::kParse, path.string() + ": " + png.message);
  }
  const bool gray8 = (png.format & PNG_FORMAT_FLAG_COLOR) == 0 &&
                     (png.format & PNG_FORMAT_FLAG_LINEAR) == 0 &&
                     (png.format & PNG_FORMAT_FLAG_ALPHA) == 0;
  if (!gray8) {
    png_image_free(&png);
    fail(ErrorCode::kParse, path.string() + ": only 8-bit grayscale PNG is supported");
  }
  png.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> bytes(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, bytes.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    fail(ErrorCode::kParse, path.string() + ": " + message);
  }
  SonarImage image(png.width, png.height);
  for (std::size_t i = 0; i < bytes.size(); ++i) image.intensities[i] = bytes[i] / 255.0;
  image.validate();
  return image;
}

SonarImage read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::array<unsigned char, 8> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  static constexpr std::array<unsigned char, 8> kPngMagic = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (in.gcount() == 8 && magic == kPngMagic) return read_png(path);
  if (in.gcount() >= 2 && magic[0] == 'P' && magic[1] == '5') return read_pgm(path);
  fail(ErrorCode::kParse, path.string() + ": unrecognized image format (expected P5 PGM or PNG)");
}

}  // namespace sigat
