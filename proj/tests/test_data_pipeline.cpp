#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "sigat/data_pipeline.hpp"
#include "support.hpp"

using namespace sigat;
using support::code_of;

namespace {

DatasetManifest manifest_with(const std::vector<std::size_t>& per_class) {
  DatasetManifest m;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const std::string name = "class" + std::to_string(c);
    m.class_names.push_back(name);
    for (std::size_t i = 0; i < per_class[c]; ++i) {
      m.entries.push_back({name + "/" + std::to_string(i) + ".pgm", name, Split::kTrain});
    }
  }
  return m;
}

// Mean of the 5x5 window around each pixel, clipped at the borders.
std::vector<double> box5(const SonarImage& img) {
  std::vector<double> out(img.intensities.size());
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double s = 0.0;
      int n = 0;
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const long xx = static_cast<long>(x) + dx, yy = static_cast<long>(y) + dy;
          if (xx < 0 || yy < 0 || xx >= static_cast<long>(img.width) || yy >= static_cast<long>(img.height)) continue;
          s += img.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
          ++n;
        }
      }
      out[y * img.width + x] = s / n;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("split arithmetic") {
  SUBCASE("803 entries at 0.7:0.1:0.2") {
    for (const auto& classes : std::vector<std::vector<std::size_t>>{{803}, {300, 300, 203}, {85, 200, 218, 150, 150}}) {
      const auto m = manifest_with(classes);
      const SplitCounts c = count_splits(split_dataset(m, {}, 1));
      CHECK(c.train == 562);
      CHECK(c.val == 80);
      CHECK(c.test == 161);
    }
  }
  SUBCASE("10 entries of one class") {
    const SplitCounts c = count_splits(split_dataset(manifest_with({10}), {}, 3));
    CHECK(c.train == 7);
    CHECK(c.val == 1);
    CHECK(c.test == 2);
  }
  SUBCASE("per-class counts stay within one of the floor") {
    const std::vector<std::size_t> sizes = {85, 200, 218, 150, 151};
    const auto m = manifest_with(sizes);
    const auto s = split_dataset(m, {}, 5);
    std::size_t at = 0;
    for (std::size_t n : sizes) {
      std::size_t tr = 0, va = 0;
      for (std::size_t i = 0; i < n; ++i, ++at) {
        tr += s[at] == Split::kTrain;
        va += s[at] == Split::kVal;
      }
      const auto ft = static_cast<std::size_t>(std::floor(0.7 * static_cast<double>(n) + 1e-9));
      const auto fv = static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(n) + 1e-9));
      CHECK(tr >= ft);
      CHECK(tr <= ft + 1);
      CHECK(va >= fv);
      CHECK(va <= fv + 1);
    }
  }
  SUBCASE("seeded") {
    const auto m = manifest_with({30, 30, 30});
    CHECK(split_dataset(m, {}, 9) == split_dataset(m, {}, 9));
    CHECK(split_dataset(m, {}, 9) != split_dataset(m, {}, 10));
  }
  SUBCASE("errors") {
    CHECK(code_of([] { split_dataset(manifest_with({10, 2}), {}, 0); }) == ErrorCode::kInsufficientClass);
    CHECK(code_of([] { split_dataset(manifest_with({10}), {0.7, 0.2, 0.2}, 0); }) == ErrorCode::kInvalidConfig);
  }
}

TEST_CASE("manifest CSV") {
  support::TempDir dir("manifest");
  DatasetManifest m;
  m.class_names = {"ring", "disk"};
  m.entries = {{"a.pgm", "ring", Split::kTrain}, {"b.pgm", "disk", Split::kVal}, {"c.png", "ring", Split::kTest}};
  write_manifest(m, dir / "m.csv");
  CHECK(support::slurp(dir / "m.csv").rfind("path,label,split\n", 0) == 0);
  const DatasetManifest back = read_manifest(dir / "m.csv");
  CHECK(back == m);
  CHECK(back.label_index("disk") == 1);

  support::spit(dir / "bad_header.csv", "file,label,split\n");
  CHECK(code_of([&] { read_manifest(dir / "bad_header.csv"); }) == ErrorCode::kParse);
  support::spit(dir / "bad_split.csv", "path,label,split\na.pgm,ring,train\nb.pgm,ring,holdout\n");
  const std::string msg = support::message_of([&] { read_manifest(dir / "bad_split.csv"); });
  CHECK(msg.find(":3:") != std::string::npos);
  support::spit(dir / "short.csv", "path,label,split\na.pgm,ring\n");
  CHECK(code_of([&] { read_manifest(dir / "short.csv"); }) == ErrorCode::kParse);
}

TEST_CASE("synthetic generator") {
  SyntheticConfig sc;
  sc.per_class = 4;
  SUBCASE("labels are balanced and ordered by class") {
    const auto images = synth_sonar(sc, 1);
    REQUIRE(images.size() == 12);
    for (std::size_t i = 0; i < 12; ++i) CHECK(images[i].label == i / 4);
  }
  SUBCASE("bit-identical per seed") {
    const auto a = synth_sonar(sc, 2);
    const auto b = synth_sonar(sc, 2);
    const auto c = synth_sonar(sc, 3);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].image.intensities == b[i].image.intensities);
      CHECK(a[i].image.intensities != c[i].image.intensities);
    }
  }
  SUBCASE("noise-free images have three plateaus") {
    sc.noise_amplitude = 0.0;
    for (const auto& s : synth_sonar(sc, 4)) {
      const std::set<double> levels(s.image.intensities.begin(), s.image.intensities.end());
      CHECK(levels.size() == 3);
      CHECK(*levels.begin() <= 0.1);
      CHECK(*levels.rbegin() >= 0.8);
    }
  }
  SUBCASE("shadow is disjoint from the target and trails it along +x") {
    for (const auto& s : synth_sonar(sc, 5)) {
      std::size_t target = 0, shadow = 0;
      double tx = 0.0, sx = 0.0;
      for (std::size_t y = 0; y < s.image.height; ++y) {
        for (std::size_t x = 0; x < s.image.width; ++x) {
          const std::size_t p = y * s.image.width + x;
          CHECK_FALSE((s.target_mask[p] && s.shadow_mask[p]));
          if (s.target_mask[p]) ++target, tx += static_cast<double>(x);
          if (s.shadow_mask[p]) ++shadow, sx += static_cast<double>(x);
        }
      }
      CHECK(target > 0);
      CHECK(shadow > 0);
      CHECK(sx / static_cast<double>(shadow) > tx / static_cast<double>(target));
    }
  }
  SUBCASE("intensities stay in [0,1]") {
    for (const auto& s : synth_sonar(sc, 6)) {
      for (double v : s.image.intensities) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
    }
  }
  SUBCASE("shapes that cannot fit are a config error") {
    sc.width = 16;
    sc.height = 16;
    sc.shadow_length = 0.9;
    CHECK(code_of([&] { synth_sonar(sc, 0); }) == ErrorCode::kInvalidConfig);
  }
}

TEST_CASE("a fixed area classifier separates the synthetic classes") {
  SyntheticConfig sc;
  sc.per_class = 30;
  const auto images = synth_sonar(sc, 11);
  // Nominal areas in pixels at 200x200: disk pi*18^2, bar 20x120, ring
  // pi*(48^2-28^2). Decision thresholds sit at the geometric means.
  const double disk = M_PI * 18 * 18, bar = 20.0 * 120.0, ring = M_PI * (48.0 * 48 - 28.0 * 28);
  const double t1 = std::sqrt(disk * bar), t2 = std::sqrt(bar * ring);
  std::size_t correct = 0;
  for (const auto& s : images) {
    const auto smooth = box5(s.image);
    double area = 0.0;
    for (double v : smooth) area += v > 0.45 ? 1.0 : 0.0;
    const std::size_t predicted = area < t1 ? 0 : area < t2 ? 1 : 2;
    correct += predicted == s.label;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(images.size()) >= 0.95);
}

TEST_CASE("graph cache round trip") {
  SplitMix64 rng(21);
  support::TempDir dir("cache");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t w = 4 + rng.below(30), h = 4 + rng.below(30);
    SonarImage img(w, h);
    for (auto& v : img.intensities) v = static_cast<double>(rng.below(256)) / 255.0;
    GraphSettings gs;
    gs.gamma = rng.uniform();
    gs.nodes.grid_w = 2 + rng.below(std::min<std::size_t>(w, 6) - 1);
    gs.nodes.grid_h = 1 + rng.below(std::min<std::size_t>(h, 6));
    gs.k = 1 + rng.below(gs.nodes.grid_w * gs.nodes.grid_h - 1);
    const BuiltGraph g = build_graph(img, gs);
    const std::string text = serialize_graph(g);
    CHECK(parse_graph(text) == g);
    if (trial % 10 == 0) {
      cache_graph(g, dir / "g.txt");
      CHECK(load_graph(dir / "g.txt") == g);
      CHECK(support::slurp(dir / "g.txt") == text);
    }
  }
}

TEST_CASE("graph cache errors") {
  SplitMix64 rng(22);
  SonarImage img(12, 12);
  for (auto& v : img.intensities) v = rng.uniform();
  GraphSettings gs;
  gs.k = 3;
  gs.nodes.grid_w = 4;
  gs.nodes.grid_h = 3;
  const std::string text = serialize_graph(build_graph(img, gs));

  SUBCASE("version mismatch") {
    std::string bad = text;
    bad.replace(0, 13, "sigat-graph 9");
    CHECK(code_of([&] { parse_graph(bad); }) == ErrorCode::kUnsupportedVersion);
  }
  SUBCASE("an emptied neighborhood names its node") {
    // Drop every edge leaving node 5 and fix up the count.
    std::istringstream in(text);
    std::string line, out;
    std::size_t dropped = 0;
    while (std::getline(in, line)) {
      if (line.rfind("edge 5 ", 0) == 0) {
        ++dropped;
        continue;
      }
      out += line + "\n";
    }
    REQUIRE(dropped == 4);
    const auto at = out.find("edges ");
    const auto end = out.find('\n', at);
    out.replace(at, end - at, "edges " + std::to_string(12 * 4 - 4));
    const std::string msg = support::message_of([&] { parse_graph(out); });
    CHECK(msg.find("node 5") != std::string::npos);
    CHECK(code_of([&] { parse_graph(out); }) == ErrorCode::kParse);
  }
  SUBCASE("malformed field reports the line") {
    std::string bad = text;
    bad.replace(bad.find("gamma "), 9, "gamma abc");
    const std::string msg = support::message_of([&] { parse_graph(bad, "g.txt"); });
    CHECK(msg.find("g.txt:4") != std::string::npos);
  }
  SUBCASE("truncated file") {
    CHECK(code_of([&] { parse_graph(text.substr(0, text.size() - 4)); }) == ErrorCode::kParse);
  }
}

TEST_CASE("golden image gives the stored cache file") {
  const std::string data = SIGAT_TEST_DATA;
  GraphSettings gs;
  gs.k = 5;
  gs.nodes.grid_w = 6;
  gs.nodes.grid_h = 4;
  const BuiltGraph g = build_graph(read_image(data + "/golden.pgm"), gs);
  CHECK(serialize_graph(g) == support::slurp(data + "/golden_graph.txt"));
}
