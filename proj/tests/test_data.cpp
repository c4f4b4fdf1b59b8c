#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <unistd.h>

#include "speednet/dataset.hpp"
#include "speednet/image_io.hpp"
#include "speednet/synth.hpp"
#include "test_helpers.hpp"

using namespace speednet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("speednet_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ImageU8 solid_image(int size, std::uint8_t value, int channels) {
  ImageU8 img;
  img.width = size;
  img.height = size;
  img.channels = channels;
  img.pixels.assign(img.expected_size(), value);
  return img;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("synthetic masks match their ellipse equation pixel for pixel") {
  const auto samples = synth_dataset(6, 48, 11);
  for (const auto& s : samples) {
    REQUIRE(s.mask.width == 48);
    std::size_t fg = 0;
    for (int y = 0; y < 48; ++y) {
      for (int x = 0; x < 48; ++x) {
        // Independent re-evaluation of the membership inequality.
        const double ct = std::cos(s.ellipse.theta), st = std::sin(s.ellipse.theta);
        const double dx = x - s.ellipse.cx, dy = y - s.ellipse.cy;
        const double u = (dx * ct + dy * st) / s.ellipse.a;
        const double v = (-dx * st + dy * ct) / s.ellipse.b;
        const bool inside = u * u + v * v <= 1.0;
        const std::uint8_t px = s.mask.pixels[static_cast<std::size_t>(y) * 48 + static_cast<std::size_t>(x)];
        REQUIRE(px == (inside ? 255 : 0));
        fg += inside ? 1 : 0;
      }
    }
    CHECK(fg > 0);
    const double frac = static_cast<double>(fg) / (48.0 * 48.0);
    CHECK(frac >= 0.05);
    CHECK(frac <= 0.5);
  }
}

TEST_CASE("synthetic dataset is deterministic per seed") {
  const auto a = synth_dataset(4, 32, 99);
  const auto b = synth_dataset(4, 32, 99);
  const auto c = synth_dataset(4, 32, 100);
  REQUIRE(a.size() == b.size());
  bool all_equal = true, any_diff_other_seed = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal = all_equal && a[i].image.pixels == b[i].image.pixels && a[i].mask.pixels == b[i].mask.pixels;
    any_diff_other_seed = any_diff_other_seed || a[i].image.pixels != c[i].image.pixels;
  }
  CHECK(all_equal);
  CHECK(any_diff_other_seed);
}

TEST_CASE("write_synth_dataset lays out a scannable class and identical bytes per seed") {
  TempDir dir("synth");
  write_synth_dataset(dir.path.string(), 5, 32, 7);
  const auto index = scan_dataset(dir.path.string());
  REQUIRE(index.classes.size() == 1);
  CHECK(index.classes[0].first == "synthetic");
  CHECK(index.usable() == 5);
  CHECK(index.dropped.empty());

  TempDir dir2("synth2");
  write_synth_dataset(dir2.path.string(), 5, 32, 7);
  for (int i = 0; i < 5; ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "synthetic_%04d.png", i);
    CHECK(read_file(dir.path / "synthetic" / "image" / name) == read_file(dir2.path / "synthetic" / "image" / name));
    CHECK(read_file(dir.path / "synthetic" / "label" / name) == read_file(dir2.path / "synthetic" / "label" / name));
  }
}

TEST_CASE("scan pairs by filename and records dropped images") {
  TempDir dir("scan");
  const fs::path cls = dir.path / "polyp";
  fs::create_directories(cls / "image");
  fs::create_directories(cls / "label");
  for (int i = 0; i < 4; ++i) {
    write_png((cls / "image" / ("img" + std::to_string(i) + ".png")).string(), solid_image(8, 200, 3));
  }
  for (int i = 0; i < 3; ++i) {
    write_png((cls / "label" / ("img" + std::to_string(i) + ".png")).string(), solid_image(8, 255, 1));
  }

  const auto index = scan_dataset(dir.path.string());
  CHECK(index.usable() == 3);
  REQUIRE(index.dropped.size() == 1);
  CHECK(index.dropped[0].find("img3.png") != std::string::npos);
}

TEST_CASE("empty class directory warns instead of failing") {
  TempDir dir("empty");
  fs::create_directories(dir.path / "normal" / "image");
  fs::create_directories(dir.path / "normal" / "label");
  const auto index = scan_dataset(dir.path.string());
  CHECK(index.usable() == 0);
  CHECK(!index.warnings.empty());
}

TEST_CASE("missing label directory is an error naming the path") {
  TempDir dir("nolabel");
  fs::create_directories(dir.path / "polyp" / "image");
  CHECK_THROWS_WITH_AS((void)scan_dataset(dir.path.string()), doctest::Contains("label"), IoError);
  CHECK_THROWS_AS((void)scan_dataset((dir.path / "nonexistent").string()), IoError);
}

TEST_CASE("split is stratified, deterministic, disjoint, and exhaustive") {
  DatasetIndex index;
  std::vector<Sample> samples;
  for (int i = 0; i < 10; ++i) {
    samples.push_back(Sample{"img" + std::to_string(i), "lbl" + std::to_string(i), "polyp"});
  }
  index.classes.emplace_back("polyp", samples);

  const Split s1 = split_dataset(index, SplitSpec{0.8, 5});
  CHECK(s1.train.size() == 8);
  CHECK(s1.test.size() == 2);

  const Split s2 = split_dataset(index, SplitSpec{0.8, 5});
  bool same = s1.train.size() == s2.train.size();
  for (std::size_t i = 0; same && i < s1.train.size(); ++i) same = s1.train[i].image_path == s2.train[i].image_path;
  CHECK(same);

  const Split s3 = split_dataset(index, SplitSpec{0.8, 6});
  bool differs = false;
  for (std::size_t i = 0; i < s1.train.size(); ++i) differs = differs || s1.train[i].image_path != s3.train[i].image_path;
  CHECK(differs);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Split s = split_dataset(index, SplitSpec{0.8, seed});
    std::set<std::string> train_set, all;
    for (const auto& t : s.train) train_set.insert(t.image_path);
    for (const auto& t : s.train) all.insert(t.image_path);
    for (const auto& t : s.test) {
      CHECK(!train_set.contains(t.image_path));
      all.insert(t.image_path);
    }
    CHECK(all.size() == 10);
  }
}

TEST_CASE("load_batch scales images and binarizes masks") {
  TempDir dir("load");
  const fs::path cls = dir.path / "synthetic";
  fs::create_directories(cls / "image");
  fs::create_directories(cls / "label");

  write_png((cls / "image" / "a.png").string(), solid_image(16, 255, 3));
  ImageU8 mask = solid_image(16, 0, 1);
  for (std::size_t i = 0; i < mask.pixels.size(); i += 2) mask.pixels[i] = 255;
  write_png((cls / "label" / "a.png").string(), mask);

  const auto index = scan_dataset(dir.path.string());
  const auto& samples = index.classes[0].second;
  auto [images, masks] = load_batch(samples, 0, 1, 16);
  CHECK(images.shape() == Shape4{1, 3, 16, 16});
  CHECK(masks.shape() == Shape4{1, 1, 16, 16});
  for (float v : images.data) CHECK(v == 1.0f);
  for (std::size_t i = 0; i < masks.data.size(); ++i) {
    CHECK(masks.data[i] == (i % 2 == 0 ? 1.0f : 0.0f));
  }

  CHECK_THROWS_AS(load_batch(samples, 0, 1, 32), IoError);  // size mismatch
}

TEST_CASE("pgm and ppm fixtures decode without the png path") {
  TempDir dir("pnm");
  const fs::path pgm = dir.path / "fixture.pgm";
  // 2x2 gray: 0, 64, 128, 255
  std::ofstream(pgm, std::ios::binary) << "P5\n# comment\n2 2\n255\n" << '\x00' << '\x40' << static_cast<char>(128)
                                       << static_cast<char>(255);
  const ImageU8 g = read_image(pgm.string());
  CHECK(g.channels == 1);
  CHECK(g.width == 2);
  CHECK(g.pixels == std::vector<std::uint8_t>{0, 64, 128, 255});

  const fs::path ppm = dir.path / "fixture.ppm";
  std::ofstream(ppm, std::ios::binary) << "P6\n1 2\n255\n"
                                       << static_cast<char>(10) << static_cast<char>(20) << static_cast<char>(30)
                                       << static_cast<char>(200) << static_cast<char>(100) << static_cast<char>(50);
  const ImageU8 c = read_image(ppm.string());
  CHECK(c.channels == 3);
  CHECK(c.height == 2);
  CHECK(c.pixels == std::vector<std::uint8_t>{10, 20, 30, 200, 100, 50});

  const fs::path bad = dir.path / "bad.txt";
  std::ofstream(bad) << "not an image";
  CHECK_THROWS_AS((void)read_image(bad.string()), IoError);
}

TEST_CASE("png roundtrip preserves bytes exactly") {
  TempDir dir("png");
  ImageU8 img = solid_image(9, 0, 3);
  std::mt19937_64 rng(3);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  const fs::path path = dir.path / "roundtrip.png";
  write_png(path.string(), img);
  const ImageU8 back = read_image(path.string());
  CHECK(back.channels == 3);
  CHECK(back.pixels == img.pixels);
}
