#include <doctest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <set>

#include "semistereo/data/dataset.hpp"
#include "semistereo/data/image_io.hpp"
#include "semistereo/data/pfm.hpp"
#include "semistereo/data/schedule.hpp"
#include "semistereo/data/toy_scene.hpp"
#include "semistereo/error.hpp"
#include "support.hpp"

using namespace semistereo;
using namespace semistereo::data;
using namespace testing_support;

namespace {

void write_bytes(const std::filesystem::path& p, const std::string& header, const std::vector<float>& payload,
                 bool big_endian) {
  std::ofstream out(p, std::ios::binary);
  out << header;
  for (float f : payload) {
    auto bits = std::bit_cast<std::uint32_t>(f);
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    if (big_endian) std::swap(b[0], b[3]), std::swap(b[1], b[2]);
    out.write(reinterpret_cast<const char*>(b), 4);
  }
}

}  // namespace

TEST_CASE("PFM round trip is bit exact") {
  std::mt19937_64 rng(11);
  Tensor m({1, 5, 7});
  std::uniform_real_distribution<float> u(0.0f, 300.0f);
  for (double& v : m.values()) v = u(rng);
  const auto dir = temp_dir("pfm");
  write_pfm(dir / "m.pfm", m);
  CHECK(read_pfm(dir / "m.pfm") == m);
}

TEST_CASE("PFM hand-assembled files decode rows bottom to top with either endianness") {
  const auto dir = temp_dir("pfm_hand");
  // Payload rows are stored bottom-to-top: [[3,4],[1,2]] -> [[1,2],[3,4]].
  write_bytes(dir / "le.pfm", "Pf\n2 2\n-1.0\n", {3, 4, 1, 2}, false);
  write_bytes(dir / "be.pfm", "Pf\n2 2\n1.0\n", {3, 4, 1, 2}, true);
  write_bytes(dir / "neg.pfm", "Pf\n2 2\n-1.0\n", {-3, 4, -1, 2}, false);
  for (const char* f : {"le.pfm", "be.pfm", "neg.pfm"}) {
    const Tensor m = read_pfm(dir / f);
    REQUIRE(m.shape() == std::vector<int>{1, 2, 2});
    CHECK(m(0, 0, 0) == 1.0);
    CHECK(m(0, 0, 1) == 2.0);
    CHECK(m(0, 1, 0) == 3.0);
    CHECK(m(0, 1, 1) == 4.0);
  }
}

TEST_CASE("PFM rejects bad magic, colour files and short payloads") {
  const auto dir = temp_dir("pfm_bad");
  write_bytes(dir / "px.pfm", "Px\n2 2\n-1.0\n", {1, 2, 3, 4}, false);
  write_bytes(dir / "pf3.pfm", "PF\n1 1\n-1.0\n", {1, 2, 3}, false);
  write_bytes(dir / "short.pfm", "Pf\n2 2\n-1.0\n", {1, 2, 3}, false);
  CHECK_THROWS_AS(read_pfm(dir / "px.pfm"), FormatError);
  CHECK_THROWS_AS(read_pfm(dir / "pf3.pfm"), UnsupportedError);
  CHECK_THROWS_AS(read_pfm(dir / "short.pfm"), FormatError);
}

TEST_CASE("16-bit PNG disparity follows the raw / 256 convention") {
  const auto dir = temp_dir("png16");
  cv::Mat raw(1, 3, CV_16UC1);
  raw.at<std::uint16_t>(0, 0) = 256;
  raw.at<std::uint16_t>(0, 1) = 0;
  raw.at<std::uint16_t>(0, 2) = 12800;
  REQUIRE(cv::imwrite((dir / "d.png").string(), raw));
  const auto [disp, valid] = read_disparity_png16(dir / "d.png");
  CHECK(disp(0, 0, 0) == 1.0);
  CHECK(valid(0, 0));
  CHECK(disp(0, 0, 1) == 0.0);
  CHECK_FALSE(valid(0, 1));
  CHECK(disp(0, 0, 2) == 50.0);
  CHECK(valid(0, 2));

  // Encode-then-decode of every representable value class.
  Tensor m({1, 4, 5});
  Mask mv(4, 5, true);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(1, 65535);
  for (double& v : m.values()) v = u(rng) / 256.0;
  m(0, 1, 1) = 0.0;
  mv.set(1, 1, false);
  write_disparity_png16(dir / "rt.png", m, mv);
  const auto [m2, v2] = read_disparity_png16(dir / "rt.png");
  CHECK(m2 == m);
  CHECK(v2 == mv);

  cv::Mat eight(2, 2, CV_8UC1, cv::Scalar(3));
  cv::Mat color(2, 2, CV_16UC3, cv::Scalar(3, 3, 3));
  REQUIRE(cv::imwrite((dir / "8.png").string(), eight));
  REQUIRE(cv::imwrite((dir / "c.png").string(), color));
  CHECK_THROWS_AS(read_disparity_png16(dir / "8.png"), FormatError);
  CHECK_THROWS_AS(read_disparity_png16(dir / "c.png"), FormatError);
}

TEST_CASE("toy generator: zero disparity gives identical views") {
  ToySceneSpec spec;
  spec.n_layers = 1;
  spec.d_min = spec.d_max = 0;
  const StereoSample s = generate_toy_pair(spec, 5);
  CHECK(s.left == s.right);
  for (double v : s.gt_disparity->values()) CHECK(v == 0.0);
  CHECK(s.gt_occlusion->count() == 0);
}

TEST_CASE("toy generator: a single layer is a pure shift with an out-of-frame band") {
  ToySceneSpec spec;
  spec.n_layers = 1;
  spec.width = 32;
  spec.height = 16;
  spec.d_min = spec.d_max = 4;
  const StereoSample s = generate_toy_pair(spec, 9);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 28; ++x) REQUIRE(s.right(c, y, x) == s.left(c, y, x + 4));
  // The left view's match x - 4 leaves the frame for x < 4.
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) CHECK((*s.gt_occlusion)(y, x) == (x < 4));
}

TEST_CASE("toy generator: occlusion equals a brute-force forward projection") {
  ToySceneSpec spec;
  spec.layer_disparities = {2, 6};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const StereoSample s = generate_toy_pair(spec, seed);
    const Tensor& d = *s.gt_disparity;
    const int h = s.height(), w = s.width();
    for (int y = 0; y < h; ++y) {
      // Right-view z-buffer: the nearest left pixel landing on each column.
      std::vector<double> zbuf(static_cast<std::size_t>(w), -1.0);
      for (int x = 0; x < w; ++x) {
        const int xr = x - static_cast<int>(d(0, y, x));
        if (xr >= 0) zbuf[static_cast<std::size_t>(xr)] = std::max(zbuf[static_cast<std::size_t>(xr)], d(0, y, x));
      }
      for (int x = 0; x < w; ++x) {
        const int xr = x - static_cast<int>(d(0, y, x));
        const bool oracle = xr < 0 || zbuf[static_cast<std::size_t>(xr)] > d(0, y, x);
        REQUIRE((*s.gt_occlusion)(y, x) == oracle);
      }
    }
  }
}

TEST_CASE("toy generator is deterministic and photometrically exact") {
  ToySceneSpec spec;
  for (Texture t : {Texture::noise, Texture::gradient, Texture::checker}) {
    spec.texture = t;
    for (std::uint64_t seed : {1ULL, 77ULL, 123456789ULL}) {
      const StereoSample a = generate_toy_pair(spec, seed);
      const StereoSample b = generate_toy_pair(spec, seed);
      CHECK(a.left == b.left);
      CHECK(a.right == b.right);
      CHECK(*a.gt_disparity == *b.gt_disparity);
      CHECK(*a.gt_occlusion == *b.gt_occlusion);
      for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
          if ((*a.gt_occlusion)(y, x)) continue;
          const int xr = x - static_cast<int>((*a.gt_disparity)(0, y, x));
          for (int c = 0; c < 3; ++c) REQUIRE(a.right(c, y, xr) == a.left(c, y, x));
        }
      for (double v : a.left.values()) REQUIRE((v >= 0.0 && v <= 1.0));
    }
  }
  CHECK_FALSE(generate_toy_pair(spec, 1).left == generate_toy_pair(spec, 2).left);
}

TEST_CASE("toy spec validation") {
  ToySceneSpec spec;
  spec.d_max = spec.width;
  CHECK_THROWS_AS(generate_toy_pair(spec, 0), ConfigError);
  spec = {};
  spec.d_min = 5;
  spec.d_max = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  spec = {};
  spec.n_layers = 0;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
}

TEST_CASE("schedule_epoch examples") {
  auto tags = [](const BatchSchedule& s) {
    std::string out;
    for (const auto& e : s.entries) out += tag_char(e.tag);
    return out;
  };
  CHECK(tags(schedule_epoch(2, 2, 0)) == "SRSR");
  CHECK(tags(schedule_epoch(1, 1, 0)) == "SR");
  CHECK_THROWS_AS(schedule_epoch(3, 2, 0), ConfigError);
  CHECK_THROWS_AS(schedule_epoch(0, 0, 0), ConfigError);
}

TEST_CASE("schedule_epoch invariants hold for random pool sizes") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    const int batch = std::uniform_int_distribution<int>(1, n)(rng);
    const auto s = schedule_epoch(n, n, rng(), batch);
    REQUIRE(satisfies_invariants(s));
    int count_s = 0, count_r = 0;
    std::set<int> seen_s, seen_r;
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
      const auto& e = s.entries[i];
      CHECK(e.tag == (i % 2 == 0 ? BatchTag::supervised : BatchTag::selfsup));
      CHECK(static_cast<int>(e.indices.size()) == batch);
      (e.tag == BatchTag::supervised ? count_s : count_r)++;
      for (int idx : e.indices) CHECK((e.tag == BatchTag::supervised ? seen_s : seen_r).insert(idx).second);
    }
    CHECK(count_s == count_r);
    CHECK(count_s == n / batch);
  }
}

TEST_CASE("subsample_pool draws each index once per pass") {
  const auto v = subsample_pool(5, 12, 4);
  REQUIRE(v.size() == 12);
  std::set<int> first(v.begin(), v.begin() + 5), second(v.begin() + 5, v.begin() + 10);
  CHECK(first.size() == 5);
  CHECK(second.size() == 5);
  CHECK(subsample_pool(5, 12, 4) == v);
}

TEST_CASE("toy dataset on disk round trips") {
  const auto dir = temp_dir("dataset");
  ToySceneSpec spec;
  const StereoSample s = generate_toy_pair(spec, 42);
  write_toy_sample(dir, s, spec, 42);
  for (const char* f : {"left.png", "right.png", "disp.pfm", "occ.png", "meta.json"})
    CHECK(std::filesystem::exists(dir / s.id / f));
  const StereoSample r = load_sample(dir / s.id);
  CHECK(r.id == s.id);
  CHECK(r.left == s.left);
  CHECK(r.right == s.right);
  CHECK(*r.gt_disparity == *s.gt_disparity);
  CHECK(*r.gt_occlusion == *s.gt_occlusion);
  CHECK(r.domain == Domain::synthetic);
  const auto all = load_dataset(dir);
  REQUIRE(all.size() == 1);
}
