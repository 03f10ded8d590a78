#include "semistereo/data/toy_scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "semistereo/error.hpp"

namespace semistereo::data {

std::string to_string(Texture t) {
  switch (t) {
    case Texture::noise: return "noise";
    case Texture::gradient: return "gradient";
    case Texture::checker: return "checker";
  }
  return "noise";
}

Texture parse_texture(const std::string& s) {
  if (s == "noise") return Texture::noise;
  if (s == "gradient") return Texture::gradient;
  if (s == "checker") return Texture::checker;
  throw ConfigError("unknown texture '" + s + "' (noise|gradient|checker)");
}

void ToySceneSpec::validate() const {
  if (width <= 0 || height <= 0) throw ConfigError("toy scene: width and height must be positive");
  if (n_layers < 1) throw ConfigError("toy scene: n_layers must be >= 1");
  if (d_min < 0 || d_min > d_max) throw ConfigError("toy scene: need 0 <= d_min <= d_max");
  if (d_max >= width) throw ConfigError("toy scene: d_max must be smaller than width");
  if (texture_scale < 1) throw ConfigError("toy scene: texture_scale must be >= 1");
  if (!layer_disparities.empty()) {
    if (static_cast<int>(layer_disparities.size()) != n_layers)
      throw ConfigError("toy scene: layer_disparities needs one entry per layer");
    for (int d : layer_disparities)
      if (d < 0 || d >= width) throw ConfigError("toy scene: layer disparity out of range");
  }
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_cell(std::uint64_t key, std::int64_t u, std::int64_t v, int channel) {
  std::uint64_t h = splitmix(key);
  h = splitmix(h ^ static_cast<std::uint64_t>(u));
  h = splitmix(h ^ static_cast<std::uint64_t>(v));
  return splitmix(h ^ static_cast<std::uint64_t>(channel));
}

struct Layer {
  int x0, y0, w, h;
  bool background;
  int disparity;
  std::uint64_t key;
  std::array<int, 3> color_a, color_b;
  int ramp_period;

  bool covers(int x, int y) const {
    return background || (x >= x0 && x < x0 + w && y >= y0 && y < y0 + h);
  }
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Texture value as an integer in [0, 255] at texture coordinate (u, v).
int texel(const Layer& l, const ToySceneSpec& spec, int u, int v, int channel) {
  const int s = spec.texture_scale;
  switch (spec.texture) {
    case Texture::noise:
      return static_cast<int>(hash_cell(l.key, floor_div(u, s), floor_div(v, s), channel) % 256);
    case Texture::checker: {
      const auto parity = (floor_div(u, s) + floor_div(v, s)) & 1;
      return parity ? l.color_a[channel] : l.color_b[channel];
    }
    case Texture::gradient: {
      std::int64_t m = u % l.ramp_period;
      if (m < 0) m += l.ramp_period;
      const double t = static_cast<double>(m) / l.ramp_period;
      return static_cast<int>(std::lround(l.color_a[channel] + t * (l.color_b[channel] - l.color_a[channel])));
    }
  }
  return 0;
}

std::vector<int> draw_disparities(const ToySceneSpec& spec, std::mt19937_64& rng) {
  if (!spec.layer_disparities.empty()) return spec.layer_disparities;
  const int n = spec.n_layers;
  std::vector<int> d;
  const int slots = (spec.d_max - spec.d_min) / 2 + 1;
  if (slots >= n) {
    // Distinct values at least two pixels apart, so a unit-tolerance
    // left-right check separates every pair of layers.
    std::vector<int> pool(static_cast<std::size_t>(slots));
    for (int i = 0; i < slots; ++i) pool[i] = spec.d_min + 2 * i;
    std::shuffle(pool.begin(), pool.end(), rng);
    d.assign(pool.begin(), pool.begin() + n);
  } else {
    std::uniform_int_distribution<int> u(spec.d_min, spec.d_max);
    for (int i = 0; i < n; ++i) d.push_back(u(rng));
  }
  std::sort(d.begin(), d.end());  // background farthest
  return d;
}

}  // namespace

StereoSample generate_toy_pair(const ToySceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int W = spec.width, H = spec.height;
  std::mt19937_64 rng(splitmix(seed ^ 0x70795f736365ULL));
  const std::vector<int> disparities = draw_disparities(spec, rng);

  std::vector<Layer> layers;
  std::uniform_int_distribution<int> color(0, 255);
  for (int i = 0; i < spec.n_layers; ++i) {
    Layer l{};
    l.background = (i == 0);
    if (l.background) {
      l.x0 = 0;
      l.y0 = 0;
      l.w = W;
      l.h = H;
    } else {
      std::uniform_int_distribution<int> wd(std::max(1, W / 6), std::max(1, W / 2));
      std::uniform_int_distribution<int> hd(std::max(1, H / 4), std::max(1, 2 * H / 3));
      l.w = wd(rng);
      l.h = hd(rng);
      l.x0 = std::uniform_int_distribution<int>(0, W - l.w)(rng);
      l.y0 = std::uniform_int_distribution<int>(0, H - l.h)(rng);
    }
    l.disparity = disparities[static_cast<std::size_t>(i)];
    l.key = rng();
    for (int c = 0; c < 3; ++c) {
      l.color_a[c] = color(rng);
      l.color_b[c] = 255 - l.color_a[c];
    }
    l.ramp_period = std::max(2, 16 * spec.texture_scale);
    layers.push_back(l);
  }

  // Nearest first: larger disparity, then higher layer index.
  std::vector<int> order(layers.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (layers[a].disparity != layers[b].disparity) return layers[a].disparity > layers[b].disparity;
    return a > b;
  });

  auto visible_left = [&](int x, int y) {
    for (int i : order)
      if (layers[i].covers(x, y)) return i;
    return order.back();
  };
  auto visible_right = [&](int xr, int y) {
    for (int i : order)
      if (layers[i].covers(xr + layers[i].disparity, y)) return i;
    return order.back();
  };

  StereoSample s;
  s.id = "toy_" + std::to_string(seed);
  s.domain = Domain::synthetic;
  s.left = Tensor::chw(3, H, W);
  s.right = Tensor::chw(3, H, W);
  Tensor disp = Tensor::chw(1, H, W);
  Tensor disp_right = Tensor::chw(1, H, W);
  Mask occ(H, W);

  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const int li = visible_left(x, y);
      const Layer& l = layers[li];
      for (int c = 0; c < 3; ++c) s.left(c, y, x) = texel(l, spec, x - l.x0, y - l.y0, c) / 255.0;
      disp(0, y, x) = l.disparity;
      const int xr = x - l.disparity;
      occ.set(y, x, xr < 0 || visible_right(xr, y) != li);

      const int ri = visible_right(x, y);
      const Layer& r = layers[ri];
      for (int c = 0; c < 3; ++c)
        s.right(c, y, x) = texel(r, spec, x + r.disparity - r.x0, y - r.y0, c) / 255.0;
      disp_right(0, y, x) = r.disparity;
    }
  }
  s.gt_disparity = std::move(disp);
  s.gt_disparity_right = std::move(disp_right);
  s.gt_valid = Mask(H, W, true);
  s.gt_occlusion = std::move(occ);
  return s;
}

}  // namespace semistereo::data
