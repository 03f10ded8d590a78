#include "semistereo/model/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "semistereo/error.hpp"
#include "semistereo/model/container.hpp"
#include "semistereo/model/correlation.hpp"

namespace semistereo::model {

namespace {

constexpr double kLeakySlope = 0.1;

enum class LayerKind { conv, deconv };
enum class LayerRole { hidden, disparity_head, occlusion_head };

struct LayerDef {
  std::string name;
  LayerKind kind;
  int in_channels, out_channels, kernel, stride, pad;
  LayerRole role = LayerRole::hidden;
};

// Encoder width at stride 2^level, level >= 3.
int encoder_channels(int level, int base) {
  if (level <= 3) return 4 * base;
  if (level <= 5) return 8 * base;
  return 16 * base;
}

// Decoder width at stride 2^level, level >= 1.
int decoder_channels(int level, int base) {
  return std::max(2, std::min(8 * base, (base << level) / 4));
}

int skip_channels(int level, int base) {
  if (level == 1) return base;
  if (level == 2) return 2 * base;
  return encoder_channels(level, base);
}

std::vector<LayerDef> layer_table(const ModelConfig& cfg) {
  const int c = cfg.base_channels;
  const int n = cfg.n_scales;
  std::vector<LayerDef> t;
  t.push_back({"tower0", LayerKind::conv, 3, c, 7, 2, 3});
  t.push_back({"tower1", LayerKind::conv, c, 2 * c, 5, 2, 2});
  t.push_back({"tower2", LayerKind::conv, 2 * c, 4 * c, 5, 2, 2});
  t.push_back({"redir", LayerKind::conv, 4 * c, c, 1, 1, 0});
  t.push_back({"enc3", LayerKind::conv, cfg.max_displacement + 1 + c, encoder_channels(3, c), 3, 1, 1});
  for (int l = 4; l <= n; ++l) {
    const std::string s = std::to_string(l);
    t.push_back({"enc" + s + "a", LayerKind::conv, encoder_channels(l - 1, c), encoder_channels(l, c), 3, 2, 1});
    t.push_back({"enc" + s + "b", LayerKind::conv, encoder_channels(l, c), encoder_channels(l, c), 3, 1, 1});
  }
  int feat = encoder_channels(n, c);
  t.push_back({"disp" + std::to_string(n), LayerKind::conv, feat, 1, 3, 1, 1, LayerRole::disparity_head});
  t.push_back({"occ" + std::to_string(n), LayerKind::conv, feat, 1, 3, 1, 1, LayerRole::occlusion_head});
  for (int l = n - 1; l >= 1; --l) {
    const std::string s = std::to_string(l);
    const int dc = decoder_channels(l, c);
    t.push_back({"up" + s, LayerKind::deconv, feat, dc, 4, 2, 1});
    t.push_back({"dec" + s, LayerKind::conv, dc + skip_channels(l, c) + 2, dc, 3, 1, 1});
    t.push_back({"disp" + s, LayerKind::conv, dc, 1, 3, 1, 1, LayerRole::disparity_head});
    t.push_back({"occ" + s, LayerKind::conv, dc, 1, 3, 1, 1, LayerRole::occlusion_head});
    feat = dc;
  }
  return t;
}

struct Builder {
  const BoundParameters& params;
  const std::vector<LayerDef>& table;

  const LayerDef& def(const std::string& name) const {
    for (const auto& d : table)
      if (d.name == name) return d;
    throw ContractError("no layer " + name);
  }

  ag::Var apply(const std::string& name, ag::Var x) const {
    const LayerDef& d = def(name);
    const ag::Var w = params.at(name + ".weight");
    const ag::Var b = params.at(name + ".bias");
    return d.kind == LayerKind::conv ? ag::conv2d(x, w, b, d.stride, d.pad)
                                     : ag::conv_transpose2d(x, w, b, d.stride, d.pad);
  }
  ag::Var act(const std::string& name, ag::Var x) const { return ag::leaky_relu(apply(name, x), kLeakySlope); }
};

}  // namespace

NetworkOutput NetworkGraph::values() const {
  NetworkOutput out;
  for (const ag::Var& v : disparity) out.disparity.push_back(v.value());
  for (const ag::Var& v : occlusion_logits) out.occlusion_logits.push_back(v.value());
  for (int i = 0; i < 3; ++i) {
    out.features_left.levels[i] = features_left[i].value();
    out.features_right.levels[i] = features_right[i].value();
  }
  return out;
}

ag::Var BoundParameters::at(const std::string& name) const {
  for (const auto& [n, v] : vars)
    if (n == name) return v;
  throw ContractError("unbound parameter " + name);
}

BoundParameters bind(ag::Tape& tape, const ParameterSet& params, bool trainable) {
  BoundParameters b;
  b.vars.reserve(params.size());
  for (const auto& [name, t] : params)
    b.vars.emplace_back(name, trainable ? tape.variable(t) : tape.constant(t));
  return b;
}

ParameterSet collect_gradients(const ag::Tape& tape, const BoundParameters& bound) {
  ParameterSet g;
  for (const auto& [name, v] : bound.vars) g.add(name, tape.grad(v));
  return g;
}

ParameterSet init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  ParameterSet p;
  for (const LayerDef& d : layer_table(config)) {
    // Weight layout: conv [out, in, k, k]; deconv [in, out, k, k].
    Tensor w = d.kind == LayerKind::conv ? Tensor({d.out_channels, d.in_channels, d.kernel, d.kernel})
                                         : Tensor({d.in_channels, d.out_channels, d.kernel, d.kernel});
    double fan_in = static_cast<double>(d.in_channels) * d.kernel * d.kernel;
    if (d.kind == LayerKind::deconv) fan_in /= static_cast<double>(d.stride) * d.stride;
    double stddev = std::sqrt(2.0 / fan_in);
    Tensor b({d.out_channels});
    switch (d.role) {
      case LayerRole::hidden: break;
      case LayerRole::disparity_head:
        stddev = 0.1 / std::sqrt(fan_in);
        // relu(0.5) = 0.5; softplus(-0.433) ~= 0.5
        b[0] = config.disparity_activation == DisparityActivation::relu ? 0.5 : std::log(std::expm1(0.5));
        break;
      case LayerRole::occlusion_head:
        stddev = 0.1 / std::sqrt(fan_in);
        b[0] = -2.0;
        break;
    }
    std::normal_distribution<double> normal(0.0, stddev);
    for (double& v : w.values()) v = normal(rng);
    p.add(d.name + ".weight", std::move(w));
    p.add(d.name + ".bias", std::move(b));
  }
  return p;
}

std::vector<std::pair<int, int>> output_shapes(int height, int width, const ModelConfig& config) {
  std::vector<std::pair<int, int>> s;
  for (int l = config.n_scales; l >= 1; --l) s.emplace_back(height >> l, width >> l);
  return s;
}

void check_input_size(int height, int width, const ModelConfig& config) {
  const int m = config.largest_stride();
  if (height <= 0 || width <= 0 || height % m != 0 || width % m != 0) {
    const int ph = (m - height % m) % m, pw = (m - width % m) % m;
    throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) +
                     " is not divisible by the largest stride " + std::to_string(m) + "; pad by " +
                     std::to_string(ph) + " rows and " + std::to_string(pw) + " columns");
  }
}

NetworkGraph forward(ag::Tape& tape, const BoundParameters& params, ag::Var left, ag::Var right,
                     const ModelConfig& config) {
  config.validate();
  const Tensor& lv = left.value();
  if (lv.rank() != 3 || lv.channels() != 3 || !lv.same_shape(right.value()))
    throw ShapeError("forward: expects two 3xHxW images of equal size");
  check_input_size(lv.height(), lv.width(), config);
  (void)tape;

  const auto table = layer_table(config);
  const Builder net{params, table};
  const bool softplus = config.disparity_activation == DisparityActivation::softplus;
  auto disparity_head = [&](const std::string& name, ag::Var x) {
    ag::Var raw = net.apply(name, x);
    return softplus ? ag::softplus(raw) : ag::relu(raw);
  };

  NetworkGraph g;
  std::array<ag::Var, 2> view{ag::affine(left, 1.0, -0.5), ag::affine(right, 1.0, -0.5)};
  std::array<std::array<ag::Var, 3>, 2> tower;
  for (int v = 0; v < 2; ++v) {
    ag::Var x = view[v];
    for (int k = 0; k < 3; ++k) {
      x = net.act("tower" + std::to_string(k), x);
      tower[v][k] = x;
    }
  }
  g.features_left = tower[0];
  g.features_right = tower[1];

  const int n = config.n_scales;
  std::vector<ag::Var> enc(static_cast<std::size_t>(n + 1));
  {
    ag::Var corr = ag::leaky_relu(correlate(tower[0][2], tower[1][2], config.max_displacement), kLeakySlope);
    ag::Var redir = net.act("redir", tower[0][2]);
    const std::array<ag::Var, 2> parts{corr, redir};
    enc[3] = net.act("enc3", ag::concat_channels(parts));
  }
  for (int l = 4; l <= n; ++l) {
    const std::string s = std::to_string(l);
    enc[l] = net.act("enc" + s + "b", net.act("enc" + s + "a", enc[l - 1]));
  }

  ag::Var feat = enc[n];
  ag::Var disp = disparity_head("disp" + std::to_string(n), feat);
  ag::Var occ = net.apply("occ" + std::to_string(n), feat);
  g.disparity.push_back(disp);
  g.occlusion_logits.push_back(occ);
  for (int l = n - 1; l >= 1; --l) {
    const std::string s = std::to_string(l);
    const int h = lv.height() >> l, w = lv.width() >> l;
    ag::Var up = net.act("up" + s, feat);
    ag::Var skip = l >= 3 ? enc[l] : tower[0][l - 1];
    ag::Var up_disp = ag::upsample_bilinear(disp, h, w, 2.0);
    ag::Var up_occ = ag::upsample_bilinear(occ, h, w, 1.0);
    const std::array<ag::Var, 4> parts{up, skip, up_disp, up_occ};
    feat = net.act("dec" + s, ag::concat_channels(parts));
    disp = disparity_head("disp" + s, feat);
    occ = net.apply("occ" + s, feat);
    g.disparity.push_back(disp);
    g.occlusion_logits.push_back(occ);
  }
  return g;
}

NetworkOutput forward(const ParameterSet& params, const Tensor& left, const Tensor& right,
                      const ModelConfig& config) {
  ag::Tape tape;
  const BoundParameters bound = bind(tape, params, false);
  return forward(tape, bound, tape.constant(left), tape.constant(right), config).values();
}

namespace {

int integer_ratio(int source_h, int source_w, int height, int width) {
  if (source_h <= 0 || source_w <= 0 || height % source_h != 0 || width % source_w != 0 ||
      height / source_h != width / source_w)
    throw ContractError("upsample_to_full: target size is not an integer multiple of the source size");
  return width / source_w;
}

}  // namespace

Tensor upsample_to_full(const Tensor& disparity, int height, int width) {
  ag::Tape tape;
  return upsample_to_full(tape.constant(disparity), height, width).value();
}

ag::Var upsample_to_full(ag::Var disparity, int height, int width) {
  const Tensor& d = disparity.value();
  const int ratio = integer_ratio(d.height(), d.width(), height, width);
  if (ratio == 1) return disparity;
  return ag::upsample_bilinear(disparity, height, width, static_cast<double>(ratio));
}

void save_parameters(const std::filesystem::path& path, const ParameterSet& params,
                     const ModelConfig& config) {
  Container c;
  c.kind = "parameters";
  c.meta = {{"model.base_channels", std::to_string(config.base_channels)},
            {"model.max_displacement", std::to_string(config.max_displacement)},
            {"model.n_scales", std::to_string(config.n_scales)},
            {"model.disparity_activation", to_string(config.disparity_activation)}};
  for (const auto& [name, t] : params) c.tensors.emplace_back(name, t);
  write_container(path, c);
}

std::pair<ParameterSet, ModelConfig> load_parameters(const std::filesystem::path& path) {
  const Container c = read_container(path, "parameters");
  ModelConfig cfg;
  try {
    cfg.base_channels = std::stoi(c.meta_value("model.base_channels"));
    cfg.max_displacement = std::stoi(c.meta_value("model.max_displacement"));
    cfg.n_scales = std::stoi(c.meta_value("model.n_scales"));
  } catch (const std::logic_error&) {
    throw FormatError("parameter file: bad model metadata");
  }
  cfg.disparity_activation = parse_disparity_activation(c.meta_value("model.disparity_activation"));
  ParameterSet p;
  for (const auto& [name, t] : c.tensors) p.add(name, t);
  if (!init_params(cfg, 0).same_layout(p)) throw FormatError("parameter file does not match its model config");
  return {std::move(p), cfg};
}

}  // namespace semistereo::model
