#include "semistereo/analysis/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <map>
#include <tuple>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "semistereo/autograd.hpp"
#include "semistereo/error.hpp"
#include "semistereo/reconstruction/losses.hpp"
#include "semistereo/reconstruction/warp.hpp"

namespace semistereo::analysis {

std::string to_string(CostMetric m) {
  switch (m) {
    case CostMetric::photometric: return "photometric";
    case CostMetric::cosine: return "cosine";
    case CostMetric::l1: return "l1";
    case CostMetric::l2: return "l2";
  }
  return "photometric";
}

CostMetric parse_cost_metric(const std::string& s) {
  if (s == "photometric") return CostMetric::photometric;
  if (s == "cosine") return CostMetric::cosine;
  if (s == "l1") return CostMetric::l1;
  if (s == "l2") return CostMetric::l2;
  throw ConfigError("unknown metric '" + s + "' (photometric|cosine|l1|l2)");
}

namespace {

void check_query(int width, int height, Pixel p, int max_disparity) {
  if (max_disparity < 0 || max_disparity >= width)
    throw ContractError("cost curve: max disparity " + std::to_string(max_disparity) + " must be in [0, width " +
                        std::to_string(width) + ")");
  if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)
    throw ContractError("cost curve: pixel (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                        ") outside the image");
}

int level_index(int stride) {
  for (std::size_t k = 0; k < model::ModelConfig::feature_tap_strides.size(); ++k)
    if (model::ModelConfig::feature_tap_strides[k] == stride) return static_cast<int>(k);
  throw ContractError("feature level must be a tap stride (2, 4 or 8), got " + std::to_string(stride));
}

// Patch cost of the left patch at p against the right image shifted by d;
// nullopt when part of the patch matches outside the frame.
std::optional<double> photometric_cost(const data::StereoSample& s, Pixel p, double d, int r) {
  const int h = s.height(), w = s.width();
  const int y0 = std::max(0, p.y - r - 1), y1 = std::min(h - 1, p.y + r + 1);
  const int ch = y1 - y0 + 1;
  Tensor left({3, ch, w}), right({3, ch, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < ch; ++y)
      for (int x = 0; x < w; ++x) {
        left(c, y, x) = s.left(c, y0 + y, x);
        right(c, y, x) = s.right(c, y0 + y, x);
      }
  const auto [warped, inbounds] = recon::warp_right_to_left(right, Tensor::chw(1, ch, w, d));
  double sum = 0.0;
  int n = 0;
  for (int y = std::max(0, p.y - r); y <= std::min(h - 1, p.y + r); ++y)
    for (int x = std::max(0, p.x - r); x <= std::min(w - 1, p.x + r); ++x)
      if (!inbounds(y - y0, x)) return std::nullopt;
  ag::Tape tape;
  const Tensor cost = recon::photometric_cost_map(tape.constant(left), tape.constant(warped), inbounds).value();
  for (int y = std::max(0, p.y - r); y <= std::min(h - 1, p.y + r); ++y)
    for (int x = std::max(0, p.x - r); x <= std::min(w - 1, p.x + r); ++x) {
      sum += cost(0, y - y0, x);
      ++n;
    }
  return sum / n;
}

double dissimilarity(const std::vector<double>& a, const std::vector<double>& b, CostMetric metric) {
  double dot = 0.0, na = 0.0, nb = 0.0, l1 = 0.0, l2 = 0.0;
  for (std::size_t c = 0; c < a.size(); ++c) {
    dot += a[c] * b[c];
    na += a[c] * a[c];
    nb += b[c] * b[c];
    l1 += std::abs(a[c] - b[c]);
    l2 += (a[c] - b[c]) * (a[c] - b[c]);
  }
  switch (metric) {
    case CostMetric::cosine: return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb) + recon::kCosineEpsilon);
    case CostMetric::l1: return l1 / static_cast<double>(a.size());
    case CostMetric::l2: return std::sqrt(l2);
    case CostMetric::photometric: break;
  }
  throw ContractError("dissimilarity: photometric is not a feature metric");
}

struct LevelPoint {
  int x, y, stride;
};

LevelPoint to_level(Pixel p, int stride, const Tensor& f) {
  const auto lx = static_cast<int>(std::lround(static_cast<double>(p.x) / stride));
  const auto ly = static_cast<int>(std::lround(static_cast<double>(p.y) / stride));
  return {std::clamp(lx, 0, f.width() - 1), std::clamp(ly, 0, f.height() - 1), stride};
}

// Feature dissimilarity at a full-resolution disparity shift; nullopt out of frame.
std::optional<double> feature_cost(const Tensor& fl, const Tensor& fr, LevelPoint q, double d, CostMetric metric) {
  const double xs = q.x - d / q.stride;
  if (xs < 0.0 || xs > fr.width() - 1) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(xs));
  const int x1 = std::min(x0 + 1, fr.width() - 1);
  const double frac = xs - x0;
  std::vector<double> a(static_cast<std::size_t>(fl.channels())), b(a.size());
  for (int c = 0; c < fl.channels(); ++c) {
    a[static_cast<std::size_t>(c)] = fl(c, q.y, q.x);
    const double v0 = fr(c, q.y, x0), v1 = fr(c, q.y, x1);
    b[static_cast<std::size_t>(c)] = v0 + frac * (v1 - v0);
  }
  return dissimilarity(a, b, metric);
}

void fill_out_of_frame(CostCurve& curve, const std::vector<std::optional<double>>& raw) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& v : raw)
    if (v) worst = std::max(worst, *v);
  if (!std::isfinite(worst)) throw InsufficientDataError("cost curve: no candidate has in-frame support");
  for (const auto& v : raw) {
    curve.costs.push_back(v ? *v : worst);
    curve.out_of_frame.push_back(!v);
  }
}

}  // namespace

CostCurve photometric_curve(const data::StereoSample& sample, Pixel pixel, int max_disparity,
                            const CurveOptions& options) {
  check_query(sample.width(), sample.height(), pixel, max_disparity);
  if (options.patch_radius < 0) throw ContractError("cost curve: patch radius must be >= 0");
  CostCurve curve{sample.id, pixel, CostMetric::photometric, 1, {}, {}, {}};
  std::vector<std::optional<double>> raw;
  for (int d = 0; d <= max_disparity; ++d) {
    curve.candidates.push_back(d);
    raw.push_back(photometric_cost(sample, pixel, d, options.patch_radius));
  }
  fill_out_of_frame(curve, raw);
  return curve;
}

CostCurve feature_curve(const model::FeaturePyramid& left, const model::FeaturePyramid& right, Pixel pixel,
                        int width, int height, int max_disparity, CostMetric metric, const CurveOptions& options) {
  check_query(width, height, pixel, max_disparity);
  if (metric == CostMetric::photometric) throw ContractError("feature_curve: photometric is not a feature metric");
  const int k = level_index(options.level);
  const Tensor& fl = left.levels[static_cast<std::size_t>(k)];
  const Tensor& fr = right.levels[static_cast<std::size_t>(k)];
  if (!fl.same_shape(fr)) throw ShapeError("feature_curve: left/right feature shapes differ");
  const LevelPoint q = to_level(pixel, options.level, fl);
  CostCurve curve{"", pixel, metric, options.level, {}, {}, {}};
  std::vector<std::optional<double>> raw;
  for (int d = 0; d <= max_disparity; ++d) {
    curve.candidates.push_back(d);
    raw.push_back(feature_cost(fl, fr, q, d, metric));
  }
  fill_out_of_frame(curve, raw);
  return curve;
}

CostCurve cost_curve(const data::StereoSample& sample, const model::ParameterSet* params,
                     const model::ModelConfig* config, Pixel pixel, int max_disparity, CostMetric metric,
                     const CurveOptions& options) {
  if (metric == CostMetric::photometric) return photometric_curve(sample, pixel, max_disparity, options);
  check_query(sample.width(), sample.height(), pixel, max_disparity);
  if (params == nullptr || config == nullptr) throw ContractError("cost curve: feature metrics need parameters");
  const model::NetworkOutput out = model::forward(*params, sample.left, sample.right, *config);
  CostCurve curve = feature_curve(out.features_left, out.features_right, pixel, sample.width(), sample.height(),
                                  max_disparity, metric, options);
  curve.sample_id = sample.id;
  return curve;
}

double curve_entropy(std::span<const double> costs, double temperature) {
  if (costs.empty()) throw ContractError("curve_entropy: empty curve");
  if (!(temperature > 0.0)) throw ContractError("curve_entropy: temperature must be > 0");
  const auto [lo, hi] = std::minmax_element(costs.begin(), costs.end());
  const double range = *hi - *lo;
  std::vector<double> z(costs.size());
  for (std::size_t i = 0; i < costs.size(); ++i) z[i] = range > 0.0 ? -((costs[i] - *lo) / range) / temperature : 0.0;
  const double zmax = *std::max_element(z.begin(), z.end());
  double norm = 0.0;
  for (double& v : z) norm += (v = std::exp(v - zmax));
  double h = 0.0;
  for (double v : z) {
    const double p = v / norm;
    if (p > 0.0) h -= p * std::log(p);
  }
  return std::clamp(h, 0.0, std::log(static_cast<double>(costs.size())));
}

int basin_width(std::span<const double> costs) {
  if (costs.empty()) throw ContractError("basin_width: empty curve");
  const auto m = static_cast<std::size_t>(std::min_element(costs.begin(), costs.end()) - costs.begin());
  std::size_t lo = m, hi = m;
  while (lo > 0 && costs[lo - 1] >= costs[lo]) --lo;
  while (hi + 1 < costs.size() && costs[hi + 1] >= costs[hi]) ++hi;
  return static_cast<int>(hi - lo + 1);
}

std::optional<double> cost_at(const CostCurve& curve, double disparity) {
  if (curve.candidates.empty() || disparity < curve.candidates.front() || disparity > curve.candidates.back())
    return std::nullopt;
  const auto it = std::lower_bound(curve.candidates.begin(), curve.candidates.end(), disparity,
                                   [](int c, double d) { return c < d; });
  const auto i = static_cast<std::size_t>(it - curve.candidates.begin());
  if (curve.candidates[i] == disparity || i == 0) return curve.costs[i];
  const double t = (disparity - curve.candidates[i - 1]) / (curve.candidates[i] - curve.candidates[i - 1]);
  return curve.costs[i - 1] + t * (curve.costs[i] - curve.costs[i - 1]);
}

CurveStats curve_stats(const CostCurve& curve, std::optional<double> gt_disparity, double temperature) {
  CurveStats s;
  const auto m = static_cast<std::size_t>(std::min_element(curve.costs.begin(), curve.costs.end()) - curve.costs.begin());
  s.argmin_disparity = curve.candidates.at(m);
  s.entropy = curve_entropy(curve.costs, temperature);
  s.basin_width = basin_width(curve.costs);
  s.gt_disparity = gt_disparity;
  if (gt_disparity) s.cost_at_gt = cost_at(curve, *gt_disparity);
  return s;
}

InflationResult boundary_cost_inflation(const data::StereoSample& sample, const model::ParameterSet* params,
                                        const model::ModelConfig* config, CostMetric metric, int band, int n_pixels,
                                        std::mt19937_64& rng, const CurveOptions& options) {
  if (!sample.gt_disparity) throw ContractError("boundary_cost_inflation: sample has no ground-truth disparity");
  if (band < 1) throw ContractError("boundary_cost_inflation: band must be >= 1");
  if (n_pixels < 1) throw ContractError("boundary_cost_inflation: n_pixels must be >= 1");
  const Tensor& gt = *sample.gt_disparity;
  const int h = sample.height(), w = sample.width();

  // Chebyshev distance to the nearest gt edge pixel by multi-source BFS.
  std::vector<int> dist(static_cast<std::size_t>(h) * w, std::numeric_limits<int>::max());
  std::deque<std::pair<int, int>> queue;
  auto seed = [&](int y, int x) {
    auto& v = dist[static_cast<std::size_t>(y) * w + x];
    if (v != 0) {
      v = 0;
      queue.emplace_back(y, x);
    }
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w && std::abs(gt(0, y, x + 1) - gt(0, y, x)) > 1.0) seed(y, x), seed(y, x + 1);
      if (y + 1 < h && std::abs(gt(0, y + 1, x) - gt(0, y, x)) > 1.0) seed(y, x), seed(y + 1, x);
    }
  while (!queue.empty()) {
    const auto [y, x] = queue.front();
    queue.pop_front();
    const int next = dist[static_cast<std::size_t>(y) * w + x] + 1;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int ny = y + dy, nx = x + dx;
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        auto& v = dist[static_cast<std::size_t>(ny) * w + nx];
        if (v > next) {
          v = next;
          queue.emplace_back(ny, nx);
        }
      }
  }

  std::vector<Pixel> near, far;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (sample.gt_occlusion && (*sample.gt_occlusion)(y, x)) continue;
      if (sample.gt_valid && !(*sample.gt_valid)(y, x)) continue;
      if (x - gt(0, y, x) - options.patch_radius < 0) continue;
      const int dd = dist[static_cast<std::size_t>(y) * w + x];
      if (dd <= band) near.push_back({x, y});
      else if (dd > 4 * band && dd != std::numeric_limits<int>::max()) far.push_back({x, y});
    }
  InflationResult result;
  result.n_near_candidates = near.size();
  result.n_far_candidates = far.size();
  if (near.size() < static_cast<std::size_t>(n_pixels) || far.size() < static_cast<std::size_t>(n_pixels))
    throw InsufficientDataError("boundary_cost_inflation: " + std::to_string(near.size()) + " near / " +
                                std::to_string(far.size()) + " far pixels available, " + std::to_string(n_pixels) +
                                " needed per stratum");
  std::shuffle(near.begin(), near.end(), rng);
  std::shuffle(far.begin(), far.end(), rng);

  std::optional<model::NetworkOutput> out;
  if (metric != CostMetric::photometric) {
    if (params == nullptr || config == nullptr) throw ContractError("boundary_cost_inflation: feature metrics need parameters");
    out = model::forward(*params, sample.left, sample.right, *config);
  }
  auto cost = [&](Pixel p) {
    const double d = gt(0, p.y, p.x);
    std::optional<double> c;
    if (metric == CostMetric::photometric) {
      c = photometric_cost(sample, p, d, options.patch_radius);
    } else {
      const auto k = static_cast<std::size_t>(level_index(options.level));
      const Tensor& fl = out->features_left.levels[k];
      c = feature_cost(fl, out->features_right.levels[k], to_level(p, options.level, fl), d, metric);
    }
    if (!c) throw InsufficientDataError("boundary_cost_inflation: ground-truth match out of frame");
    return *c;
  };
  for (int i = 0; i < n_pixels; ++i) {
    result.mean_near += cost(near[static_cast<std::size_t>(i)]) / n_pixels;
    result.mean_far += cost(far[static_cast<std::size_t>(i)]) / n_pixels;
  }
  result.ratio = (result.mean_near + kInflationEpsilon) / (result.mean_far + kInflationEpsilon);
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string safe_name(const std::string& s) {
  std::string out = s.empty() ? "sample" : s;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return out;
}

cv::Scalar metric_color(CostMetric m) {
  switch (m) {
    case CostMetric::photometric: return {200, 90, 20};
    case CostMetric::cosine: return {30, 30, 210};
    case CostMetric::l1: return {40, 160, 40};
    case CostMetric::l2: return {170, 40, 170};
  }
  return {0, 0, 0};
}

void dashed_vline(cv::Mat& img, int x, int y0, int y1, const cv::Scalar& color) {
  for (int y = y0; y < y1; y += 8) cv::line(img, {x, y}, {x, std::min(y + 4, y1)}, color, 1, cv::LINE_8);
}

void plot_group(const std::vector<std::size_t>& members, std::span<const CostCurve> curves,
                std::span<const CurveStats> stats, const std::filesystem::path& path) {
  const int W = 640, H = 380, left = 50, right = 20, top = 50, bottom = 40;
  cv::Mat img(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
  int d_max = 1;
  for (std::size_t i : members) d_max = std::max(d_max, curves[i].candidates.back());
  const int pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double d) { return left + static_cast<int>(std::lround(d / d_max * pw)); };
  auto py = [&](double v) { return top + static_cast<int>(std::lround((1.0 - v) * ph)); };
  cv::rectangle(img, {left, top}, {left + pw, top + ph}, cv::Scalar(0, 0, 0), 1);
  for (int t = 0; t <= 4; ++t) {
    const int d = static_cast<int>(std::lround(static_cast<double>(d_max) * t / 4));
    cv::putText(img, std::to_string(d), {px(d) - 6, top + ph + 16}, cv::FONT_HERSHEY_PLAIN, 1.0, {0, 0, 0}, 1);
  }
  cv::putText(img, "disparity (px)", {left + pw / 2 - 50, H - 6}, cv::FONT_HERSHEY_PLAIN, 1.0, {0, 0, 0}, 1);
  cv::putText(img, "normalised cost", {4, top - 8}, cv::FONT_HERSHEY_PLAIN, 1.0, {0, 0, 0}, 1);
  std::optional<double> gt;
  int legend_x = left + 250;
  for (std::size_t i : members) {
    const CostCurve& c = curves[i];
    const auto [lo, hi] = std::minmax_element(c.costs.begin(), c.costs.end());
    const double range = *hi - *lo;
    std::vector<cv::Point> pts;
    for (std::size_t j = 0; j < c.costs.size(); ++j)
      pts.emplace_back(px(c.candidates[j]), py(range > 0.0 ? (c.costs[j] - *lo) / range : 0.0));
    cv::polylines(img, pts, false, metric_color(c.metric), 2, cv::LINE_8);
    dashed_vline(img, px(stats[i].argmin_disparity), top, top + ph, metric_color(c.metric));
    if (stats[i].gt_disparity) gt = stats[i].gt_disparity;
    cv::putText(img, to_string(c.metric), {legend_x, 18}, cv::FONT_HERSHEY_PLAIN, 1.0, metric_color(c.metric), 1);
    legend_x += 110;
  }
  if (gt) {
    dashed_vline(img, px(*gt), top, top + ph, cv::Scalar(0, 0, 0));
    cv::putText(img, "gt", {legend_x, 18}, cv::FONT_HERSHEY_PLAIN, 1.0, {0, 0, 0}, 1);
  }
  const CostCurve& first = curves[members.front()];
  cv::putText(img, first.sample_id + " (" + std::to_string(first.pixel.x) + ", " + std::to_string(first.pixel.y) + ")",
              {4, 18}, cv::FONT_HERSHEY_PLAIN, 1.0, {0, 0, 0}, 1);
  if (!cv::imwrite(path.string(), img)) throw IoError("cannot write " + path.string());
}

}  // namespace

std::vector<std::filesystem::path> emit_report(std::span<const CostCurve> curves, std::span<const CurveStats> stats,
                                               const std::filesystem::path& out_dir) {
  if (curves.empty()) throw ContractError("emit_report: no curves");
  if (curves.size() != stats.size()) throw ContractError("emit_report: curves and stats differ in length");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;

  const auto curves_path = out_dir / "curves.csv";
  std::ofstream cf(curves_path);
  if (!cf) throw IoError("cannot write " + curves_path.string());
  cf << "sample_id,x,y,metric,level,d,cost\n";
  for (const auto& c : curves)
    for (std::size_t j = 0; j < c.costs.size(); ++j)
      cf << c.sample_id << ',' << c.pixel.x << ',' << c.pixel.y << ',' << to_string(c.metric) << ',' << c.level << ','
         << c.candidates[j] << ',' << fmt(c.costs[j]) << '\n';
  if (!cf.flush()) throw IoError("failed writing " + curves_path.string());
  written.push_back(curves_path);

  const auto stats_path = out_dir / "stats.csv";
  std::ofstream sf(stats_path);
  if (!sf) throw IoError("cannot write " + stats_path.string());
  sf << "sample_id,x,y,metric,entropy,argmin,basin_width,cost_at_gt,gt\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto& c = curves[i];
    const auto& s = stats[i];
    sf << c.sample_id << ',' << c.pixel.x << ',' << c.pixel.y << ',' << to_string(c.metric) << ',' << fmt(s.entropy)
       << ',' << s.argmin_disparity << ',' << s.basin_width << ',' << (s.cost_at_gt ? fmt(*s.cost_at_gt) : "") << ','
       << (s.gt_disparity ? fmt(*s.gt_disparity) : "") << '\n';
  }
  if (!sf.flush()) throw IoError("failed writing " + stats_path.string());
  written.push_back(stats_path);

  std::vector<std::pair<std::tuple<std::string, int, int>, std::vector<std::size_t>>> groups;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const auto key = std::make_tuple(curves[i].sample_id, curves[i].pixel.x, curves[i].pixel.y);
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) groups.push_back({key, {i}});
    else it->second.push_back(i);
  }
  for (const auto& [key, members] : groups) {
    const auto path = out_dir / ("plot_" + safe_name(std::get<0>(key)) + "_" + std::to_string(std::get<1>(key)) + "_" +
                                 std::to_string(std::get<2>(key)) + ".png");
    plot_group(members, curves, stats, path);
    written.push_back(path);
  }
  return written;
}

}  // namespace semistereo::analysis
