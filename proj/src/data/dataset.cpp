#include "semistereo/data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>

#include "semistereo/data/image_io.hpp"
#include "semistereo/data/pfm.hpp"
#include "semistereo/error.hpp"

namespace semistereo::data {

namespace fs = std::filesystem;

void write_toy_sample(const fs::path& root, const StereoSample& sample, const ToySceneSpec& spec,
                      std::uint64_t seed) {
  const fs::path dir = root / sample.id;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_image(dir / "left.png", sample.left);
  write_image(dir / "right.png", sample.right);
  if (sample.gt_disparity) write_pfm(dir / "disp.pfm", *sample.gt_disparity);
  if (sample.gt_occlusion) write_mask(dir / "occ.png", *sample.gt_occlusion);

  nlohmann::ordered_json meta;
  meta["id"] = sample.id;
  meta["domain"] = to_string(sample.domain);
  meta["seed"] = seed;
  meta["spec"] = {{"width", spec.width},           {"height", spec.height},
                  {"n_layers", spec.n_layers},     {"d_min", spec.d_min},
                  {"d_max", spec.d_max},           {"texture", to_string(spec.texture)},
                  {"texture_scale", spec.texture_scale}};
  std::ofstream out(dir / "meta.json");
  if (!out) throw IoError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(2) << '\n';
}

StereoSample load_sample(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a sample directory: " + dir.string());
  StereoSample s;
  s.id = dir.filename().string();
  s.left = read_image(dir / "left.png");
  s.right = read_image(dir / "right.png");
  if (fs::exists(dir / "disp.pfm")) {
    s.gt_disparity = read_pfm(dir / "disp.pfm");
    s.gt_valid = Mask(s.gt_disparity->height(), s.gt_disparity->width(), true);
  } else if (fs::exists(dir / "disp.png")) {
    auto [d, valid] = read_disparity_png16(dir / "disp.png");
    s.gt_disparity = std::move(d);
    s.gt_valid = std::move(valid);
  }
  if (fs::exists(dir / "occ.png")) s.gt_occlusion = read_mask(dir / "occ.png");
  if (fs::exists(dir / "meta.json")) {
    std::ifstream in(dir / "meta.json");
    try {
      const auto meta = nlohmann::json::parse(in);
      if (meta.contains("domain")) s.domain = parse_domain(meta.at("domain").get<std::string>());
      if (meta.contains("id")) s.id = meta.at("id").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("bad meta.json in " + dir.string() + ": " + e.what());
    }
  }
  s.validate();
  return s;
}

std::vector<StereoSample> load_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "left.png")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<StereoSample> out;
  out.reserve(dirs.size());
  for (const auto& d : dirs) out.push_back(load_sample(d));
  return out;
}

}  // namespace semistereo::data
