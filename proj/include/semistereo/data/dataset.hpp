#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "semistereo/data/stereo_sample.hpp"
#include "semistereo/data/toy_scene.hpp"

namespace semistereo::data {

/// Writes `<root>/<id>/{left.png,right.png,disp.pfm,occ.png,meta.json}`.
void write_toy_sample(const std::filesystem::path& root, const StereoSample& sample,
                      const ToySceneSpec& spec, std::uint64_t seed);

/// Loads one sample directory. disp.pfm / disp.png and occ.png are optional;
/// the domain is read from meta.json when present.
StereoSample load_sample(const std::filesystem::path& dir);

/// Loads every sample directory under root, sorted by id.
std::vector<StereoSample> load_dataset(const std::filesystem::path& root);

}  // namespace semistereo::data
