#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "semistereo/model/parameters.hpp"

namespace semistereo::model {

/// Self-describing tensor container shared by parameter files and training
/// checkpoints: a text manifest followed by a raw little-endian payload.
///
///   semistereo-container 1
///   kind <kind>
///   meta <key> <value to end of line>
///   tensor <name> <f64|f32> <rank> <dims...> <byte offset> <byte count>
///   payload <total bytes>
///   <payload bytes>
struct Container {
  std::string kind;
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const std::string& meta_value(const std::string& key) const;  // throws FormatError
  bool has_meta(const std::string& key) const;
};

inline constexpr int kContainerVersion = 1;

void write_container(const std::filesystem::path& path, const Container& c);
/// An empty expected_kind accepts any kind. Throws VersionError for an
/// unknown format version or unexpected kind and
/// FormatError for malformed or truncated content. Nothing is returned on error.
Container read_container(const std::filesystem::path& path, const std::string& expected_kind);

}  // namespace semistereo::model
