#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "semistereo/model/config.hpp"
#include "semistereo/model/parameters.hpp"

namespace semistereo::cli {

/// 0 success, 1 expected failure (bad config or data), 2 internal error.
struct CommandResult {
  int exit_code = 0;
  std::vector<std::filesystem::path> artifacts;
  std::string message;
};

struct GenToyOptions {
  std::filesystem::path out;
  int count = 10;
  std::uint64_t seed = 0;
  int width = 128;
  int height = 64;
  int layers = 2;
  int dmin = 2;
  int dmax = 14;
  std::string texture = "noise";
  int texture_scale = 1;
  std::string domain = "synthetic";
};

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path synthetic;
  std::filesystem::path real;
  std::filesystem::path out;
  std::optional<std::filesystem::path> resume;
};

struct EvalOptions {
  std::filesystem::path ckpt;
  std::filesystem::path data;
  std::filesystem::path out;
};

struct AnalyzeOptions {
  std::optional<std::filesystem::path> ckpt;  // required for feature metrics
  std::filesystem::path sample;
  std::string pixels;  // "x,y;x,y"
  std::string metrics = "photometric,cosine";
  int max_disp = 32;
  std::filesystem::path out;
  int level = 2;
  int patch_radius = 1;
};

/// Samples seed, seed + 1, ... written as toy_<seed>.
CommandResult cmd_gen_toy(const GenToyOptions& options);
/// Writes out/log.jsonl, out/ckpt_<step>.bin and out/final.bin.
CommandResult cmd_train(const TrainOptions& options);
/// Writes the per-sample CSV and prints the aggregate.
CommandResult cmd_eval(const EvalOptions& options);
/// Writes curves.csv, stats.csv and one plot per pixel.
CommandResult cmd_analyze(const AnalyzeOptions& options);

/// Parameters and model config from a checkpoint or a parameter file.
std::pair<model::ParameterSet, model::ModelConfig> load_model(const std::filesystem::path& path);

/// "x,y;x,y" -> pixel list. Throws ConfigError.
std::vector<std::pair<int, int>> parse_pixels(const std::string& text);

/// Runs a command body, mapping ExpectedError to exit 1 and any other
/// exception to exit 2, with the message in CommandResult::message.
CommandResult guarded(const std::function<CommandResult()>& body);

}  // namespace semistereo::cli
