#include "semistereo/trainer/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "semistereo/error.hpp"

namespace semistereo::trainer {

std::string to_string(LossMode m) { return m == LossMode::PH ? "PH" : "DFR"; }

LossMode parse_loss_mode(const std::string& s) {
  if (s == "PH") return LossMode::PH;
  if (s == "DFR") return LossMode::DFR;
  throw ConfigError("unknown loss_mode '" + s + "' (PH|DFR)");
}

std::string to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  throw ConfigError("unknown optimizer.lr_schedule '" + s + "' (constant|cosine)");
}

double learning_rate_at(const OptimizerConfig& opt, std::int64_t step, std::int64_t total) {
  if (opt.lr_schedule == LrSchedule::constant || total <= 0) return opt.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(total);
  return opt.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void TrainConfig::validate() const {
  model.validate();
  if (!(occlusion_threshold > 0.0 && occlusion_threshold < 1.0))
    throw ConfigError("occlusion_threshold must be in (0, 1)");
  if (!(supervised_weight >= 0.0) || !(selfsup_weight >= 0.0) || !(occlusion_weight >= 0.0))
    throw ConfigError("loss weights must be >= 0");
  if (!(optimizer.learning_rate >= 0.0)) throw ConfigError("optimizer.learning_rate must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0))
    throw ConfigError("optimizer betas must be in [0, 1)");
  if (!(optimizer.epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be > 0");
  if (!(optimizer.grad_clip_norm >= 0.0)) throw ConfigError("optimizer.grad_clip_norm must be >= 0");
  if (steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be >= 0");
  if (steps_per_epoch % 2 != 0) throw ConfigError("steps_per_epoch must be even (S and R batches alternate)");
  if (n_epochs < 0) throw ConfigError("n_epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: bad value '" + v + "' for " + key);
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: bad boolean '" + v + "' for " + key + " (true|false)");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

using Setter = std::function<void(TrainConfig&, const std::string& key, const std::string& value)>;
using Getter = std::function<std::string(const TrainConfig&)>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field number_field(T TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_number<T>(k, v); },
          [member](const TrainConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return format_double(c.*member);
            else return std::to_string(c.*member);
          }};
}

Field optimizer_field(double OptimizerConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.optimizer.*member = parse_number<double>(k, v);
          },
          [member](const TrainConfig& c) { return format_double(c.optimizer.*member); }};
}

Field model_int_field(int model::ModelConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            c.model.*member = parse_number<int>(k, v);
          },
          [member](const TrainConfig& c) { return std::to_string(c.model.*member); }};
}

Field bool_field(bool TrainConfig::*member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { c.*member = parse_bool(k, v); },
          [member](const TrainConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

// Ordered as written by format_train_config.
const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"loss_mode",
       {[](TrainConfig& c, const std::string&, const std::string& v) { c.loss_mode = parse_loss_mode(v); },
        [](const TrainConfig& c) { return to_string(c.loss_mode); }}},
      {"dfr_metric",
       {[](TrainConfig& c, const std::string&, const std::string& v) {
          c.dfr_metric = recon::parse_feature_metric(v);
        },
        [](const TrainConfig& c) { return recon::to_string(c.dfr_metric); }}},
      {"dfr_stop_gradient_features", bool_field(&TrainConfig::dfr_stop_gradient_features)},
      {"occlusion_threshold", number_field(&TrainConfig::occlusion_threshold)},
      {"occluder_augmentation", bool_field(&TrainConfig::occluder_augmentation)},
      {"supervised_weight", number_field(&TrainConfig::supervised_weight)},
      {"selfsup_weight", number_field(&TrainConfig::selfsup_weight)},
      {"occlusion_weight", number_field(&TrainConfig::occlusion_weight)},
      {"optimizer.learning_rate", optimizer_field(&OptimizerConfig::learning_rate)},
      {"optimizer.beta1", optimizer_field(&OptimizerConfig::beta1)},
      {"optimizer.beta2", optimizer_field(&OptimizerConfig::beta2)},
      {"optimizer.epsilon", optimizer_field(&OptimizerConfig::epsilon)},
      {"optimizer.grad_clip_norm", optimizer_field(&OptimizerConfig::grad_clip_norm)},
      {"optimizer.lr_schedule",
       {[](TrainConfig& c, const std::string&, const std::string& v) {
          c.optimizer.lr_schedule = parse_lr_schedule(v);
        },
        [](const TrainConfig& c) { return to_string(c.optimizer.lr_schedule); }}},
      {"steps_per_epoch", number_field(&TrainConfig::steps_per_epoch)},
      {"n_epochs", number_field(&TrainConfig::n_epochs)},
      {"batch_size", number_field(&TrainConfig::batch_size)},
      {"model.base_channels", model_int_field(&model::ModelConfig::base_channels)},
      {"model.max_displacement", model_int_field(&model::ModelConfig::max_displacement)},
      {"model.n_scales", model_int_field(&model::ModelConfig::n_scales)},
      {"model.disparity_activation",
       {[](TrainConfig& c, const std::string&, const std::string& v) {
          c.model.disparity_activation = model::parse_disparity_activation(v);
        },
        [](const TrainConfig& c) { return model::to_string(c.model.disparity_activation); }}},
      {"seed", number_field(&TrainConfig::seed)},
      {"checkpoint_every", number_field(&TrainConfig::checkpoint_every)},
      {"deterministic", bool_field(&TrainConfig::deterministic)},
  };
  return table;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    const auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
    if (it == table.end()) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    it->second.set(config, key, value);
  }
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_train_config(text.str());
}

std::string format_train_config(const TrainConfig& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

bool deterministic_from_environment() {
  const char* v = std::getenv("STEREO_SEMISUP_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

}  // namespace semistereo::trainer
