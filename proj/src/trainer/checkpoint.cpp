#include <sstream>

#include "semistereo/error.hpp"
#include "semistereo/model/container.hpp"
#include "semistereo/trainer/trainer.hpp"

namespace semistereo::trainer {

namespace {

const std::string kParam = "param/";
const std::string kMoment1 = "adam_m/";
const std::string kMoment2 = "adam_v/";
const std::string kConfig = "config.";

}  // namespace

void save_checkpoint(const CheckpointRecord& record, const std::filesystem::path& path) {
  model::Container c;
  c.kind = "checkpoint";
  c.meta.emplace_back("checkpoint_version", std::to_string(kCheckpointVersion));
  c.meta.emplace_back("step", std::to_string(record.state.step));
  c.meta.emplace_back("epoch", std::to_string(record.state.epoch));
  c.meta.emplace_back("adam_t", std::to_string(record.state.adam.t));
  std::ostringstream rng;
  rng << record.state.rng;
  c.meta.emplace_back("rng", rng.str());
  std::istringstream config(format_train_config(record.config));
  for (std::string line; std::getline(config, line);) {
    const auto eq = line.find(" = ");
    c.meta.emplace_back(kConfig + line.substr(0, eq), line.substr(eq + 3));
  }
  for (const auto& [name, t] : record.state.params) c.tensors.emplace_back(kParam + name, t);
  for (const auto& [name, t] : record.state.adam.m) c.tensors.emplace_back(kMoment1 + name, t);
  for (const auto& [name, t] : record.state.adam.v) c.tensors.emplace_back(kMoment2 + name, t);
  model::write_container(path, c);
}

CheckpointRecord load_checkpoint(const std::filesystem::path& path) {
  const model::Container c = model::read_container(path, "checkpoint");
  if (c.meta_value("checkpoint_version") != std::to_string(kCheckpointVersion))
    throw VersionError("checkpoint " + path.string() + ": unsupported checkpoint_version " +
                       c.meta_value("checkpoint_version"));
  CheckpointRecord r;
  try {
    r.state.step = std::stoll(c.meta_value("step"));
    r.state.epoch = std::stoi(c.meta_value("epoch"));
    r.state.adam.t = std::stoll(c.meta_value("adam_t"));
  } catch (const std::logic_error&) {
    throw FormatError("checkpoint " + path.string() + ": malformed counters");
  }
  std::istringstream rng(c.meta_value("rng"));
  rng >> r.state.rng;
  if (!rng) throw FormatError("checkpoint " + path.string() + ": malformed rng state");
  std::string config_text;
  for (const auto& [k, v] : c.meta)
    if (k.rfind(kConfig, 0) == 0) config_text += k.substr(kConfig.size()) + " = " + v + "\n";
  r.config = parse_train_config(config_text);
  for (const auto& [name, t] : c.tensors) {
    if (name.rfind(kParam, 0) == 0) r.state.params.add(name.substr(kParam.size()), t);
    else if (name.rfind(kMoment1, 0) == 0) r.state.adam.m.add(name.substr(kMoment1.size()), t);
    else if (name.rfind(kMoment2, 0) == 0) r.state.adam.v.add(name.substr(kMoment2.size()), t);
    else throw FormatError("checkpoint " + path.string() + ": unexpected tensor " + name);
  }
  if (!r.state.params.same_layout(r.state.adam.m) || !r.state.params.same_layout(r.state.adam.v))
    throw FormatError("checkpoint " + path.string() + ": optimizer moments do not match parameters");
  return r;
}

}  // namespace semistereo::trainer
