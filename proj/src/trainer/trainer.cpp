#include "semistereo/trainer/trainer.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

#include "semistereo/error.hpp"
#include "semistereo/model/network.hpp"
#include "semistereo/occlusion/occlusion.hpp"

namespace semistereo::trainer {

namespace {

using recon::LossReport;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Per-name running means of the per-sample loss breakdowns of one batch.
struct BatchAccumulator {
  std::vector<std::string> order;
  std::map<std::string, double> value;
  std::map<std::string, double> weight;
  std::map<std::string, std::vector<double>> per_scale;
  std::map<std::string, std::size_t> n_valid;
  std::vector<std::pair<ag::Var, double>> terms;
  int batch = 1;

  void add(const std::string& name, const recon::ScaledLoss& loss, double w) {
    if (!value.count(name)) {
      order.push_back(name);
      value[name] = 0.0;
      weight[name] = w;
      per_scale[name].assign(loss.per_scale.size(), 0.0);
      n_valid[name] = 0;
    }
    const double inv = 1.0 / batch;
    value[name] += loss.value.value().item() * inv;
    for (std::size_t i = 0; i < loss.per_scale.size(); ++i) per_scale[name][i] += loss.per_scale[i] * inv;
    for (std::size_t n : loss.n_valid) n_valid[name] += n;
    terms.emplace_back(loss.value, w * inv);
  }

  LossReport report() const {
    LossReport r;
    for (const auto& name : order) {
      r.add(name, value.at(name), weight.at(name));
      r.per_scale[name] = per_scale.at(name);
      r.n_valid_pixels[name] = n_valid.at(name);
    }
    return r;
  }
};

std::array<double, 3> feature_variance(const model::NetworkGraph& g) {
  std::array<double, 3> out{};
  for (std::size_t k = 0; k < 3; ++k) {
    const Tensor& f = g.features_left[k].value();
    const std::size_t hw = static_cast<std::size_t>(f.height()) * f.width();
    double total = 0.0;
    for (int c = 0; c < f.channels(); ++c) {
      const double* p = f.data() + c * hw;
      double mean = 0.0;
      for (std::size_t i = 0; i < hw; ++i) mean += p[i];
      mean /= static_cast<double>(hw);
      double var = 0.0;
      for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
      total += var / static_cast<double>(hw);
    }
    out[k] = total / f.channels();
  }
  return out;
}

struct StepOutcome {
  LossReport report;
  std::array<double, 3> feature_variance{};
  double grad_norm = 0.0;
};

template <typename BuildLoss>
StepOutcome run_update(TrainState& state, std::span<const data::StereoSample> batch, const TrainConfig& config,
                       BuildLoss&& build_loss) {
  if (batch.empty()) throw ContractError("training step: empty batch");
  StepOutcome out;
  ++state.step;
  ag::Tape tape;
  const model::BoundParameters bound = model::bind(tape, state.params, true);
  BatchAccumulator acc;
  acc.batch = static_cast<int>(batch.size());
  try {
    for (const data::StereoSample& sample : batch) {
      const model::NetworkGraph g = build_loss(tape, bound, sample, acc);
      const auto fv = feature_variance(g);
      for (std::size_t k = 0; k < 3; ++k) out.feature_variance[k] += fv[k] / static_cast<double>(batch.size());
    }
  } catch (const DegenerateBatchError& e) {
    out.report.skipped = true;
    out.report.skip_reason = e.what();
    return out;
  }
  out.report = acc.report();
  tape.backward(ag::weighted_sum(acc.terms));
  const model::ParameterSet grads = model::collect_gradients(tape, bound);
  out.grad_norm = adam_update(state.params, state.adam, grads, config.optimizer);
  return out;
}

StepOutcome supervised_update(TrainState& state, std::span<const data::StereoSample> batch,
                              const TrainConfig& config) {
  return run_update(state, batch, config,
                    [&](ag::Tape& tape, const model::BoundParameters& bound, const data::StereoSample& sample,
                        BatchAccumulator& acc) {
                      if (!sample.gt_disparity) throw ContractError("supervised step: sample " + sample.id + " has no gt");
                      const int h = sample.height(), w = sample.width();
                      const model::NetworkGraph g = model::forward(tape, bound, tape.constant(sample.left),
                                                                   tape.constant(sample.right), config.model);
                      const Mask valid = sample.gt_valid ? *sample.gt_valid : Mask(h, w, true);
                      acc.add("supervised_disparity",
                              recon::supervised_disparity_loss(g.disparity, *sample.gt_disparity, valid),
                              config.supervised_weight);
                      acc.add("occlusion_bce",
                              recon::occlusion_loss(g.occlusion_logits, occlusion::occlusion_target(sample),
                                                    Mask(h, w, true)),
                              config.occlusion_weight);
                      return g;
                    });
}

StepOutcome selfsup_update(TrainState& state, std::span<const data::StereoSample> batch, const TrainConfig& config) {
  return run_update(
      state, batch, config,
      [&](ag::Tape& tape, const model::BoundParameters& bound, const data::StereoSample& labelled,
          BatchAccumulator& acc) {
        data::StereoSample sample = data::strip_labels(labelled);
        std::optional<Mask> occluder;
        if (config.occluder_augmentation) {
          auto [augmented, footprint] = occlusion::add_synthetic_occluder(sample, state.rng);
          sample = std::move(augmented);
          occluder = std::move(footprint);
        }
        const int h = sample.height(), w = sample.width();
        const ag::Var left = tape.constant(sample.left);
        const ag::Var right = tape.constant(sample.right);
        const model::NetworkGraph g = model::forward(tape, bound, left, right, config.model);
        Mask mask = recon::mask_from_occlusion(g.occlusion_logits.back().value(), h, w, config.occlusion_threshold);
        const ag::Var disp = model::upsample_to_full(g.disparity.back(), h, w);
        if (occluder) mask = mask & ~*occluder & ~occlusion::matches_into(*occluder, disp.value());
        if (config.loss_mode == LossMode::PH) {
          acc.add("photometric", recon::photometric_loss(left, right, disp, mask), config.selfsup_weight);
        } else {
          std::array<ag::Var, 3> fl = g.features_left, fr = g.features_right;
          if (config.dfr_stop_gradient_features)
            for (std::size_t k = 0; k < 3; ++k) {
              fl[k] = ag::detach(fl[k]);
              fr[k] = ag::detach(fr[k]);
            }
          acc.add("dfr", recon::dfr_loss(fl, fr, g.disparity.back(), mask, config.dfr_metric), config.selfsup_weight);
        }
        if (occluder)
          acc.add("occlusion_bce", recon::occlusion_loss(g.occlusion_logits, *occluder, *occluder),
                  config.occlusion_weight);
        return g;
      });
}

}  // namespace

TrainState initial_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.params = model::init_params(config.model, config.seed);
  s.adam.m = s.params.zeros_like();
  s.adam.v = s.params.zeros_like();
  s.rng.seed(mix_seed(config.seed, 0xA5A5));
  return s;
}

double adam_update(model::ParameterSet& params, AdamState& adam, const model::ParameterSet& grads,
                   const OptimizerConfig& opt) {
  if (!params.same_layout(grads) || !params.same_layout(adam.m) || !params.same_layout(adam.v))
    throw ContractError("adam_update: parameter / gradient / moment layouts differ");
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.values()) sq += v * v;
  const double norm = std::sqrt(sq);
  const double scale = (opt.grad_clip_norm > 0.0 && norm > opt.grad_clip_norm) ? opt.grad_clip_norm / norm : 1.0;
  ++adam.t;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(adam.t));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(adam.t));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = adam.m.at(name);
    Tensor& v = adam.v.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * scale;
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * gi;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * gi * gi;
      p[i] -= opt.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opt.epsilon);
    }
  }
  return norm;
}

recon::LossReport train_step_supervised(TrainState& state, std::span<const data::StereoSample> batch,
                                        const TrainConfig& config) {
  return supervised_update(state, batch, config).report;
}

recon::LossReport train_step_selfsup(TrainState& state, std::span<const data::StereoSample> batch,
                                     const TrainConfig& config) {
  return selfsup_update(state, batch, config).report;
}

std::string to_json_line(const StepRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["epoch"] = r.epoch;
  j["tag"] = std::string(1, data::tag_char(r.tag));
  j["samples"] = r.sample_ids;
  j["skipped"] = r.report.skipped;
  if (r.report.skipped) j["skip_reason"] = r.report.skip_reason;
  nlohmann::ordered_json losses = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.report.components) losses[name] = v;
  j["losses"] = losses;
  nlohmann::ordered_json weights = nlohmann::ordered_json::object();
  for (const auto& [name, v] : r.report.weights) weights[name] = v;
  j["weights"] = weights;
  j["total"] = r.report.total;
  j["per_scale"] = r.report.per_scale;
  j["n_valid_pixels"] = r.report.n_valid_pixels;
  j["feature_variance"] = r.feature_variance;
  j["grad_norm"] = r.grad_norm;
  return j.dump();
}

int steps_per_epoch(const TrainConfig& config, int n_synthetic, int n_real) {
  if (config.steps_per_epoch > 0) return config.steps_per_epoch;
  return 2 * (std::min(n_synthetic, n_real) / config.batch_size);
}

namespace {

struct EpochPlan {
  std::vector<data::BatchTag> tags;
  std::vector<std::vector<int>> indices;  // pool indices per update
};

// Both pools are subsampled to the same number of slots so the schedule is
// balanced whatever the pool sizes.
EpochPlan plan_semi_epoch(const TrainConfig& config, int epoch, int n_synthetic, int n_real, int spe) {
  const std::uint64_t seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1);
  const int slots = spe / 2 * config.batch_size;
  const std::vector<int> s_pool = data::subsample_pool(n_synthetic, slots, mix_seed(seed, 1));
  const std::vector<int> r_pool = data::subsample_pool(n_real, slots, mix_seed(seed, 2));
  const data::BatchSchedule schedule = data::schedule_epoch(slots, slots, seed, config.batch_size);
  EpochPlan plan;
  for (const auto& e : schedule.entries) {
    const auto& pool = e.tag == data::BatchTag::supervised ? s_pool : r_pool;
    std::vector<int> idx;
    for (int i : e.indices) idx.push_back(pool[static_cast<std::size_t>(i)]);
    plan.tags.push_back(e.tag);
    plan.indices.push_back(std::move(idx));
  }
  return plan;
}

EpochPlan plan_supervised_epoch(const TrainConfig& config, int epoch, int n_synthetic, int spe) {
  const std::uint64_t seed = mix_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1);
  const std::vector<int> order = data::subsample_pool(n_synthetic, spe * config.batch_size, mix_seed(seed, 1));
  EpochPlan plan;
  for (int s = 0; s < spe; ++s) {
    plan.tags.push_back(data::BatchTag::supervised);
    plan.indices.emplace_back(order.begin() + s * config.batch_size, order.begin() + (s + 1) * config.batch_size);
  }
  return plan;
}

template <typename PlanFn>
RunResult run_loop(const TrainConfig& config, std::span<const data::StereoSample> synthetic_pool,
                   std::span<const data::StereoSample> real_pool, int spe, const RunOptions& options,
                   PlanFn&& plan_epoch) {
  RunResult result;
  result.final.config = config;
  result.final.state = options.resume ? options.resume->state : initial_state(config);
  TrainState& state = result.final.state;
  if (!state.params.same_layout(model::init_params(config.model, 0)))
    throw ConfigError("resume checkpoint does not match the configured model");

  std::ofstream log;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    const auto log_path = *options.out_dir / "log.jsonl";
    log.open(log_path, options.resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    result.artifacts.push_back(log_path);
  }

  const std::int64_t total = static_cast<std::int64_t>(config.n_epochs) * spe;
  while (state.step < total) {
    const int epoch = static_cast<int>(state.step / spe);
    const EpochPlan plan = plan_epoch(epoch);
    for (auto i = static_cast<std::size_t>(state.step - static_cast<std::int64_t>(epoch) * spe); i < plan.tags.size();
         ++i) {
      const bool sup = plan.tags[i] == data::BatchTag::supervised;
      const auto& pool = sup ? synthetic_pool : real_pool;
      std::vector<data::StereoSample> batch;
      StepRecord rec;
      for (int idx : plan.indices[i]) {
        batch.push_back(pool[static_cast<std::size_t>(idx)]);
        rec.sample_ids.push_back(batch.back().id);
      }
      TrainConfig step_config = config;
      step_config.optimizer.learning_rate = learning_rate_at(config.optimizer, state.step, total);
      StepOutcome o =
          sup ? supervised_update(state, batch, step_config) : selfsup_update(state, batch, step_config);
      state.epoch = static_cast<int>(state.step / spe);
      rec.step = state.step;
      rec.epoch = epoch;
      rec.tag = plan.tags[i];
      rec.report = std::move(o.report);
      rec.feature_variance = o.feature_variance;
      rec.grad_norm = o.grad_norm;
      if (log.is_open()) log << to_json_line(rec) << '\n' << std::flush;
      if (options.on_step) options.on_step(rec);
      if (options.out_dir && config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 &&
          state.step < total) {
        const auto path = *options.out_dir / ("ckpt_" + std::to_string(state.step) + ".bin");
        save_checkpoint(result.final, path);
        result.artifacts.push_back(path);
      }
      result.log.push_back(std::move(rec));
    }
  }
  if (options.out_dir) {
    const auto path = *options.out_dir / "final.bin";
    save_checkpoint(result.final, path);
    result.artifacts.push_back(path);
  }
  return result;
}

}  // namespace

RunResult run_training(const TrainConfig& config, std::span<const data::StereoSample> synthetic_pool,
                       std::span<const data::StereoSample> real_pool, const RunOptions& options) {
  config.validate();
  if (synthetic_pool.empty() || real_pool.empty()) throw ConfigError("run_training: both pools must be non-empty");
  for (const auto& s : synthetic_pool)
    if (s.domain != data::Domain::synthetic) throw ConfigError("synthetic pool contains real sample " + s.id);
  for (const auto& s : real_pool)
    if (s.domain != data::Domain::real) throw ConfigError("real pool contains synthetic sample " + s.id);
  const int n_s = static_cast<int>(synthetic_pool.size()), n_r = static_cast<int>(real_pool.size());
  const int spe = steps_per_epoch(config, n_s, n_r);
  if (spe < 2) throw ConfigError("run_training: pools too small for one S/R pair at this batch size");
  return run_loop(config, synthetic_pool, real_pool, spe, options,
                  [&](int epoch) { return plan_semi_epoch(config, epoch, n_s, n_r, spe); });
}

RunResult run_supervised(const TrainConfig& config, std::span<const data::StereoSample> synthetic_pool,
                         const RunOptions& options) {
  config.validate();
  if (synthetic_pool.empty()) throw ConfigError("run_supervised: empty pool");
  const int n_s = static_cast<int>(synthetic_pool.size());
  const int spe = config.steps_per_epoch > 0 ? config.steps_per_epoch : n_s / config.batch_size;
  if (spe < 1) throw ConfigError("run_supervised: pool smaller than one batch");
  return run_loop(config, synthetic_pool, {}, spe, options,
                  [&](int epoch) { return plan_supervised_epoch(config, epoch, n_s, spe); });
}

}  // namespace semistereo::trainer
