#include "semistereo/cli/commands.hpp"

#include <iostream>
#include <sstream>

#include "semistereo/analysis/analysis.hpp"
#include "semistereo/data/dataset.hpp"
#include "semistereo/data/toy_scene.hpp"
#include "semistereo/error.hpp"
#include "semistereo/eval/eval.hpp"
#include "semistereo/model/container.hpp"
#include "semistereo/model/network.hpp"
#include "semistereo/trainer/trainer.hpp"

namespace semistereo::cli {

CommandResult guarded(const std::function<CommandResult()>& body) {
  try {
    return body();
  } catch (const ExpectedError& e) {
    return {1, {}, e.what()};
  } catch (const std::exception& e) {
    return {2, {}, std::string("internal error: ") + e.what()};
  }
}

std::pair<model::ParameterSet, model::ModelConfig> load_model(const std::filesystem::path& path) {
  const std::string kind = model::read_container(path, "").kind;
  if (kind == "checkpoint") {
    trainer::CheckpointRecord r = trainer::load_checkpoint(path);
    return {std::move(r.state.params), r.config.model};
  }
  if (kind == "parameters") return model::load_parameters(path);
  throw FormatError(path.string() + " holds '" + kind + "', not a checkpoint or parameter file");
}

std::vector<std::pair<int, int>> parse_pixels(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ';');) {
    if (item.empty()) continue;
    std::istringstream p(item);
    int x = 0, y = 0;
    char comma = 0;
    if (!(p >> x >> comma >> y) || comma != ',' || !(p >> std::ws).eof())
      throw ConfigError("bad pixel '" + item + "' (expected x,y)");
    out.emplace_back(x, y);
  }
  if (out.empty()) throw ConfigError("no pixels given (expected \"x,y;x,y\")");
  return out;
}

CommandResult cmd_gen_toy(const GenToyOptions& o) {
  return guarded([&] {
    if (o.count < 1) throw ConfigError("--count must be >= 1");
    data::ToySceneSpec spec;
    spec.width = o.width;
    spec.height = o.height;
    spec.n_layers = o.layers;
    spec.d_min = o.dmin;
    spec.d_max = o.dmax;
    spec.texture = data::parse_texture(o.texture);
    spec.texture_scale = o.texture_scale;
    spec.validate();
    const data::Domain domain = data::parse_domain(o.domain);
    CommandResult result;
    for (int i = 0; i < o.count; ++i) {
      const std::uint64_t seed = o.seed + static_cast<std::uint64_t>(i);
      data::StereoSample s = data::generate_toy_pair(spec, seed);
      s.domain = domain;
      data::write_toy_sample(o.out, s, spec, seed);
      result.artifacts.push_back(o.out / s.id);
    }
    result.message = "wrote " + std::to_string(o.count) + " samples to " + o.out.string();
    return result;
  });
}

namespace {

std::vector<data::StereoSample> load_pool(const std::filesystem::path& dir, data::Domain domain) {
  if (!std::filesystem::is_directory(dir)) throw IoError("no such data directory: " + dir.string());
  std::vector<data::StereoSample> pool = data::load_dataset(dir);
  if (pool.empty()) throw InsufficientDataError("no samples under " + dir.string());
  for (auto& s : pool) s.domain = domain;
  return pool;
}

}  // namespace

CommandResult cmd_train(const TrainOptions& o) {
  return guarded([&] {
    trainer::TrainConfig config = trainer::load_train_config(o.config);
    if (trainer::deterministic_from_environment()) config.deterministic = true;
    const auto synthetic = load_pool(o.synthetic, data::Domain::synthetic);
    const auto real = load_pool(o.real, data::Domain::real);
    trainer::RunOptions run;
    run.out_dir = o.out;
    if (o.resume) {
      run.resume = trainer::load_checkpoint(*o.resume);
      if (!(run.resume->config.model == config.model))
        throw ConfigError("--resume checkpoint was trained with a different model config");
    }
    const trainer::RunResult r = trainer::run_training(config, synthetic, real, run);
    CommandResult result;
    result.artifacts = r.artifacts;
    result.message = "trained to step " + std::to_string(r.final.state.step) + " (" + std::to_string(r.log.size()) +
                     " new steps); checkpoint " + (o.out / "final.bin").string();
    return result;
  });
}

CommandResult cmd_eval(const EvalOptions& o) {
  return guarded([&] {
    const auto [params, config] = load_model(o.ckpt);
    if (!std::filesystem::is_directory(o.data)) throw IoError("no such data directory: " + o.data.string());
    const auto samples = data::load_dataset(o.data);
    if (samples.empty()) throw InsufficientDataError("no samples under " + o.data.string());
    for (const auto& s : samples)
      if (!s.gt_disparity) throw InsufficientDataError("sample " + s.id + " has no ground-truth disparity");
    const eval::EvalReport report = eval::evaluate_dataset(params, samples, config);
    if (o.out.has_parent_path()) std::filesystem::create_directories(o.out.parent_path());
    eval::write_csv(report, o.out);
    CommandResult result;
    result.artifacts.push_back(o.out);
    result.message = eval::to_text(report);
    return result;
  });
}

CommandResult cmd_analyze(const AnalyzeOptions& o) {
  return guarded([&] {
    const data::StereoSample sample = data::load_sample(o.sample);
    if (o.max_disp < 0 || o.max_disp >= sample.width())
      throw ConfigError("--max-disp " + std::to_string(o.max_disp) + " must be in [0, width " +
                        std::to_string(sample.width()) + ")");
    std::vector<analysis::CostMetric> metrics;
    {
      std::istringstream in(o.metrics);
      for (std::string m; std::getline(in, m, ',');)
        if (!m.empty()) metrics.push_back(analysis::parse_cost_metric(m));
    }
    if (metrics.empty()) throw ConfigError("--metrics is empty");
    std::optional<std::pair<model::ParameterSet, model::ModelConfig>> net;
    for (auto m : metrics)
      if (m != analysis::CostMetric::photometric && !net) {
        if (!o.ckpt) throw ConfigError("--ckpt is required for feature metrics");
        net = load_model(*o.ckpt);
      }
    std::optional<model::NetworkOutput> out;
    if (net) {
      model::check_input_size(sample.height(), sample.width(), net->second);
      out = model::forward(net->first, sample.left, sample.right, net->second);
    }
    analysis::CurveOptions copt;
    copt.level = o.level;
    copt.patch_radius = o.patch_radius;
    std::vector<analysis::CostCurve> curves;
    std::vector<analysis::CurveStats> stats;
    for (const auto& [x, y] : parse_pixels(o.pixels)) {
      if (x < 0 || x >= sample.width() || y < 0 || y >= sample.height())
        throw ConfigError("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside the image");
      std::optional<double> gt;
      if (sample.gt_disparity) gt = (*sample.gt_disparity)(0, y, x);
      for (auto m : metrics) {
        analysis::CostCurve c =
            m == analysis::CostMetric::photometric
                ? analysis::photometric_curve(sample, {x, y}, o.max_disp, copt)
                : analysis::feature_curve(out->features_left, out->features_right, {x, y}, sample.width(),
                                          sample.height(), o.max_disp, m, copt);
        c.sample_id = sample.id;
        stats.push_back(analysis::curve_stats(c, gt));
        curves.push_back(std::move(c));
      }
    }
    CommandResult result;
    result.artifacts = analysis::emit_report(curves, stats, o.out);
    result.message = "wrote " + std::to_string(curves.size()) + " curves to " + o.out.string();
    return result;
  });
}

}  // namespace semistereo::cli
