#include <CLI11.hpp>
#include <iostream>

#include "semistereo/cli/commands.hpp"

namespace cli = semistereo::cli;

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised stereo disparity toolkit"};
  app.require_subcommand(1);

  cli::GenToyOptions gen;
  auto* g = app.add_subcommand("gen-toy", "Write procedural toy stereo pairs with exact ground truth");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--count", gen.count, "Number of samples")->capture_default_str();
  g->add_option("--seed", gen.seed, "Seed of the first sample")->capture_default_str();
  g->add_option("--width", gen.width)->capture_default_str();
  g->add_option("--height", gen.height)->capture_default_str();
  g->add_option("--layers", gen.layers)->capture_default_str();
  g->add_option("--dmin", gen.dmin)->capture_default_str();
  g->add_option("--dmax", gen.dmax)->capture_default_str();
  g->add_option("--texture", gen.texture, "noise | gradient | checker")->capture_default_str();
  g->add_option("--texture-scale", gen.texture_scale)->capture_default_str();
  g->add_option("--domain", gen.domain, "synthetic | real")->capture_default_str();

  cli::TrainOptions train;
  std::string resume;
  auto* t = app.add_subcommand("train", "Alternating supervised / self-supervised training");
  t->add_option("--config", train.config, "key = value TrainConfig file")->required();
  t->add_option("--synthetic", train.synthetic, "Labelled synthetic pool")->required();
  t->add_option("--real", train.real, "Unlabelled real pool")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--resume", resume, "Checkpoint to continue from");

  cli::EvalOptions ev;
  auto* e = app.add_subcommand("eval", "End-point error of a checkpoint on a dataset");
  e->add_option("--ckpt", ev.ckpt, "Checkpoint or parameter file")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--out", ev.out, "CSV output (id,epe,n_valid)")->required();

  cli::AnalyzeOptions an;
  std::string ckpt;
  auto* a = app.add_subcommand("analyze", "Matching-cost curves, entropy and basin width");
  a->add_option("--ckpt", ckpt, "Checkpoint (needed for feature metrics)");
  a->add_option("--sample", an.sample, "Sample directory")->required();
  a->add_option("--pixels", an.pixels, "\"x,y;x,y\"")->required();
  a->add_option("--metrics", an.metrics, "photometric,cosine,l1,l2")->capture_default_str();
  a->add_option("--max-disp", an.max_disp, "Largest candidate disparity")->capture_default_str();
  a->add_option("--out", an.out, "Output directory")->required();
  a->add_option("--level", an.level, "Feature stride for feature metrics (2, 4, 8)")->capture_default_str();
  a->add_option("--patch-radius", an.patch_radius)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  cli::CommandResult result;
  if (*g) {
    result = cli::cmd_gen_toy(gen);
  } else if (*t) {
    if (!resume.empty()) train.resume = resume;
    result = cli::cmd_train(train);
  } else if (*e) {
    result = cli::cmd_eval(ev);
  } else {
    if (!ckpt.empty()) an.ckpt = ckpt;
    result = cli::cmd_analyze(an);
  }
  if (result.exit_code == 0) std::cout << result.message << (result.message.ends_with('\n') ? "" : "\n");
  else std::cerr << "error: " << result.message << '\n';
  return result.exit_code;
}
