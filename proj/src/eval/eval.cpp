#include "semistereo/eval/eval.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "semistereo/error.hpp"
#include "semistereo/model/network.hpp"

namespace semistereo::eval {

double epe(const Tensor& pred, const Tensor& gt, const Mask& valid) {
  if (!pred.same_shape(gt)) throw ShapeError("epe: prediction " + pred.shape_string() + " vs gt " + gt.shape_string());
  if (pred.channels() != 1 || valid.height() != pred.height() || valid.width() != pred.width())
    throw ShapeError("epe: expected 1 x H x W maps and an H x W mask");
  double sum = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < pred.height(); ++y)
    for (int x = 0; x < pred.width(); ++x)
      if (valid(y, x)) {
        sum += std::abs(pred(0, y, x) - gt(0, y, x));
        ++n;
      }
  if (n == 0) throw InsufficientDataError("epe: no valid pixels");
  return sum / static_cast<double>(n);
}

double aggregate(std::span<const SampleResult> results) {
  if (results.empty()) throw InsufficientDataError("epe aggregate: no samples");
  double sum = 0.0;
  for (const auto& r : results) sum += r.epe;
  return sum / static_cast<double>(results.size());
}

Tensor predict_disparity(const model::ParameterSet& params, const data::StereoSample& sample,
                         const model::ModelConfig& config) {
  const model::NetworkOutput out = model::forward(params, sample.left, sample.right, config);
  return model::upsample_to_full(out.disparity.back(), sample.height(), sample.width());
}

EvalReport evaluate_dataset(const model::ParameterSet& params, std::span<const data::StereoSample> samples,
                            const model::ModelConfig& config) {
  if (samples.empty()) throw InsufficientDataError("evaluate_dataset: no samples");
  EvalReport report;
  for (const auto& s : samples) {
    if (!s.gt_disparity) throw ContractError("evaluate_dataset: sample " + s.id + " has no ground-truth disparity");
    const Mask valid = s.gt_valid ? *s.gt_valid : Mask(s.height(), s.width(), true);
    if (!valid.any()) {
      report.excluded.push_back(s.id);
      continue;
    }
    const Tensor pred = predict_disparity(params, s, config);
    report.per_sample.push_back({s.id, epe(pred, *s.gt_disparity, valid), valid.count()});
  }
  report.n_samples = report.per_sample.size();
  report.aggregate_epe = aggregate(report.per_sample);
  return report;
}

void write_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,epe,n_valid\n" << std::setprecision(17);
  for (const auto& r : report.per_sample) out << r.id << ',' << r.epe << ',' << r.n_valid << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::string to_text(const EvalReport& report) {
  std::ostringstream s;
  s << std::setprecision(6);
  s << "samples " << report.n_samples << "\n";
  s << "aggregate_epe " << report.aggregate_epe << "\n";
  for (const auto& id : report.excluded) s << "excluded " << id << " (no valid pixels)\n";
  return s.str();
}

}  // namespace semistereo::eval
