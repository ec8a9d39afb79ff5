#include "tagrade/ibi_detector.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "tagrade/random.hpp"

namespace tagrade {

IbiDetector::IbiDetector(FrameSpec spec, ml::SvmModel model) : spec_(spec), model_(std::move(model)) {
  spec_.validate();
  if (model_.dims() != kNumIbiFeatures) throw std::invalid_argument("IBI model must take 21 features");
}

std::vector<double> IbiDetector::frame_scores(const FeatureMatrix& features) const {
  std::vector<double> out(features.size(), 0.0);
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features.usable[i]) out[i] = model_.decision_value(features.rows[i]);
  }
  return out;
}

nlohmann::ordered_json IbiDetector::to_json() const {
  nlohmann::ordered_json j;
  j["format_version"] = 1;
  j["type"] = "ibi_detector";
  j["frame"] = {{"win_s", spec_.win_s}, {"step_s", spec_.step_s}};
  j["features"] = ibi_feature_names();
  j["svm"] = model_.to_json();
  return j;
}

IbiDetector IbiDetector::from_json(const nlohmann::json& j) {
  if (j.at("format_version").get<int>() != 1) throw std::runtime_error("ibi_detector: unsupported format_version");
  if (j.at("type").get<std::string>() != "ibi_detector") throw std::runtime_error("not an ibi_detector model");
  FrameSpec spec{j.at("frame").at("win_s").get<double>(), j.at("frame").at("step_s").get<double>()};
  return IbiDetector(spec, ml::SvmModel::from_json(j.at("svm")));
}

void append_training_frames(const FeatureMatrix& features, const SampleMask& burst, const SampleMask& interburst,
                            const std::string& subject, ml::Dataset& out) {
  const auto all_set = [](const SampleMask& m, std::size_t b, std::size_t e) {
    if (e > m.size()) return false;
    for (std::size_t i = b; i < e; ++i) {
      if (!m[i]) return false;
    }
    return true;
  };
  for (std::size_t f = 0; f < features.size(); ++f) {
    if (!features.usable[f]) continue;
    const std::size_t b = features.start[f];
    const std::size_t e = b + features.frame_len;
    int label = 0;
    if (all_set(interburst, b, e)) {
      label = 1;
    } else if (all_set(burst, b, e)) {
      label = -1;
    }
    if (label == 0) continue;
    out.x.push_row(features.rows[f]);
    out.y.push_back(label);
    out.subjects.push_back(subject);
  }
}

ml::Dataset subsample_rows(const ml::Dataset& data, std::size_t max_rows, std::uint64_t seed) {
  if (data.size() <= max_rows) return data;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(max_rows);
  std::sort(idx.begin(), idx.end());
  return data.subset(idx);
}

IbiDetector train_ibi_detector(const ml::Dataset& frames, const IbiTrainingOptions& options) {
  if (frames.x.cols() != kNumIbiFeatures) throw std::invalid_argument("IBI training frames must have 21 features");
  const ml::Dataset data = subsample_rows(frames, options.max_frames, options.seed);
  ml::SvmParams p;
  p.kernel = ml::KernelType::Linear;
  p.C = options.C;
  return IbiDetector(options.spec, ml::train_svm(data, p));
}

}  // namespace tagrade
