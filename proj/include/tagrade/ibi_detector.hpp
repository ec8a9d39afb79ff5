#pragma once

#include <json.hpp>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tagrade/eeg_data.hpp"
#include "tagrade/ibi_features.hpp"
#include "tagrade/ml/matrix.hpp"
#include "tagrade/ml/svm.hpp"

namespace tagrade {

// Linear SVM scoring frames as inter-burst (+) or burst (-).
class IbiDetector {
 public:
  IbiDetector(FrameSpec spec, ml::SvmModel model);

  const FrameSpec& spec() const { return spec_; }
  const ml::SvmModel& model() const { return model_; }

  // Decision value per frame; unusable frames score 0.
  std::vector<double> frame_scores(const FeatureMatrix& features) const;

  nlohmann::ordered_json to_json() const;
  static IbiDetector from_json(const nlohmann::json& j);

 private:
  FrameSpec spec_;
  ml::SvmModel model_;
};

// Appends usable frames lying wholly inside one burst (-1) or inter-burst
// (+1) event.
void append_training_frames(const FeatureMatrix& features, const SampleMask& burst, const SampleMask& interburst,
                            const std::string& subject, ml::Dataset& out);

// Uniform subsample without replacement, keeping the original row order.
ml::Dataset subsample_rows(const ml::Dataset& data, std::size_t max_rows, std::uint64_t seed);

struct IbiTrainingOptions {
  FrameSpec spec;
  double C = 1.0;
  std::size_t max_frames = 3000;
  std::uint64_t seed = 0;
};

IbiDetector train_ibi_detector(const ml::Dataset& frames, const IbiTrainingOptions& options);

}  // namespace tagrade
