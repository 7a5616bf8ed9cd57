#pragma once

#include <cstddef>
#include <span>
#include <string_view>

#include <Eigen/Dense>

#include "hc/detector/model.hpp"
#include "hc/features/cohort.hpp"

namespace hc::detector {

enum class Granularity { Frame, Subject };

std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view text);

/// Positive class is Hypomimia.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const Confusion&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double ppv = 0.0;
  double tpr = 0.0;
  double f1 = 0.0;
  Confusion confusion;
  Granularity granularity = Granularity::Frame;
  // A ratio with a zero denominator is reported as 0 and flagged here.
  bool ppv_undefined = false;
  bool tpr_undefined = false;
  bool f1_undefined = false;
};

Metrics metrics_from_confusion(const Confusion& c, Granularity granularity);

/// Scores externally produced predictions (e.g. baseline classifiers).
Metrics evaluate_predictions(std::span<const features::Label> truth,
                             std::span<const features::Label> predicted, Granularity granularity);

struct SubjectDecision {
  features::Label label = features::Label::Healthy;
  double probability = 0.0;  // mean hypomimia probability
};

/// Mean of per-frame hypomimia probabilities; Hypomimia iff mean > 0.5.
SubjectDecision decide_from_probabilities(std::span<const double> frame_probabilities);

SubjectDecision classify_subject(const DetectionModel& model,
                                 std::span<const Eigen::VectorXd> frame_features);

Metrics evaluate(const DetectionModel& model, std::span<const features::LabeledSubject> subjects,
                 Granularity granularity,
                 features::FrameSelection selection = features::FrameSelection::Smile);

}  // namespace hc::detector
