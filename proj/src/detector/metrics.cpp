#include "hc/detector/metrics.hpp"

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "hc/detector/network.hpp"

namespace hc::detector {

using features::Label;

std::string_view to_string(Granularity g) { return g == Granularity::Subject ? "subject" : "frame"; }

Granularity granularity_from_string(std::string_view text) {
  if (text == "frame") return Granularity::Frame;
  if (text == "subject") return Granularity::Subject;
  throw std::invalid_argument("unknown granularity '" + std::string(text) + "'");
}

Metrics metrics_from_confusion(const Confusion& c, Granularity granularity) {
  Metrics m;
  m.confusion = c;
  m.granularity = granularity;
  const auto n = static_cast<double>(c.total());
  m.accuracy = n > 0 ? static_cast<double>(c.tp + c.tn) / n : 0.0;

  const std::size_t predicted_pos = c.tp + c.fp;
  const std::size_t actual_pos = c.tp + c.fn;
  m.ppv_undefined = predicted_pos == 0;
  m.tpr_undefined = actual_pos == 0;
  m.ppv = m.ppv_undefined ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(predicted_pos);
  m.tpr = m.tpr_undefined ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(actual_pos);
  m.f1_undefined = m.ppv + m.tpr == 0.0;
  m.f1 = m.f1_undefined ? 0.0 : 2.0 * m.ppv * m.tpr / (m.ppv + m.tpr);
  return m;
}

Metrics evaluate_predictions(std::span<const Label> truth, std::span<const Label> predicted,
                             Granularity granularity) {
  if (truth.size() != predicted.size())
    throw std::invalid_argument("evaluate_predictions: length mismatch");
  if (truth.empty()) throw std::invalid_argument("evaluate_predictions: empty set");
  Confusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool actual = truth[i] == Label::Hypomimia;
    const bool guess = predicted[i] == Label::Hypomimia;
    if (actual && guess) ++c.tp;
    else if (!actual && guess) ++c.fp;
    else if (actual) ++c.fn;
    else ++c.tn;
  }
  return metrics_from_confusion(c, granularity);
}

SubjectDecision decide_from_probabilities(std::span<const double> frame_probabilities) {
  if (frame_probabilities.empty()) throw std::invalid_argument("classify_subject: no frames");
  const double mean = std::accumulate(frame_probabilities.begin(), frame_probabilities.end(), 0.0) /
                      static_cast<double>(frame_probabilities.size());
  return {mean > 0.5 ? Label::Hypomimia : Label::Healthy, mean};
}

SubjectDecision classify_subject(const DetectionModel& model,
                                 std::span<const Eigen::VectorXd> frame_features) {
  std::vector<double> probs;
  probs.reserve(frame_features.size());
  for (const auto& x : frame_features) probs.push_back(forward(model, x)(1));
  return decide_from_probabilities(probs);
}

Metrics evaluate(const DetectionModel& model, std::span<const features::LabeledSubject> subjects,
                 Granularity granularity, features::FrameSelection selection) {
  if (subjects.empty()) throw std::invalid_argument("evaluate: empty subject set");
  std::vector<Label> truth, predicted;
  for (const auto& s : subjects) {
    s.validate();
    const auto vectors = features::feature_vectors_or_embed(s, model.hp.D);
    std::vector<Eigen::VectorXd> selected;
    for (std::size_t i : features::select_frames(s, selection)) selected.push_back(vectors[i]);
    if (granularity == Granularity::Frame) {
      for (const auto& x : selected) {
        truth.push_back(s.label);
        predicted.push_back(forward(model, x)(1) > 0.5 ? Label::Hypomimia : Label::Healthy);
      }
    } else {
      truth.push_back(s.label);
      predicted.push_back(classify_subject(model, selected).label);
    }
  }
  return evaluate_predictions(truth, predicted, granularity);
}

}  // namespace hc::detector
