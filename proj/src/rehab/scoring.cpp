#include "hc/rehab/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hc::rehab {

std::string_view to_string(FeedbackLevel level) {
  switch (level) {
    case FeedbackLevel::Perfect: return "perfect";
    case FeedbackLevel::Good: return "good";
    case FeedbackLevel::ComeOn: return "come_on";
  }
  return "unknown";
}

FeedbackLevel level_from_string(std::string_view text) {
  for (FeedbackLevel l : {FeedbackLevel::ComeOn, FeedbackLevel::Good, FeedbackLevel::Perfect})
    if (to_string(l) == text) return l;
  throw std::invalid_argument("unknown feedback level '" + std::string(text) + "'");
}

FeedbackLevel feedback_level(double aggregate) {
  if (!(aggregate >= 0.0 && aggregate <= 1.0))
    throw std::out_of_range("feedback aggregate must be in [0,1]");
  if (aggregate >= kPerfectThreshold) return FeedbackLevel::Perfect;
  if (aggregate >= kGoodThreshold) return FeedbackLevel::Good;
  return FeedbackLevel::ComeOn;
}

NeutralBaseline capture_baseline(std::span<const features::AUFrame> frames, std::size_t min_frames) {
  if (frames.size() < std::max<std::size_t>(min_frames, 1))
    throw std::invalid_argument("baseline needs at least " + std::to_string(min_frames) +
                                " frames, got " + std::to_string(frames.size()));
  std::map<std::string, std::vector<double>> samples;
  for (const auto& f : frames)
    for (const auto& [au, v] : f.intensities) samples[au].push_back(v);

  NeutralBaseline baseline;
  baseline.capture_frame_count = frames.size();
  for (auto& [au, values] : samples) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    baseline.values[au] = n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  }
  return baseline;
}

FrameScore score_frame(const ExerciseSpec& exercise, const NeutralBaseline& baseline,
                       const features::AUFrame& frame, double difficulty_scale) {
  if (!(difficulty_scale > 0.0)) throw std::invalid_argument("difficulty scale must be > 0");
  FrameScore score;
  double sum = 0.0;
  for (const auto& [au, target] : exercise.targets) {
    auto cur = frame.intensities.find(au);
    if (cur == frame.intensities.end()) throw MissingAUError(au);
    auto base = baseline.values.find(au);
    if (base == baseline.values.end()) throw MissingAUError(au);
    const double ratio =
        std::clamp((cur->second - base->second) / (target * difficulty_scale), 0.0, 1.0);
    score.ratios.emplace(au, ratio);
    sum += ratio;
  }
  score.aggregate = sum / static_cast<double>(exercise.targets.size());
  score.level = feedback_level(score.aggregate);
  return score;
}

}  // namespace hc::rehab
