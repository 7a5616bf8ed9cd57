#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hc/features/au_frame.hpp"
#include "hc/rehab/catalog.hpp"

namespace hc::rehab {

inline constexpr double kPerfectThreshold = 0.75;
inline constexpr double kGoodThreshold = 0.35;
inline constexpr std::size_t kMinBaselineFrames = 10;

/// Ordered: ComeOn < Good < Perfect.
enum class FeedbackLevel { ComeOn = 0, Good = 1, Perfect = 2 };

std::string_view to_string(FeedbackLevel level);
FeedbackLevel level_from_string(std::string_view text);

/// Boundary-inclusive thresholds; throws std::out_of_range outside [0,1].
FeedbackLevel feedback_level(double aggregate);

struct NeutralBaseline {
  std::map<std::string, double> values;  // per-AU median
  std::size_t capture_frame_count = 0;
};

class MissingAUError : public std::invalid_argument {
 public:
  explicit MissingAUError(const std::string& au)
      : std::invalid_argument("frame or baseline lacks target AU " + au), au_(au) {}
  const std::string& au() const noexcept { return au_; }

 private:
  std::string au_;
};

/// Per-AU median over the capture window (mean of the middle two for even counts).
NeutralBaseline capture_baseline(std::span<const features::AUFrame> frames,
                                 std::size_t min_frames = kMinBaselineFrames);

struct FrameScore {
  std::map<std::string, double> ratios;
  double aggregate = 0.0;
  FeedbackLevel level = FeedbackLevel::ComeOn;
};

/// ratio = clamp((current - baseline) / (target * difficulty_scale), 0, 1),
/// aggregate = mean ratio over the exercise's target AUs.
FrameScore score_frame(const ExerciseSpec& exercise, const NeutralBaseline& baseline,
                       const features::AUFrame& frame, double difficulty_scale = 1.0);

}  // namespace hc::rehab
