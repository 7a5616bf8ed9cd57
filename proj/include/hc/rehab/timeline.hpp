#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hc/rehab/catalog.hpp"

namespace hc::rehab {

inline constexpr std::int64_t kSegmentMs = 5000;
inline constexpr std::int64_t kBeatIntervalMs = 1000;

enum class Difficulty { Easy, Hard };

std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view text);
/// Multiplier on target amplitudes: Easy 0.8, Hard 1.0.
double difficulty_scale(Difficulty d);

/// Placeholder track for a region: lip -> lively, articulation -> melodious.
std::string_view opera_track_for(FacialRegion region);

struct TimelineSegment {
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;  // exclusive
  std::string exercise_id;
  FacialRegion region = FacialRegion::Eyebrow;
  std::string opera_track_id;
  std::vector<std::int64_t> beat_markers_ms;

  bool operator==(const TimelineSegment&) const = default;
};

struct AdvancedTimeline {
  std::vector<TimelineSegment> segments;
  std::int64_t duration_ms = 0;
  Difficulty difficulty = Difficulty::Hard;

  bool operator==(const AdvancedTimeline&) const = default;
};

/// Contiguous 5 s segments cycling Eyebrow -> NoseAndEye -> Lip -> Articulation,
/// exercises shuffled within each region from `seed`; the last segment is cut
/// at `duration_ms`.
AdvancedTimeline build_advanced_timeline(const ExerciseCatalog& catalog, std::int64_t duration_ms,
                                         Difficulty difficulty, std::uint64_t seed);

nlohmann::json timeline_to_json(const AdvancedTimeline& t);
AdvancedTimeline timeline_from_json(const nlohmann::json& j);

}  // namespace hc::rehab
