#include "hc/rehab/timeline.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace hc::rehab {

std::string_view to_string(Difficulty d) { return d == Difficulty::Easy ? "easy" : "hard"; }

Difficulty difficulty_from_string(std::string_view text) {
  if (text == "easy") return Difficulty::Easy;
  if (text == "hard") return Difficulty::Hard;
  throw std::invalid_argument("unknown difficulty '" + std::string(text) + "'");
}

double difficulty_scale(Difficulty d) { return d == Difficulty::Easy ? 0.8 : 1.0; }

std::string_view opera_track_for(FacialRegion region) {
  switch (region) {
    case FacialRegion::Lip: return "opera/rolling_lantern";
    case FacialRegion::Articulation: return "opera/case_of_chen_shimei";
    case FacialRegion::Eyebrow:
    case FacialRegion::NoseAndEye: return "opera/metronome";
  }
  return "opera/metronome";
}

AdvancedTimeline build_advanced_timeline(const ExerciseCatalog& catalog, std::int64_t duration_ms,
                                         Difficulty difficulty, std::uint64_t seed) {
  if (duration_ms < kSegmentMs)
    throw std::invalid_argument("timeline duration must be at least " + std::to_string(kSegmentMs) +
                                " ms");

  std::mt19937_64 rng(seed);
  struct RegionQueue {
    FacialRegion region;
    std::vector<const ExerciseSpec*> order;
    std::size_t next = 0;
  };
  std::vector<RegionQueue> queues;
  for (FacialRegion r : kRegionCycle) {
    auto list = catalog.in_region(r);
    if (list.empty()) continue;
    std::shuffle(list.begin(), list.end(), rng);
    queues.push_back({r, std::move(list), 0});
  }
  if (queues.empty()) throw std::invalid_argument("catalog has no exercises for the timeline");

  AdvancedTimeline t;
  t.duration_ms = duration_ms;
  t.difficulty = difficulty;
  std::size_t cycle = 0;
  for (std::int64_t start = 0; start < duration_ms; start += kSegmentMs, ++cycle) {
    RegionQueue& q = queues[cycle % queues.size()];
    const ExerciseSpec* ex = q.order[q.next];
    q.next = (q.next + 1) % q.order.size();

    TimelineSegment seg;
    seg.start_ms = start;
    seg.end_ms = std::min(start + kSegmentMs, duration_ms);
    seg.exercise_id = ex->id;
    seg.region = q.region;
    seg.opera_track_id = std::string(opera_track_for(q.region));
    for (std::int64_t beat = seg.start_ms; beat < seg.end_ms; beat += kBeatIntervalMs)
      seg.beat_markers_ms.push_back(beat);
    t.segments.push_back(std::move(seg));
  }
  return t;
}

nlohmann::json timeline_to_json(const AdvancedTimeline& t) {
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : t.segments)
    segs.push_back({{"start_ms", s.start_ms},
                    {"end_ms", s.end_ms},
                    {"exercise_id", s.exercise_id},
                    {"region", to_string(s.region)},
                    {"opera_track_id", s.opera_track_id},
                    {"beat_markers_ms", s.beat_markers_ms}});
  return {{"duration_ms", t.duration_ms},
          {"difficulty", to_string(t.difficulty)},
          {"segments", std::move(segs)}};
}

AdvancedTimeline timeline_from_json(const nlohmann::json& j) {
  AdvancedTimeline t;
  t.duration_ms = j.at("duration_ms").get<std::int64_t>();
  t.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
  std::int64_t expected_start = 0;
  for (const auto& s : j.at("segments")) {
    TimelineSegment seg;
    seg.start_ms = s.at("start_ms").get<std::int64_t>();
    seg.end_ms = s.at("end_ms").get<std::int64_t>();
    seg.exercise_id = s.at("exercise_id").get<std::string>();
    seg.region = region_from_string(s.at("region").get<std::string>());
    seg.opera_track_id = s.value("opera_track_id", std::string());
    seg.beat_markers_ms = s.value("beat_markers_ms", std::vector<std::int64_t>{});
    if (seg.start_ms != expected_start || seg.end_ms <= seg.start_ms)
      throw std::invalid_argument("timeline segments must be contiguous and non-empty");
    expected_start = seg.end_ms;
    t.segments.push_back(std::move(seg));
  }
  if (t.segments.empty() || expected_start != t.duration_ms)
    throw std::invalid_argument("timeline segments must cover [0, duration)");
  return t;
}

}  // namespace hc::rehab
