#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "hc/features/au_frame.hpp"
#include "hc/rehab/catalog.hpp"
#include "hc/rehab/scoring.hpp"
#include "hc/rehab/timeline.hpp"

namespace hc::rehab {

enum class Mode { Basic, Advanced };

std::string_view to_string(Mode mode);
Mode mode_from_string(std::string_view text);

enum class Phase {
  Idle,
  BaselineCapture,
  Instruction,
  Exercising,
  RepFeedback,
  SegmentActive,
  Complete,
  Aborted,
};

std::string_view to_string(Phase phase);
inline bool is_terminal(Phase p) { return p == Phase::Complete || p == Phase::Aborted; }

namespace events {
struct StartBaseline {};
struct BaselineFrame {
  features::AUFrame frame;
};
struct StartExercise {
  std::string exercise_id;
};
struct InstructionDone {};
struct Frame {
  features::AUFrame frame;
};
struct Skip {};
struct Abort {};
}  // namespace events

using SessionEvent =
    std::variant<events::StartBaseline, events::BaselineFrame, events::StartExercise,
                 events::InstructionDone, events::Frame, events::Skip, events::Abort>;

std::string_view event_name(const SessionEvent& event);

enum class FeedbackKind {
  LevelChanged,
  RepCompleted,
  RepTimedOut,
  ExerciseCompleted,
  SegmentCompleted,
  SessionCompleted,
  SessionAborted,
};

std::string_view to_string(FeedbackKind kind);

struct FeedbackEvent {
  std::uint64_t seq = 0;  // strictly increasing within a session
  FeedbackKind kind = FeedbackKind::LevelChanged;
  std::optional<FeedbackLevel> level;
  std::optional<std::int64_t> t_ms;
  std::string exercise_id;
  std::optional<double> score;
  /// Rep number (1-based) or segment index, where meaningful.
  std::optional<std::size_t> index;

  bool operator==(const FeedbackEvent&) const = default;
};

nlohmann::json feedback_to_json(const FeedbackEvent& e);

struct SessionConfig {
  std::string session_id;
  std::string patient_id;
  Mode mode = Mode::Basic;
  std::int64_t started_at_ms = 0;
  /// Basic: the planned exercises. Advanced: every exercise the timeline uses.
  std::vector<ExerciseSpec> exercises;
  std::optional<AdvancedTimeline> timeline;
  std::size_t min_baseline_frames = kMinBaselineFrames;

  void validate() const;
  const ExerciseSpec* find_exercise(std::string_view id) const;
};

/// One scored unit of a session: a basic rep or an advanced segment.
struct ScoredItem {
  enum class Kind { Rep, Segment };
  Kind kind = Kind::Rep;
  std::string exercise_id;
  FacialRegion region = FacialRegion::Lip;
  std::size_t index = 0;  // rep number (1-based) or segment index
  double score = 0.0;
  bool timed_out = false;

  bool operator==(const ScoredItem&) const = default;
};

struct TransitionRecord {
  Phase from = Phase::Idle;
  Phase to = Phase::Idle;
  SessionEvent event;
};

struct SessionState {
  SessionConfig config;
  Phase phase = Phase::Idle;

  std::vector<features::AUFrame> baseline_frames;
  std::optional<NeutralBaseline> baseline;
  std::optional<std::int64_t> last_frame_t;
  std::optional<FeedbackLevel> last_level;

  // Basic mode
  std::optional<std::size_t> current_exercise;
  std::vector<bool> exercise_done;
  std::size_t rep_counter = 0;  // finished reps of the current exercise
  std::optional<std::int64_t> rep_start_t;
  std::optional<std::int64_t> run_start_t;  // start of the current Good-or-better run
  double sustain_ms = 0.0;
  double rep_best = 0.0;

  // Advanced mode
  std::optional<std::int64_t> timeline_origin;
  std::size_t current_segment = 0;
  double segment_sum = 0.0;
  std::size_t segment_frames = 0;

  std::vector<ScoredItem> items;
  std::vector<FeedbackEvent> feedback;
  std::uint64_t next_seq = 1;
  std::vector<TransitionRecord> log;
};

struct Rejection {
  enum class Code { IllegalEvent, NonMonotoneFrame, MissingAU, UnknownExercise, BaselineTooShort };
  Code code = Code::IllegalEvent;
  Phase phase = Phase::Idle;
  std::string event;
  std::string detail;
};

std::string_view to_string(Rejection::Code code);

struct Outcome {
  SessionState state;
  std::vector<FeedbackEvent> feedback;  // emitted by this transition, in order
  std::optional<Rejection> rejection;   // set => state is unchanged

  bool accepted() const { return !rejection.has_value(); }
};

SessionState new_session(SessionConfig config);

/// Pure transition: consumes the state, returns the successor. Rejected
/// events hand back the state untouched.
Outcome advance_session(SessionState state, const SessionEvent& event);

}  // namespace hc::rehab
