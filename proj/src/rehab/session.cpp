#include "hc/rehab/session.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace hc::rehab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Rejection reject(Rejection::Code code, const SessionState& s, const SessionEvent& e,
                 std::string detail) {
  return {code, s.phase, std::string(event_name(e)), std::move(detail)};
}

Rejection illegal(const SessionState& s, const SessionEvent& e) {
  return reject(Rejection::Code::IllegalEvent, s, e,
                std::string(event_name(e)) + " is not allowed in phase " +
                    std::string(to_string(s.phase)));
}

// Applies one event to `s` in place. Every check runs before the first
// mutation, so a returned Rejection means `s` was not touched.
class Transition {
 public:
  Transition(SessionState& s, const SessionEvent& e) : s_(s), e_(e) {}

  std::optional<Rejection> run() {
    return std::visit(
        Overloaded{
            [&](const events::StartBaseline&) { return on_start_baseline(); },
            [&](const events::BaselineFrame& ev) { return on_baseline_frame(ev.frame); },
            [&](const events::StartExercise& ev) { return on_start_exercise(ev.exercise_id); },
            [&](const events::InstructionDone&) { return on_instruction_done(); },
            [&](const events::Frame& ev) { return on_frame(ev.frame); },
            [&](const events::Skip&) { return on_skip(); },
            [&](const events::Abort&) { return on_abort(); },
        },
        e_);
  }

  std::vector<FeedbackEvent> take_emitted() { return std::move(emitted_); }

 private:
  bool basic() const { return s_.config.mode == Mode::Basic; }

  void emit(FeedbackKind kind, std::optional<FeedbackLevel> level, std::optional<std::int64_t> t,
            std::string exercise_id = {}, std::optional<double> score = {},
            std::optional<std::size_t> index = {}) {
    FeedbackEvent ev{s_.next_seq++, kind, level, t, std::move(exercise_id), score, index};
    s_.feedback.push_back(ev);
    emitted_.push_back(std::move(ev));
  }

  void emit_level(FeedbackLevel level, std::int64_t t, const std::string& exercise_id) {
    if (s_.last_level == level) return;
    s_.last_level = level;
    emit(FeedbackKind::LevelChanged, level, t, exercise_id);
  }

  std::optional<Rejection> check_time(std::int64_t t) const {
    if (s_.last_frame_t && t <= *s_.last_frame_t)
      return reject(Rejection::Code::NonMonotoneFrame, s_, e_,
                    "frame t_ms " + std::to_string(t) + " is not after " +
                        std::to_string(*s_.last_frame_t));
    return std::nullopt;
  }

  std::optional<Rejection> on_start_baseline() {
    if (s_.phase != Phase::Idle) return illegal(s_, e_);
    s_.phase = Phase::BaselineCapture;
    return std::nullopt;
  }

  std::optional<Rejection> on_baseline_frame(const features::AUFrame& frame) {
    if (s_.phase != Phase::BaselineCapture) return illegal(s_, e_);
    if (auto r = check_time(frame.t_ms)) return r;
    for (const auto& ex : s_.config.exercises)
      for (const auto& [au, amp] : ex.targets)
        if (!frame.intensities.count(au))
          return reject(Rejection::Code::MissingAU, s_, e_, "baseline frame lacks " + au);
    s_.last_frame_t = frame.t_ms;
    s_.baseline_frames.push_back(frame);
    return std::nullopt;
  }

  std::optional<Rejection> finish_baseline_check() const {
    if (s_.baseline_frames.size() < s_.config.min_baseline_frames)
      return reject(Rejection::Code::BaselineTooShort, s_, e_,
                    "baseline has " + std::to_string(s_.baseline_frames.size()) + " of " +
                        std::to_string(s_.config.min_baseline_frames) + " frames");
    return std::nullopt;
  }

  void finish_baseline() {
    s_.baseline = capture_baseline(s_.baseline_frames, s_.config.min_baseline_frames);
    s_.baseline_frames.clear();
    s_.baseline_frames.shrink_to_fit();
  }

  std::optional<std::size_t> plan_index(std::string_view id) const {
    for (std::size_t i = 0; i < s_.config.exercises.size(); ++i)
      if (s_.config.exercises[i].id == id) return i;
    return std::nullopt;
  }

  bool current_finished() const {
    return !s_.current_exercise || s_.exercise_done[*s_.current_exercise];
  }

  void begin_rep() {
    s_.rep_start_t.reset();
    s_.run_start_t.reset();
    s_.sustain_ms = 0.0;
    s_.rep_best = 0.0;
    s_.last_level.reset();
  }

  std::optional<Rejection> on_start_exercise(const std::string& id) {
    if (!basic()) return illegal(s_, e_);
    if (s_.phase != Phase::BaselineCapture && s_.phase != Phase::RepFeedback)
      return illegal(s_, e_);
    const auto idx = plan_index(id);
    if (!idx)
      return reject(Rejection::Code::UnknownExercise, s_, e_, "exercise " + id + " is not planned");

    if (s_.phase == Phase::BaselineCapture) {
      if (auto r = finish_baseline_check()) return r;
      if (s_.exercise_done[*idx]) return illegal(s_, e_);
      finish_baseline();
      s_.current_exercise = idx;
      s_.rep_counter = 0;
      s_.phase = Phase::Instruction;
      return std::nullopt;
    }

    // RepFeedback: continue the unfinished exercise, or pick a new one.
    if (!current_finished()) {
      if (*idx != *s_.current_exercise) return illegal(s_, e_);
      begin_rep();
      s_.phase = Phase::Exercising;
      return std::nullopt;
    }
    if (s_.exercise_done[*idx]) return illegal(s_, e_);
    s_.current_exercise = idx;
    s_.rep_counter = 0;
    s_.phase = Phase::Instruction;
    return std::nullopt;
  }

  std::optional<Rejection> on_instruction_done() {
    if (basic()) {
      if (s_.phase != Phase::Instruction) return illegal(s_, e_);
      begin_rep();
      s_.phase = Phase::Exercising;
      return std::nullopt;
    }
    if (s_.phase != Phase::BaselineCapture) return illegal(s_, e_);
    if (auto r = finish_baseline_check()) return r;
    finish_baseline();
    s_.current_segment = 0;
    s_.segment_sum = 0.0;
    s_.segment_frames = 0;
    s_.last_level.reset();
    s_.phase = Phase::SegmentActive;
    return std::nullopt;
  }

  void finish_exercise(std::int64_t t) {
    const ExerciseSpec& ex = s_.config.exercises[*s_.current_exercise];
    s_.exercise_done[*s_.current_exercise] = true;
    emit(FeedbackKind::ExerciseCompleted, std::nullopt, t, ex.id);
    if (std::all_of(s_.exercise_done.begin(), s_.exercise_done.end(), [](bool d) { return d; })) {
      s_.phase = Phase::Complete;
      emit(FeedbackKind::SessionCompleted, std::nullopt, t);
    } else {
      s_.phase = Phase::RepFeedback;
    }
  }

  void finish_rep(std::int64_t t, double score, bool timed_out) {
    const ExerciseSpec& ex = s_.config.exercises[*s_.current_exercise];
    ++s_.rep_counter;
    s_.items.push_back({ScoredItem::Kind::Rep, ex.id, ex.region, s_.rep_counter, score, timed_out});
    if (timed_out)
      emit(FeedbackKind::RepTimedOut, FeedbackLevel::ComeOn, t, ex.id, score, s_.rep_counter);
    else
      emit(FeedbackKind::RepCompleted, feedback_level(score), t, ex.id, score, s_.rep_counter);
    begin_rep();
    if (s_.rep_counter >= ex.reps)
      finish_exercise(t);
    else
      s_.phase = Phase::RepFeedback;
  }

  std::optional<Rejection> on_basic_frame(const features::AUFrame& frame) {
    const ExerciseSpec& ex = s_.config.exercises[*s_.current_exercise];
    FrameScore score;
    try {
      score = score_frame(ex, *s_.baseline, frame, 1.0);
    } catch (const MissingAUError& err) {
      return reject(Rejection::Code::MissingAU, s_, e_, err.what());
    }
    const std::int64_t t = frame.t_ms;
    s_.last_frame_t = t;
    if (!s_.rep_start_t) s_.rep_start_t = t;
    emit_level(score.level, t, ex.id);
    s_.rep_best = std::max(s_.rep_best, score.aggregate);

    if (score.level >= FeedbackLevel::Good) {
      if (!s_.run_start_t) s_.run_start_t = t;
      s_.sustain_ms = static_cast<double>(t - *s_.run_start_t);
    } else {
      s_.run_start_t.reset();
      s_.sustain_ms = 0.0;
    }

    if (s_.run_start_t && s_.sustain_ms >= static_cast<double>(ex.hold_ms))
      finish_rep(t, s_.rep_best, false);
    else if (t - *s_.rep_start_t >= ex.timeout_ms)
      finish_rep(t, 0.0, true);
    return std::nullopt;
  }

  const ExerciseSpec& segment_exercise(std::size_t seg) const {
    return *s_.config.find_exercise(s_.config.timeline->segments[seg].exercise_id);
  }

  void close_segment(std::optional<std::int64_t> t) {
    const auto& segs = s_.config.timeline->segments;
    const TimelineSegment& seg = segs[s_.current_segment];
    const double score =
        s_.segment_frames > 0 ? s_.segment_sum / static_cast<double>(s_.segment_frames) : 0.0;
    s_.items.push_back({ScoredItem::Kind::Segment, seg.exercise_id, seg.region, s_.current_segment,
                        score, false});
    emit(FeedbackKind::SegmentCompleted, feedback_level(score), t, seg.exercise_id, score,
         s_.current_segment);
    ++s_.current_segment;
    s_.segment_sum = 0.0;
    s_.segment_frames = 0;
    s_.last_level.reset();
  }

  std::optional<Rejection> on_advanced_frame(const features::AUFrame& frame) {
    const AdvancedTimeline& tl = *s_.config.timeline;
    const std::int64_t origin = s_.timeline_origin.value_or(frame.t_ms);
    const std::int64_t rel = frame.t_ms - origin;

    if (rel >= tl.duration_ms) {
      s_.last_frame_t = frame.t_ms;
      s_.timeline_origin = origin;
      while (s_.current_segment < tl.segments.size()) close_segment(frame.t_ms);
      s_.phase = Phase::Complete;
      emit(FeedbackKind::SessionCompleted, std::nullopt, frame.t_ms);
      return std::nullopt;
    }

    std::size_t seg = s_.current_segment;
    while (rel >= tl.segments[seg].end_ms) ++seg;
    const double scale = difficulty_scale(tl.difficulty);
    FrameScore score;
    try {
      score = score_frame(segment_exercise(seg), *s_.baseline, frame, scale);
    } catch (const MissingAUError& err) {
      return reject(Rejection::Code::MissingAU, s_, e_, err.what());
    }

    s_.last_frame_t = frame.t_ms;
    s_.timeline_origin = origin;
    while (s_.current_segment < seg) close_segment(frame.t_ms);
    s_.segment_sum += score.aggregate;
    ++s_.segment_frames;
    emit_level(score.level, frame.t_ms, tl.segments[seg].exercise_id);
    return std::nullopt;
  }

  std::optional<Rejection> on_frame(const features::AUFrame& frame) {
    const bool ok_phase = basic() ? s_.phase == Phase::Exercising : s_.phase == Phase::SegmentActive;
    if (!ok_phase) return illegal(s_, e_);
    if (auto r = check_time(frame.t_ms)) return r;
    return basic() ? on_basic_frame(frame) : on_advanced_frame(frame);
  }

  std::optional<Rejection> on_skip() {
    if (!basic()) return illegal(s_, e_);
    const bool ok_phase = s_.phase == Phase::Instruction || s_.phase == Phase::Exercising ||
                          (s_.phase == Phase::RepFeedback && !current_finished());
    if (!ok_phase) return illegal(s_, e_);
    begin_rep();
    finish_exercise(s_.last_frame_t.value_or(0));
    return std::nullopt;
  }

  std::optional<Rejection> on_abort() {
    if (is_terminal(s_.phase)) return illegal(s_, e_);
    if (s_.phase == Phase::SegmentActive && s_.segment_frames > 0) close_segment(s_.last_frame_t);
    s_.phase = Phase::Aborted;
    emit(FeedbackKind::SessionAborted, std::nullopt, s_.last_frame_t);
    return std::nullopt;
  }

  SessionState& s_;
  const SessionEvent& e_;
  std::vector<FeedbackEvent> emitted_;
};

}  // namespace

std::string_view to_string(Mode mode) { return mode == Mode::Advanced ? "advanced" : "basic"; }

Mode mode_from_string(std::string_view text) {
  if (text == "basic") return Mode::Basic;
  if (text == "advanced") return Mode::Advanced;
  throw std::invalid_argument("unknown mode '" + std::string(text) + "'");
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Idle: return "Idle";
    case Phase::BaselineCapture: return "BaselineCapture";
    case Phase::Instruction: return "Instruction";
    case Phase::Exercising: return "Exercising";
    case Phase::RepFeedback: return "RepFeedback";
    case Phase::SegmentActive: return "SegmentActive";
    case Phase::Complete: return "Complete";
    case Phase::Aborted: return "Aborted";
  }
  return "Unknown";
}

std::string_view event_name(const SessionEvent& event) {
  return std::visit(Overloaded{
                        [](const events::StartBaseline&) { return "StartBaseline"; },
                        [](const events::BaselineFrame&) { return "BaselineFrame"; },
                        [](const events::StartExercise&) { return "StartExercise"; },
                        [](const events::InstructionDone&) { return "InstructionDone"; },
                        [](const events::Frame&) { return "Frame"; },
                        [](const events::Skip&) { return "Skip"; },
                        [](const events::Abort&) { return "Abort"; },
                    },
                    event);
}

std::string_view to_string(FeedbackKind kind) {
  switch (kind) {
    case FeedbackKind::LevelChanged: return "LevelChanged";
    case FeedbackKind::RepCompleted: return "RepCompleted";
    case FeedbackKind::RepTimedOut: return "RepTimedOut";
    case FeedbackKind::ExerciseCompleted: return "ExerciseCompleted";
    case FeedbackKind::SegmentCompleted: return "SegmentCompleted";
    case FeedbackKind::SessionCompleted: return "SessionCompleted";
    case FeedbackKind::SessionAborted: return "SessionAborted";
  }
  return "Unknown";
}

std::string_view to_string(Rejection::Code code) {
  switch (code) {
    case Rejection::Code::IllegalEvent: return "IllegalEvent";
    case Rejection::Code::NonMonotoneFrame: return "NonMonotoneFrame";
    case Rejection::Code::MissingAU: return "MissingAU";
    case Rejection::Code::UnknownExercise: return "UnknownExercise";
    case Rejection::Code::BaselineTooShort: return "BaselineTooShort";
  }
  return "Unknown";
}

nlohmann::json feedback_to_json(const FeedbackEvent& e) {
  nlohmann::json j = {{"seq", e.seq}, {"kind", to_string(e.kind)}};
  if (e.level) j["level"] = to_string(*e.level);
  if (e.t_ms) j["t_ms"] = *e.t_ms;
  if (!e.exercise_id.empty()) j["exercise_id"] = e.exercise_id;
  if (e.score) j["score"] = *e.score;
  if (e.index) j["index"] = *e.index;
  return j;
}

void SessionConfig::validate() const {
  if (session_id.empty()) throw std::invalid_argument("session_id is empty");
  if (patient_id.empty()) throw std::invalid_argument("patient_id is empty");
  if (min_baseline_frames < 1) throw std::invalid_argument("min_baseline_frames must be >= 1");
  std::set<std::string> ids;
  for (const auto& ex : exercises) {
    ex.validate();
    if (!ids.insert(ex.id).second) throw std::invalid_argument("duplicate exercise " + ex.id);
  }
  if (mode == Mode::Basic) {
    if (exercises.empty()) throw std::invalid_argument("basic session needs at least one exercise");
    if (timeline) throw std::invalid_argument("basic session cannot carry a timeline");
  } else {
    if (!timeline || timeline->segments.empty())
      throw std::invalid_argument("advanced session needs a timeline");
    for (const auto& seg : timeline->segments)
      if (!ids.count(seg.exercise_id))
        throw std::invalid_argument("timeline references unknown exercise " + seg.exercise_id);
  }
}

const ExerciseSpec* SessionConfig::find_exercise(std::string_view id) const {
  for (const auto& ex : exercises)
    if (ex.id == id) return &ex;
  return nullptr;
}

SessionState new_session(SessionConfig config) {
  config.validate();
  SessionState s;
  s.exercise_done.assign(config.exercises.size(), false);
  s.config = std::move(config);
  return s;
}

Outcome advance_session(SessionState state, const SessionEvent& event) {
  const Phase from = state.phase;
  Transition tr(state, event);
  std::optional<Rejection> rejection = tr.run();
  Outcome out;
  if (!rejection) {
    out.feedback = tr.take_emitted();
    state.log.push_back({from, state.phase, event});
  }
  out.rejection = std::move(rejection);
  out.state = std::move(state);
  return out;
}

}  // namespace hc::rehab
