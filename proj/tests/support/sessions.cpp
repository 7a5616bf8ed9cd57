#include "sessions.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "hc/rehab/catalog.hpp"
#include "hc/rehab/timeline.hpp"

namespace hc::testing {

using rehab::Phase;
using Code = rehab::Rejection::Code;
namespace ev = rehab::events;

features::AUFrame make_frame(std::int64_t t_ms, std::map<std::string, double> intensities) {
  return {t_ms, std::move(intensities)};
}

rehab::SessionConfig smile_config(std::string session_id, std::string patient_id, std::int64_t started_at_ms) {
  rehab::SessionConfig c;
  c.session_id = std::move(session_id);
  c.patient_id = std::move(patient_id);
  c.mode = rehab::Mode::Basic;
  c.started_at_ms = started_at_ms;
  c.exercises.push_back(*rehab::load_exercise_catalog().find("smile"));
  return c;
}

namespace {

features::AUFrame face(std::int64_t t, double au12) {
  return make_frame(t, {{"AU6", 0.05}, {"AU12", au12}, {"AU25", 0.02}, {"AU26", 0.03}});
}

}  // namespace

std::vector<rehab::SessionEvent> golden_smile_events() {
  std::vector<rehab::SessionEvent> out;
  out.push_back(ev::StartBaseline{});
  for (int i = 0; i < 10; ++i) out.push_back(ev::BaselineFrame{face(33 * i, 0.1)});
  out.push_back(ev::StartExercise{"smile"});
  out.push_back(ev::InstructionDone{});
  // Hold 500 ms at 33 ms spacing completes on the 17th frame (16 * 33 = 528).
  for (int i = 0; i < 17; ++i) out.push_back(ev::Frame{face(1000 + 33 * i, 0.7)});
  out.push_back(ev::StartExercise{"smile"});
  for (int i = 0; i < 17; ++i) out.push_back(ev::Frame{face(2000 + 33 * i, 0.4)});
  out.push_back(ev::StartExercise{"smile"});
  // 15000 ms timeout: 455 * 33 = 15015 is the first elapsed time past it.
  for (int i = 0; i <= 455; ++i) out.push_back(ev::Frame{face(3000 + 33 * i, 0.1)});
  return out;
}

rehab::SessionState run_events(rehab::SessionState state, const std::vector<rehab::SessionEvent>& events) {
  for (std::size_t i = 0; i < events.size(); ++i) {
    auto out = rehab::advance_session(std::move(state), events[i]);
    if (!out.accepted())
      throw std::logic_error("event " + std::to_string(i) + " (" + out.rejection->event +
                             ") rejected: " + out.rejection->detail);
    state = std::move(out.state);
  }
  return state;
}

// ---- random configs

namespace {

const std::vector<std::string> kPool = {"AU1", "AU4", "AU12", "AU25"};

template <class T>
T pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool chance(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0, 1)(rng) < p; }

rehab::ExerciseSpec random_exercise(std::mt19937_64& rng, const std::string& id) {
  rehab::ExerciseSpec ex;
  ex.id = id;
  ex.region = rehab::kRegionCycle[uniform_int(rng, 0, 3)];
  const int n = uniform_int(rng, 1, 2);
  while (static_cast<int>(ex.targets.size()) < n) ex.targets[pick(rng, kPool)] = pick(rng, std::vector<double>{0.4, 0.6, 0.8});
  ex.reps = static_cast<std::uint32_t>(uniform_int(rng, 1, 3));
  ex.hold_ms = uniform_int(rng, 66, 300);
  ex.timeout_ms = ex.hold_ms + uniform_int(rng, 100, 1200);
  return ex;
}

}  // namespace

rehab::SessionConfig random_config(std::mt19937_64& rng, rehab::Mode mode, std::uint64_t index) {
  rehab::SessionConfig c;
  c.session_id = "rnd-" + std::to_string(index);
  c.patient_id = "patient-rnd";
  c.mode = mode;
  c.started_at_ms = static_cast<std::int64_t>(index);
  c.min_baseline_frames = static_cast<std::size_t>(uniform_int(rng, 1, 4));
  if (mode == rehab::Mode::Basic) {
    const int n = uniform_int(rng, 1, 3);
    for (int i = 0; i < n; ++i) c.exercises.push_back(random_exercise(rng, "ex_" + std::to_string(i)));
  } else {
    std::vector<rehab::ExerciseSpec> all;
    for (int i = 0; i < 4; ++i) all.push_back(random_exercise(rng, "ex_" + std::to_string(i)));
    const rehab::ExerciseCatalog cat(kPool, all);
    c.timeline = rehab::build_advanced_timeline(
        cat, uniform_int(rng, 5000, 12000), chance(rng, 0.5) ? rehab::Difficulty::Easy : rehab::Difficulty::Hard,
        rng());
    std::set<std::string> used;
    for (const auto& s : c.timeline->segments) used.insert(s.exercise_id);
    for (const auto& ex : all)
      if (used.count(ex.id)) c.exercises.push_back(ex);
  }
  return c;
}

// ---- reference machine

ReferenceMachine::ReferenceMachine(rehab::SessionConfig config) : config_(std::move(config)) {}

bool ReferenceMachine::has_aus(const features::AUFrame& f, const rehab::ExerciseSpec& ex) const {
  for (const auto& [au, amp] : ex.targets)
    if (!f.intensities.count(au)) return false;
  return true;
}

const rehab::ExerciseSpec* ReferenceMachine::segment_exercise_at(std::int64_t rel) const {
  for (const auto& seg : config_.timeline->segments)
    if (rel >= seg.start_ms && rel < seg.end_ms) return config_.find_exercise(seg.exercise_id);
  return nullptr;
}

bool ReferenceMachine::current_finished() const { return !current_ || done_.count(*current_); }

ReferenceMachine::Expectation ReferenceMachine::expect(Phase phase, const rehab::SessionEvent& event) const {
  const bool basic = config_.mode == rehab::Mode::Basic;
  const Expectation illegal{Code::IllegalEvent, {}};
  auto reject = [](Code c) { return Expectation{c, {}}; };
  auto accept = [](std::set<Phase> s) { return Expectation{std::nullopt, std::move(s)}; };
  auto monotone = [&](std::int64_t t) { return !last_t_ || t > *last_t_; };

  if (std::holds_alternative<ev::StartBaseline>(event))
    return phase == Phase::Idle ? accept({Phase::BaselineCapture}) : illegal;

  if (const auto* e = std::get_if<ev::BaselineFrame>(&event)) {
    if (phase != Phase::BaselineCapture) return illegal;
    if (!monotone(e->frame.t_ms)) return reject(Code::NonMonotoneFrame);
    for (const auto& ex : config_.exercises)
      if (!has_aus(e->frame, ex)) return reject(Code::MissingAU);
    return accept({Phase::BaselineCapture});
  }

  if (const auto* e = std::get_if<ev::StartExercise>(&event)) {
    if (!basic) return illegal;
    if (phase != Phase::BaselineCapture && phase != Phase::RepFeedback) return illegal;
    if (!config_.find_exercise(e->exercise_id)) return reject(Code::UnknownExercise);
    if (phase == Phase::BaselineCapture) {
      if (baseline_frames_ < config_.min_baseline_frames) return reject(Code::BaselineTooShort);
      return accept({Phase::Instruction});
    }
    if (!current_finished()) return e->exercise_id == *current_ ? accept({Phase::Exercising}) : illegal;
    return done_.count(e->exercise_id) ? illegal : accept({Phase::Instruction});
  }

  if (std::holds_alternative<ev::InstructionDone>(event)) {
    if (basic) return phase == Phase::Instruction ? accept({Phase::Exercising}) : illegal;
    if (phase != Phase::BaselineCapture) return illegal;
    if (baseline_frames_ < config_.min_baseline_frames) return reject(Code::BaselineTooShort);
    return accept({Phase::SegmentActive});
  }

  if (const auto* e = std::get_if<ev::Frame>(&event)) {
    if (basic) {
      if (phase != Phase::Exercising) return illegal;
      if (!monotone(e->frame.t_ms)) return reject(Code::NonMonotoneFrame);
      if (!has_aus(e->frame, *config_.find_exercise(*current_))) return reject(Code::MissingAU);
      return accept({Phase::Exercising, Phase::RepFeedback, Phase::Complete});
    }
    if (phase != Phase::SegmentActive) return illegal;
    if (!monotone(e->frame.t_ms)) return reject(Code::NonMonotoneFrame);
    const std::int64_t rel = e->frame.t_ms - origin_.value_or(e->frame.t_ms);
    if (rel >= config_.timeline->duration_ms) return accept({Phase::Complete});
    if (!has_aus(e->frame, *segment_exercise_at(rel))) return reject(Code::MissingAU);
    return accept({Phase::SegmentActive});
  }

  if (std::holds_alternative<ev::Skip>(event)) {
    if (!basic) return illegal;
    const bool ok = phase == Phase::Instruction || phase == Phase::Exercising ||
                    (phase == Phase::RepFeedback && !current_finished());
    if (!ok) return illegal;
    std::set<std::string> after = done_;
    after.insert(*current_);
    return accept({after.size() == config_.exercises.size() ? Phase::Complete : Phase::RepFeedback});
  }

  // Abort
  return rehab::is_terminal(phase) ? illegal : accept({Phase::Aborted});
}

void ReferenceMachine::accepted(const rehab::SessionEvent& event, Phase, Phase to,
                                const std::vector<rehab::FeedbackEvent>& emitted) {
  if (const auto* e = std::get_if<ev::BaselineFrame>(&event)) {
    last_t_ = e->frame.t_ms;
    ++baseline_frames_;
  } else if (const auto* e = std::get_if<ev::Frame>(&event)) {
    last_t_ = e->frame.t_ms;
    if (!origin_ && config_.mode == rehab::Mode::Advanced) origin_ = e->frame.t_ms;
  } else if (const auto* e = std::get_if<ev::StartExercise>(&event)) {
    if (to == Phase::Instruction) current_ = e->exercise_id;
  }
  for (const auto& f : emitted)
    if (f.kind == rehab::FeedbackKind::ExerciseCompleted) done_.insert(f.exercise_id);
}

// ---- random events

rehab::SessionEvent random_event(std::mt19937_64& rng, const rehab::SessionConfig& config, Phase phase,
                                 std::optional<std::int64_t> last_t) {
  const bool basic = config.mode == rehab::Mode::Basic;
  auto frame = [&](bool baseline) {
    std::int64_t t;
    if (!last_t) {
      t = uniform_int(rng, 0, 100);
    } else if (chance(rng, 0.04)) {
      t = *last_t - uniform_int(rng, 0, 50);
    } else {
      t = *last_t + pick(rng, std::vector<std::int64_t>{33, 66, 150, 400});
    }
    const double level = baseline ? pick(rng, std::vector<double>{0.0, 0.05, 0.1})
                                  : pick(rng, std::vector<double>{0.0, 0.1, 0.3, 0.5, 0.8, 1.0});
    std::map<std::string, double> au;
    for (const auto& code : kPool) au[code] = level;
    if (chance(rng, 0.03)) au.erase(pick(rng, kPool));
    return make_frame(t, std::move(au));
  };
  auto exercise_id = [&] {
    if (chance(rng, 0.05)) return std::string("no_such_exercise");
    return config.exercises[std::uniform_int_distribution<std::size_t>(0, config.exercises.size() - 1)(rng)].id;
  };
  auto any = [&]() -> rehab::SessionEvent {
    switch (uniform_int(rng, 0, 6)) {
      case 0: return ev::StartBaseline{};
      case 1: return ev::BaselineFrame{frame(true)};
      case 2: return ev::StartExercise{exercise_id()};
      case 3: return ev::InstructionDone{};
      case 4: return ev::Frame{frame(false)};
      case 5: return ev::Skip{};
      default: return ev::Abort{};
    }
  };

  if (chance(rng, 0.12) || rehab::is_terminal(phase)) return any();
  const double r = std::uniform_real_distribution<double>(0, 1)(rng);
  switch (phase) {
    case Phase::Idle: return ev::StartBaseline{};
    case Phase::BaselineCapture:
      if (r < 0.7) return ev::BaselineFrame{frame(true)};
      if (basic) return ev::StartExercise{exercise_id()};
      return ev::InstructionDone{};
    case Phase::Instruction:
      if (r < 0.85) return ev::InstructionDone{};
      if (r < 0.95) return ev::Skip{};
      return ev::Abort{};
    case Phase::Exercising:
      if (r < 0.94) return ev::Frame{frame(false)};
      if (r < 0.98) return ev::Skip{};
      return ev::Abort{};
    case Phase::RepFeedback:
      if (r < 0.9) return ev::StartExercise{exercise_id()};
      if (r < 0.95) return ev::Skip{};
      return ev::Abort{};
    case Phase::SegmentActive:
      if (r < 0.97) return ev::Frame{frame(false)};
      return ev::Abort{};
    default: return any();
  }
}

// ---- invariants

std::string check_step(const rehab::SessionState& before, const rehab::Outcome& out) {
  const auto& after = out.state;
  std::ostringstream err;

  if (!out.accepted()) {
    if (after.phase != before.phase || after.items != before.items ||
        after.feedback.size() != before.feedback.size() || after.last_frame_t != before.last_frame_t ||
        after.log.size() != before.log.size() || after.rep_counter != before.rep_counter ||
        after.current_segment != before.current_segment ||
        after.baseline_frames.size() != before.baseline_frames.size() ||
        after.exercise_done != before.exercise_done || after.next_seq != before.next_seq)
      err << "rejected event changed the state";
    if (!out.feedback.empty()) err << "rejected event emitted feedback";
    return err.str();
  }

  if (rehab::is_terminal(before.phase)) return "event accepted in a terminal phase";
  if (after.log.size() != before.log.size() + 1) return "transition log did not grow by one";
  if (before.last_frame_t && (!after.last_frame_t || *after.last_frame_t < *before.last_frame_t))
    return "time regression";

  // Feedback: the emitted events are exactly the appended tail, numbered consecutively.
  if (after.feedback.size() != before.feedback.size() + out.feedback.size()) return "feedback tail mismatch";
  std::uint64_t seq = before.next_seq;
  for (std::size_t i = 0; i < out.feedback.size(); ++i) {
    if (out.feedback[i].seq != seq++) return "non-consecutive feedback sequence";
    if (!(after.feedback[before.feedback.size() + i] == out.feedback[i])) return "feedback tail mismatch";
  }
  if (after.next_seq != seq) return "next_seq out of step";

  if (after.items.size() < before.items.size() ||
      !std::equal(before.items.begin(), before.items.end(), after.items.begin()))
    return "scored items were rewritten";

  std::map<std::string, std::size_t> reps;
  std::size_t segments = 0;
  for (const auto& it : after.items) {
    if (!(it.score >= 0.0 && it.score <= 1.0)) return "item score outside [0,1]";
    if (it.kind == rehab::ScoredItem::Kind::Rep) {
      const auto* ex = after.config.find_exercise(it.exercise_id);
      if (!ex) return "rep of an unplanned exercise";
      if (it.index != ++reps[it.exercise_id]) return "rep numbering gap";
      if (reps[it.exercise_id] > ex->reps) return "rep overflow";
    } else {
      if (it.index != segments++) return "segment numbering gap";
      if (!after.config.timeline || it.index >= after.config.timeline->segments.size())
        return "segment index out of range";
    }
  }
  if (after.current_exercise && after.rep_counter > after.config.exercises[*after.current_exercise].reps)
    return "rep counter overflow";

  const bool terminal_now = rehab::is_terminal(after.phase);
  std::size_t closing = 0;
  for (const auto& f : out.feedback)
    if (f.kind == rehab::FeedbackKind::SessionCompleted || f.kind == rehab::FeedbackKind::SessionAborted) ++closing;
  if (closing != (terminal_now ? 1u : 0u)) return "session-closing feedback mismatch";

  if (after.phase == Phase::Complete) {
    if (after.config.mode == rehab::Mode::Basic) {
      if (!std::all_of(after.exercise_done.begin(), after.exercise_done.end(), [](bool d) { return d; }))
        return "Complete with unfinished exercises";
    } else if (segments != after.config.timeline->segments.size()) {
      return "Complete without every segment scored";
    }
  }
  return {};
}

}  // namespace hc::testing
