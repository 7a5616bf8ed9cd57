#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <cmath>
#include <random>
#include <sstream>

#include "hc/rehab/catalog.hpp"
#include "hc/rehab/report.hpp"
#include "hc/rehab/scoring.hpp"
#include "hc/rehab/session.hpp"
#include "hc/rehab/session_log.hpp"
#include "hc/rehab/timeline.hpp"
#include "sessions.hpp"

using namespace hc::rehab;
using hc::testing::make_frame;
namespace ev = hc::rehab::events;

namespace {

NeutralBaseline smile_baseline() {
  std::vector<hc::features::AUFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(make_frame(i * 33, {{"AU12", 0.1}}));
  return capture_baseline(frames);
}

const ExerciseSpec& smile() {
  static const ExerciseSpec spec = *load_exercise_catalog().find("smile");
  return spec;
}

SessionConfig advanced_config(std::int64_t duration_ms, Difficulty d, std::uint64_t seed) {
  const auto cat = load_exercise_catalog();
  SessionConfig c;
  c.session_id = "adv-1";
  c.patient_id = "patient-b";
  c.mode = Mode::Advanced;
  c.timeline = build_advanced_timeline(cat, duration_ms, d, seed);
  for (const auto& ex : cat.exercises())
    for (const auto& s : c.timeline->segments)
      if (s.exercise_id == ex.id) {
        c.exercises.push_back(ex);
        break;
      }
  return c;
}

hc::features::AUFrame full_frame(std::int64_t t, double v) {
  static const auto cat = load_exercise_catalog();
  std::map<std::string, double> au;
  for (const auto& code : cat.frame_schema()) au[code] = v;
  return make_frame(t, au);
}

std::size_t count_kind(const std::vector<FeedbackEvent>& fb, FeedbackKind k) {
  return static_cast<std::size_t>(std::count_if(fb.begin(), fb.end(), [&](const auto& e) { return e.kind == k; }));
}

}  // namespace

TEST_SUITE("rehab") {

TEST_CASE("built-in catalog") {
  const auto cat = load_exercise_catalog();
  CHECK(cat.exercises().size() == 16);
  for (auto r : kRegionCycle) CHECK(!cat.in_region(r).empty());
  REQUIRE(cat.find("smile"));
  CHECK(cat.find("smile")->targets == std::map<std::string, double>{{"AU12", 0.6}});
  CHECK(cat.find("nope") == nullptr);
  const auto again = catalog_from_json(cat.to_json());
  CHECK(again.exercises() == cat.exercises());
}

TEST_CASE("catalog rejects unknown target AUs and bad specs") {
  std::istringstream unknown_au(
      R"({"v":1,"frame_schema":["AU1"],"exercises":[{"id":"x","region":"lip","targets":{"AU99":0.5}}]})");
  CHECK_THROWS_AS(load_exercise_catalog(unknown_au), CatalogError);
  std::istringstream bad_amp(
      R"({"v":1,"frame_schema":["AU1"],"exercises":[{"id":"x","region":"lip","targets":{"AU1":1.5}}]})");
  CHECK_THROWS_AS(load_exercise_catalog(bad_amp), CatalogError);
  std::istringstream garbage("{not json");
  CHECK_THROWS_AS(load_exercise_catalog(garbage), CatalogError);
}

TEST_CASE("feedback thresholds are boundary inclusive") {
  CHECK(feedback_level(0.75) == FeedbackLevel::Perfect);
  CHECK(feedback_level(0.7499) == FeedbackLevel::Good);
  CHECK(feedback_level(0.35) == FeedbackLevel::Good);
  CHECK(feedback_level(0.3499) == FeedbackLevel::ComeOn);
  CHECK(feedback_level(0.0) == FeedbackLevel::ComeOn);
  CHECK(feedback_level(1.0) == FeedbackLevel::Perfect);
  CHECK_THROWS_AS(feedback_level(1.01), std::out_of_range);
  CHECK_THROWS_AS(feedback_level(-0.01), std::out_of_range);
}

TEST_CASE("baseline is the per-AU median") {
  std::vector<hc::features::AUFrame> frames;
  for (int i = 0; i < 10; ++i) frames.push_back(make_frame(i, {{"AU12", i < 5 ? 0.1 : 0.3}}));
  CHECK(capture_baseline(frames).values.at("AU12") == doctest::Approx(0.2));
  frames.push_back(make_frame(10, {{"AU12", 0.9}}));
  CHECK(capture_baseline(frames).values.at("AU12") == doctest::Approx(0.3));
  CHECK(capture_baseline(frames).capture_frame_count == 11);
  CHECK_THROWS_AS(capture_baseline(std::span(frames).first(9)), std::invalid_argument);
}

TEST_CASE("smile scoring examples") {
  const auto base = smile_baseline();
  auto score = [&](double au12) { return score_frame(smile(), base, make_frame(0, {{"AU12", au12}})); };
  CHECK(score(0.7).aggregate == doctest::Approx(1.0));
  CHECK(score(0.7).level == FeedbackLevel::Perfect);
  CHECK(score(0.4).aggregate == doctest::Approx(0.5));
  CHECK(score(0.4).level == FeedbackLevel::Good);
  CHECK(score(0.1).aggregate == 0.0);
  CHECK(score(0.0).aggregate == 0.0);
  CHECK(score(1.0).aggregate == 1.0);
  CHECK(score_frame(smile(), base, make_frame(0, {{"AU12", 0.4}}), 0.5).aggregate == doctest::Approx(1.0));
  CHECK_THROWS_AS(score_frame(smile(), base, make_frame(0, {{"AU6", 0.4}})), MissingAUError);
}

TEST_CASE("scores are monotone in intensity and bounded") {
  const auto base = smile_baseline();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const auto sa = score_frame(smile(), base, make_frame(0, {{"AU12", a}}));
    const auto sb = score_frame(smile(), base, make_frame(0, {{"AU12", b}}));
    CHECK(sa.aggregate <= sb.aggregate);
    CHECK(sa.level <= sb.level);
    CHECK(sa.aggregate >= 0.0);
    CHECK(sb.aggregate <= 1.0);
  }
}

TEST_CASE("advanced timeline layout") {
  const auto cat = load_exercise_catalog();
  const auto t = build_advanced_timeline(cat, 60000, Difficulty::Easy, 4);
  REQUIRE(t.segments.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& s = t.segments[i];
    CHECK(s.start_ms == static_cast<std::int64_t>(i) * 5000);
    CHECK(s.end_ms == s.start_ms + 5000);
    CHECK(s.region == kRegionCycle[i % 4]);
    CHECK(cat.find(s.exercise_id)->region == s.region);
    CHECK(s.beat_markers_ms.size() == 5);
    CHECK(s.beat_markers_ms.front() == s.start_ms);
    CHECK(s.opera_track_id == opera_track_for(s.region));
  }
  CHECK(difficulty_scale(Difficulty::Easy) == 0.8);
  CHECK(difficulty_scale(Difficulty::Hard) == 1.0);
  CHECK(build_advanced_timeline(cat, 60000, Difficulty::Easy, 4) == t);
  CHECK(timeline_from_json(timeline_to_json(t)) == t);

  const auto cut = build_advanced_timeline(cat, 12500, Difficulty::Hard, 1);
  REQUIRE(cut.segments.size() == 3);
  CHECK(cut.segments.back().end_ms == 12500);
  CHECK_THROWS(build_advanced_timeline(cat, 4999, Difficulty::Hard, 1));
}

TEST_CASE("golden smile session") {
  const auto state = hc::testing::run_events(new_session(hc::testing::smile_config()), hc::testing::golden_smile_events());
  CHECK(state.phase == Phase::Complete);
  REQUIRE(state.items.size() == 3);
  CHECK(state.items[0].score == doctest::Approx(1.0));
  CHECK(state.items[1].score == doctest::Approx(0.5));
  CHECK(state.items[2].score == 0.0);
  CHECK(state.items[2].timed_out);
  CHECK(count_kind(state.feedback, FeedbackKind::RepCompleted) == 2);
  CHECK(count_kind(state.feedback, FeedbackKind::RepTimedOut) == 1);
  CHECK(count_kind(state.feedback, FeedbackKind::ExerciseCompleted) == 1);
  CHECK(state.feedback.back().kind == FeedbackKind::SessionCompleted);
  for (std::size_t i = 0; i < state.feedback.size(); ++i) CHECK(state.feedback[i].seq == i + 1);

  const auto report = finalize_session(state);
  CHECK(report.overall_score == 50);
  CHECK(!report.no_activity);
  CHECK(report.region_means.size() == 1);
  CHECK(report.region_means.at(FacialRegion::Lip) == doctest::Approx(0.5));
  CHECK(report_from_json(report_to_json(report)) == report);
  CHECK(serialize_report(report).back() == '\n');
}

TEST_CASE("level changes are edge triggered") {
  auto s = new_session(hc::testing::smile_config());
  s = hc::testing::run_events(std::move(s), {ev::StartBaseline{}});
  for (int i = 0; i < 10; ++i)
    s = hc::testing::run_events(std::move(s), {ev::BaselineFrame{make_frame(i * 33, {{"AU12", 0.1}})}});
  s = hc::testing::run_events(std::move(s), {ev::StartExercise{"smile"}, ev::InstructionDone{}});

  std::int64_t t = 1000;
  auto push = [&](double au12) {
    auto out = advance_session(std::move(s), ev::Frame{make_frame(t, {{"AU12", au12}})});
    t += 33;
    REQUIRE(out.accepted());
    s = std::move(out.state);
    return out.feedback;
  };
  auto fb = push(0.4);
  REQUIRE(fb.size() == 1);
  CHECK(fb[0].kind == FeedbackKind::LevelChanged);
  CHECK(fb[0].level == FeedbackLevel::Good);
  CHECK(push(0.41).empty());
  CHECK(push(0.42).empty());
  fb = push(0.1);
  REQUIRE(fb.size() == 1);
  CHECK(fb[0].level == FeedbackLevel::ComeOn);
  fb = push(0.7);
  REQUIRE(fb.size() == 1);
  CHECK(fb[0].level == FeedbackLevel::Perfect);
}

TEST_CASE("rejections leave the state untouched") {
  auto s = new_session(hc::testing::smile_config());
  auto out = advance_session(s, ev::Frame{make_frame(0, {{"AU12", 0.1}})});
  CHECK(out.rejection->code == Rejection::Code::IllegalEvent);
  CHECK(out.state.phase == Phase::Idle);

  s = hc::testing::run_events(std::move(s), {ev::StartBaseline{}});
  out = advance_session(s, ev::StartExercise{"smile"});
  CHECK(out.rejection->code == Rejection::Code::BaselineTooShort);
  out = advance_session(s, ev::StartExercise{"nope"});
  CHECK(out.rejection->code == Rejection::Code::UnknownExercise);
  out = advance_session(s, ev::BaselineFrame{make_frame(0, {{"AU6", 0.1}})});
  CHECK(out.rejection->code == Rejection::Code::MissingAU);
  s = hc::testing::run_events(std::move(s), {ev::BaselineFrame{make_frame(10, {{"AU12", 0.1}})}});
  out = advance_session(s, ev::BaselineFrame{make_frame(10, {{"AU12", 0.1}})});
  CHECK(out.rejection->code == Rejection::Code::NonMonotoneFrame);
  CHECK(out.state.baseline_frames.size() == 1);
  CHECK(out.feedback.empty());

  s = hc::testing::run_events(std::move(s), {ev::Abort{}});
  CHECK(s.phase == Phase::Aborted);
  CHECK(advance_session(s, ev::Abort{}).rejection->code == Rejection::Code::IllegalEvent);
}

TEST_CASE("skip finishes the exercise and abort closes the session") {
  auto s = new_session(hc::testing::smile_config());
  s = hc::testing::run_events(std::move(s), {ev::StartBaseline{}});
  for (int i = 0; i < 10; ++i)
    s = hc::testing::run_events(std::move(s), {ev::BaselineFrame{make_frame(i, {{"AU12", 0.1}})}});
  s = hc::testing::run_events(std::move(s), {ev::StartExercise{"smile"}, ev::Skip{}});
  CHECK(s.phase == Phase::Complete);
  CHECK(s.items.empty());
  const auto r = finalize_session(s);
  CHECK(r.no_activity);
  CHECK(r.overall_score == 0);
  CHECK(r.region_means.empty());

  auto live = new_session(hc::testing::smile_config());
  CHECK_THROWS_AS(finalize_session(live), std::logic_error);
}

TEST_CASE("advanced session scores every segment") {
  auto s = new_session(advanced_config(60000, Difficulty::Easy, 9));
  s = hc::testing::run_events(std::move(s), {ev::StartBaseline{}});
  for (int i = 0; i < 10; ++i) s = hc::testing::run_events(std::move(s), {ev::BaselineFrame{full_frame(i * 33, 0.1)}});
  s = hc::testing::run_events(std::move(s), {ev::InstructionDone{}});
  CHECK(s.phase == Phase::SegmentActive);
  std::int64_t t = 1000;
  for (; s.phase == Phase::SegmentActive; t += 100)
    s = hc::testing::run_events(std::move(s), {ev::Frame{full_frame(t, 0.9)}});
  CHECK(s.phase == Phase::Complete);
  REQUIRE(s.items.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(s.items[i].kind == ScoredItem::Kind::Segment);
    CHECK(s.items[i].index == i);
    CHECK(s.items[i].score == doctest::Approx(1.0));
  }
  CHECK(count_kind(s.feedback, FeedbackKind::SegmentCompleted) == 12);
  const auto r = finalize_session(s);
  CHECK(r.overall_score == 100);
  CHECK(r.region_means.size() == 4);
}

TEST_CASE("advanced abort keeps the partial segment") {
  auto s = new_session(advanced_config(20000, Difficulty::Hard, 2));
  s = hc::testing::run_events(std::move(s), {ev::StartBaseline{}});
  for (int i = 0; i < 10; ++i) s = hc::testing::run_events(std::move(s), {ev::BaselineFrame{full_frame(i, 0.0)}});
  s = hc::testing::run_events(std::move(s), {ev::InstructionDone{}});
  for (std::int64_t t = 100; t < 100 + 7000; t += 200)
    s = hc::testing::run_events(std::move(s), {ev::Frame{full_frame(t, 0.0)}});
  s = hc::testing::run_events(std::move(s), {ev::Abort{}});
  CHECK(s.phase == Phase::Aborted);
  CHECK(s.items.size() == 2);
  const auto r = finalize_session(s);
  CHECK(r.aborted);
  CHECK(r.overall_score == 0);
  CHECK(!r.no_activity);
}

TEST_CASE("report arithmetic") {
  SessionState s = new_session(hc::testing::smile_config());
  s.phase = Phase::Complete;
  for (double v : {1.0, 1.0, 1.0}) s.items.push_back({ScoredItem::Kind::Rep, "smile", FacialRegion::Lip, s.items.size() + 1, v, false});
  CHECK(finalize_session(s).overall_score == 100);
  s.items[1].score = 0.005;
  s.items[2].score = 0.0;
  CHECK(finalize_session(s).overall_score == static_cast<int>(std::lround(100 * 1.005 / 3)));

  auto bad = report_to_json(finalize_session(s));
  bad["overall_score"] = 101;
  CHECK_THROWS_AS(report_from_json(bad), ReportError);
  bad = report_to_json(finalize_session(s));
  bad.erase("items");
  CHECK_THROWS_AS(report_from_json(bad), ReportError);
}

TEST_CASE("randomized sessions agree with the reference machine") {
  std::mt19937_64 rng(77);
  for (std::uint64_t n = 0; n < 2000; ++n) {
    const auto mode = n % 2 ? Mode::Advanced : Mode::Basic;
    auto cfg = hc::testing::random_config(rng, mode, n);
    hc::testing::ReferenceMachine ref(cfg);
    auto state = new_session(cfg);
    for (int step = 0; step < 120; ++step) {
      const auto e = hc::testing::random_event(rng, cfg, state.phase, ref.last_t());
      const auto want = ref.expect(state.phase, e);
      const auto before = state;
      auto out = advance_session(std::move(state), e);
      const auto violation = hc::testing::check_step(before, out);
      INFO("session " << n << " step " << step << " event " << event_name(e));
      REQUIRE(violation.empty());
      if (want.rejection) {
        REQUIRE(!out.accepted());
        REQUIRE(out.rejection->code == *want.rejection);
      } else {
        REQUIRE(out.accepted());
        REQUIRE(want.successors.count(out.state.phase) == 1);
        ref.accepted(e, before.phase, out.state.phase, out.feedback);
      }
      state = std::move(out.state);
    }
  }
}

TEST_CASE("session log round trip and replay") {
  const auto state = hc::testing::run_events(new_session(hc::testing::smile_config()), hc::testing::golden_smile_events());
  const auto log = session_log_of(state);
  CHECK(log.events.size() == hc::testing::golden_smile_events().size());
  std::stringstream buf;
  write_session_log(buf, log);
  const std::string text = buf.str();
  std::stringstream in(text);
  const auto back = read_session_log(in);
  std::stringstream again;
  write_session_log(again, back);
  CHECK(again.str() == text);

  const auto a = replay_session(back), b = replay_session(back);
  CHECK(a.rejected == 0);
  CHECK(serialize_report(a.report) == serialize_report(b.report));
  CHECK(a.report == finalize_session(state));

  auto partial = log;
  partial.events.resize(20);
  const auto p = replay_session(partial);
  CHECK(p.state.phase == Phase::Aborted);
  CHECK(p.report.aborted);

  std::stringstream broken(text.substr(0, text.find('\n') + 1) + "{\"type\":\"Teleport\"}\n");
  try {
    read_session_log(broken);
    FAIL("expected SessionLogError");
  } catch (const SessionLogError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("bundled golden log replays to the bundled report") {
  const std::filesystem::path dir = HC_GOLDEN_DIR;
  const auto result = replay_session(read_session_log(dir / "session_smile.jsonl"));
  std::ifstream in(dir / "session_smile.report.json", std::ios::binary);
  const std::string expected((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(result.rejected == 0);
  CHECK(serialize_report(result.report) == expected);
  CHECK(result.report.overall_score == 50);

  // The in-memory fixture still produces the bundled log.
  const auto state = hc::testing::run_events(new_session(hc::testing::smile_config()), hc::testing::golden_smile_events());
  std::ostringstream log;
  write_session_log(log, session_log_of(state));
  std::ifstream golden_log(dir / "session_smile.jsonl", std::ios::binary);
  const std::string expected_log((std::istreambuf_iterator<char>(golden_log)), std::istreambuf_iterator<char>());
  CHECK(log.str() == expected_log);
}

}  // TEST_SUITE
