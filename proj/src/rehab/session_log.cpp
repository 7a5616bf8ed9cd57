#include "hc/rehab/session_log.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace hc::rehab {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

nlohmann::json config_to_json(const SessionConfig& c) {
  nlohmann::json exercises = nlohmann::json::array();
  for (const auto& ex : c.exercises) exercises.push_back(exercise_to_json(ex));
  nlohmann::json j = {{"session_id", c.session_id},
                      {"patient_id", c.patient_id},
                      {"mode", to_string(c.mode)},
                      {"started_at", c.started_at_ms},
                      {"min_baseline_frames", c.min_baseline_frames},
                      {"exercises", std::move(exercises)}};
  if (c.timeline) j["timeline"] = timeline_to_json(*c.timeline);
  return j;
}

SessionConfig config_from_json(const nlohmann::json& j) {
  SessionConfig c;
  c.session_id = j.at("session_id").get<std::string>();
  c.patient_id = j.at("patient_id").get<std::string>();
  c.mode = mode_from_string(j.at("mode").get<std::string>());
  c.started_at_ms = j.at("started_at").get<std::int64_t>();
  c.min_baseline_frames = j.value("min_baseline_frames", kMinBaselineFrames);
  for (const auto& e : j.at("exercises")) c.exercises.push_back(exercise_from_json(e));
  if (j.contains("timeline")) c.timeline = timeline_from_json(j.at("timeline"));
  c.validate();
  return c;
}

nlohmann::json event_to_json(const SessionEvent& event) {
  nlohmann::json j = {{"type", event_name(event)}};
  std::visit(Overloaded{
                 [&](const events::BaselineFrame& e) { j["frame"] = features::frame_to_json(e.frame); },
                 [&](const events::Frame& e) { j["frame"] = features::frame_to_json(e.frame); },
                 [&](const events::StartExercise& e) { j["exercise_id"] = e.exercise_id; },
                 [](const auto&) {},
             },
             event);
  return j;
}

SessionEvent event_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "StartBaseline") return events::StartBaseline{};
  if (type == "BaselineFrame") return events::BaselineFrame{features::frame_from_json(j.at("frame"))};
  if (type == "StartExercise") return events::StartExercise{j.at("exercise_id").get<std::string>()};
  if (type == "InstructionDone") return events::InstructionDone{};
  if (type == "Frame") return events::Frame{features::frame_from_json(j.at("frame"))};
  if (type == "Skip") return events::Skip{};
  if (type == "Abort") return events::Abort{};
  throw std::invalid_argument("unknown event type '" + type + "'");
}

SessionLog session_log_of(const SessionState& state) {
  SessionLog log{state.config, {}};
  log.events.reserve(state.log.size());
  for (const auto& rec : state.log) log.events.push_back(rec.event);
  return log;
}

void write_session_log(std::ostream& out, const SessionLog& log) {
  out << nlohmann::json{{"type", "session"}, {"v", 1}, {"config", config_to_json(log.config)}}.dump()
      << '\n';
  for (const auto& e : log.events) out << event_to_json(e).dump() << '\n';
}

void write_session_log(const std::filesystem::path& path, const SessionLog& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_session_log(out, log);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SessionLog read_session_log(std::istream& in) {
  SessionLog log;
  bool have_header = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (j.at("type") != "session") throw std::invalid_argument("first record must be the session header");
        if (j.at("v") != 1) throw std::invalid_argument("unsupported log version");
        log.config = config_from_json(j.at("config"));
        have_header = true;
      } else {
        log.events.push_back(event_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw SessionLogError(line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw SessionLogError(line_no, e.what());
    } catch (const features::FrameStreamError& e) {
      throw SessionLogError(line_no, e.what());
    }
  }
  if (!have_header) throw SessionLogError(line_no, "missing session header");
  return log;
}

SessionLog read_session_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_session_log(in);
}

ReplayResult replay_session(const SessionLog& log) {
  ReplayResult r;
  SessionState state = new_session(log.config);
  for (const auto& e : log.events) {
    Outcome o = advance_session(std::move(state), e);
    if (!o.accepted()) ++r.rejected;
    state = std::move(o.state);
  }
  if (!is_terminal(state.phase)) state = advance_session(std::move(state), events::Abort{}).state;
  r.report = finalize_session(state);
  r.state = std::move(state);
  return r;
}

}  // namespace hc::rehab
