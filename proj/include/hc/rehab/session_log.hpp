#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "hc/rehab/report.hpp"
#include "hc/rehab/session.hpp"

namespace hc::rehab {

// JSONL: a header line {"type":"session","v":1,"config":{...}} followed by one
// event per line, e.g. {"type":"Frame","frame":{"t_ms":..,"au":{..}}}.

class SessionLogError : public std::runtime_error {
 public:
  SessionLogError(std::size_t line, const std::string& detail)
      : std::runtime_error("session log line " + std::to_string(line) + ": " + detail), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

nlohmann::json config_to_json(const SessionConfig& config);
SessionConfig config_from_json(const nlohmann::json& j);

nlohmann::json event_to_json(const SessionEvent& event);
SessionEvent event_from_json(const nlohmann::json& j);

struct SessionLog {
  SessionConfig config;
  std::vector<SessionEvent> events;
};

/// The accepted events of a live session, in order.
SessionLog session_log_of(const SessionState& state);

void write_session_log(std::ostream& out, const SessionLog& log);
void write_session_log(const std::filesystem::path& path, const SessionLog& log);
SessionLog read_session_log(std::istream& in);
SessionLog read_session_log(const std::filesystem::path& path);

struct ReplayResult {
  SessionState state;
  SessionReport report;
  std::size_t rejected = 0;
};

/// Applies every event in order; rejected events are counted and skipped. A
/// log that does not reach a terminal phase is closed with Abort.
ReplayResult replay_session(const SessionLog& log);

}  // namespace hc::rehab
