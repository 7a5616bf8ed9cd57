#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hc/rehab/session.hpp"

namespace hc::rehab {

inline constexpr int kReportVersion = 1;

struct FeedbackCounts {
  std::uint64_t perfect = 0;
  std::uint64_t good = 0;
  std::uint64_t come_on = 0;

  bool operator==(const FeedbackCounts&) const = default;
};

struct SessionReport {
  int v = kReportVersion;
  std::string session_id;
  std::string patient_id;
  Mode mode = Mode::Basic;
  std::int64_t started_at_ms = 0;
  bool aborted = false;
  std::vector<ScoredItem> items;
  /// Mean item score per region; only regions with at least one item appear.
  std::map<FacialRegion, double> region_means;
  int overall_score = 0;  // 0..100
  bool no_activity = false;
  FeedbackCounts feedback_counts;

  void validate() const;
  bool operator==(const SessionReport&) const = default;
};

class ReportError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Requires a terminal phase. overall = round(100 * mean item score), 0 and
/// flagged when the session scored nothing.
SessionReport finalize_session(const SessionState& state);

nlohmann::json report_to_json(const SessionReport& report);
/// Throws ReportError on schema violations.
SessionReport report_from_json(const nlohmann::json& j);
/// Canonical text form: two-space indented JSON plus a trailing newline.
std::string serialize_report(const SessionReport& report);

}  // namespace hc::rehab
