#include "hc/rehab/report.hpp"

#include <cmath>
#include <set>

namespace hc::rehab {

namespace {

std::string_view kind_name(ScoredItem::Kind k) { return k == ScoredItem::Kind::Rep ? "rep" : "segment"; }

ScoredItem::Kind kind_from(std::string_view s) {
  if (s == "rep") return ScoredItem::Kind::Rep;
  if (s == "segment") return ScoredItem::Kind::Segment;
  throw ReportError("unknown item kind '" + std::string(s) + "'");
}

bool unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace

void SessionReport::validate() const {
  if (v != kReportVersion) throw ReportError("unsupported report version " + std::to_string(v));
  if (session_id.empty()) throw ReportError("report has no session_id");
  if (patient_id.empty()) throw ReportError("report has no patient_id");
  if (overall_score < 0 || overall_score > 100) throw ReportError("overall_score outside 0..100");
  if (no_activity != items.empty()) throw ReportError("no_activity disagrees with items");
  if (no_activity && overall_score != 0) throw ReportError("no_activity report must score 0");
  for (const auto& it : items)
    if (!unit(it.score)) throw ReportError("item score outside [0,1]");
  std::set<FacialRegion> seen;
  for (const auto& it : items) seen.insert(it.region);
  for (const auto& [region, mean] : region_means) {
    if (!unit(mean)) throw ReportError("region mean outside [0,1]");
    if (!seen.count(region)) throw ReportError("region mean without items");
  }
  if (seen.size() != region_means.size()) throw ReportError("missing region mean");

  // Derived fields must agree with the items.
  std::map<FacialRegion, std::pair<double, std::size_t>> sums;
  double total = 0.0;
  for (const auto& it : items) {
    sums[it.region].first += it.score;
    ++sums[it.region].second;
    total += it.score;
  }
  for (const auto& [region, sn] : sums)
    if (std::abs(region_means.at(region) - sn.first / static_cast<double>(sn.second)) > 1e-9)
      throw ReportError("region mean disagrees with items");
  if (!items.empty() &&
      overall_score != static_cast<int>(std::lround(100.0 * total / static_cast<double>(items.size()))))
    throw ReportError("overall_score disagrees with items");
}

SessionReport finalize_session(const SessionState& state) {
  if (!is_terminal(state.phase))
    throw std::logic_error("cannot finalize a session in phase " + std::string(to_string(state.phase)));

  SessionReport r;
  r.session_id = state.config.session_id;
  r.patient_id = state.config.patient_id;
  r.mode = state.config.mode;
  r.started_at_ms = state.config.started_at_ms;
  r.aborted = state.phase == Phase::Aborted;
  r.items = state.items;

  std::map<FacialRegion, std::pair<double, std::size_t>> sums;
  double total = 0.0;
  for (const auto& it : r.items) {
    auto& [s, n] = sums[it.region];
    s += it.score;
    ++n;
    total += it.score;
  }
  for (const auto& [region, sn] : sums) r.region_means[region] = sn.first / static_cast<double>(sn.second);

  r.no_activity = r.items.empty();
  r.overall_score =
      r.no_activity ? 0 : static_cast<int>(std::lround(100.0 * total / static_cast<double>(r.items.size())));

  for (const auto& fb : state.feedback) {
    if (!fb.level) continue;
    switch (*fb.level) {
      case FeedbackLevel::Perfect: ++r.feedback_counts.perfect; break;
      case FeedbackLevel::Good: ++r.feedback_counts.good; break;
      case FeedbackLevel::ComeOn: ++r.feedback_counts.come_on; break;
    }
  }
  return r;
}

nlohmann::json report_to_json(const SessionReport& r) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : r.items)
    items.push_back({{"kind", kind_name(it.kind)},
                     {"exercise_id", it.exercise_id},
                     {"region", to_string(it.region)},
                     {"index", it.index},
                     {"score", it.score},
                     {"timed_out", it.timed_out}});
  nlohmann::json means = nlohmann::json::object();
  for (const auto& [region, m] : r.region_means) means[std::string(to_string(region))] = m;
  return {{"v", r.v},
          {"session_id", r.session_id},
          {"patient_id", r.patient_id},
          {"mode", to_string(r.mode)},
          {"started_at", r.started_at_ms},
          {"aborted", r.aborted},
          {"items", std::move(items)},
          {"region_means", std::move(means)},
          {"overall_score", r.overall_score},
          {"no_activity", r.no_activity},
          {"feedback_counts",
           {{"perfect", r.feedback_counts.perfect},
            {"good", r.feedback_counts.good},
            {"come_on", r.feedback_counts.come_on}}}};
}

SessionReport report_from_json(const nlohmann::json& j) {
  SessionReport r;
  try {
    r.v = j.at("v").get<int>();
    r.session_id = j.at("session_id").get<std::string>();
    r.patient_id = j.at("patient_id").get<std::string>();
    r.mode = mode_from_string(j.at("mode").get<std::string>());
    r.started_at_ms = j.at("started_at").get<std::int64_t>();
    r.aborted = j.at("aborted").get<bool>();
    for (const auto& it : j.at("items")) {
      ScoredItem item;
      item.kind = kind_from(it.at("kind").get<std::string>());
      item.exercise_id = it.at("exercise_id").get<std::string>();
      item.region = region_from_string(it.at("region").get<std::string>());
      item.index = it.at("index").get<std::size_t>();
      item.score = it.at("score").get<double>();
      item.timed_out = it.at("timed_out").get<bool>();
      r.items.push_back(std::move(item));
    }
    for (const auto& [key, value] : j.at("region_means").items())
      r.region_means[region_from_string(key)] = value.get<double>();
    r.overall_score = j.at("overall_score").get<int>();
    r.no_activity = j.at("no_activity").get<bool>();
    const auto& fc = j.at("feedback_counts");
    r.feedback_counts = {fc.at("perfect").get<std::uint64_t>(), fc.at("good").get<std::uint64_t>(),
                         fc.at("come_on").get<std::uint64_t>()};
  } catch (const nlohmann::json::exception& e) {
    throw ReportError(std::string("malformed report: ") + e.what());
  } catch (const ReportError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ReportError(std::string("malformed report: ") + e.what());
  }
  r.validate();
  return r;
}

std::string serialize_report(const SessionReport& report) { return report_to_json(report).dump(2) + "\n"; }

}  // namespace hc::rehab
