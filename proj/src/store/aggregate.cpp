#include <cmath>
#include <map>

#include "hc/store/report_store.hpp"

namespace hc::store {

void RegionAccumulator::add(double session_mean) {
  const double x = static_cast<double>(n_);
  ++n_;
  sum_x_ += x;
  sum_y_ += session_mean;
  sum_xx_ += x * x;
  sum_xy_ += x * session_mean;
}

double RegionAccumulator::mean() const { return n_ == 0 ? 0.0 : sum_y_ / static_cast<double>(n_); }

double RegionAccumulator::trend() const {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double denom = n * sum_xx_ - sum_x_ * sum_x_;
  return (n * sum_xy_ - sum_x_ * sum_y_) / denom;
}

std::vector<RegionAggregate> aggregate_reports(std::span<const rehab::SessionReport> history) {
  std::map<rehab::FacialRegion, RegionAccumulator> acc;
  for (const auto& report : history)
    for (const auto& [region, mean] : report.region_means) acc[region].add(mean);

  std::vector<RegionAggregate> out;
  for (rehab::FacialRegion r : rehab::kRegionCycle) {
    auto it = acc.find(r);
    if (it == acc.end()) continue;
    out.push_back({r, it->second.count(), it->second.mean(), it->second.trend()});
  }
  return out;
}

std::vector<RegionAggregate> physician_aggregate(const ReportStore& store,
                                                 const std::string& patient_id) {
  const auto history = store.patient_history(patient_id);
  if (history.empty())
    throw StoreError(StoreError::Code::NoSessions, "patient '" + patient_id + "' has no sessions");
  return aggregate_reports(history);
}

nlohmann::json aggregate_to_json(std::span<const RegionAggregate> aggregates) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& a : aggregates)
    regions.push_back({{"region", rehab::to_string(a.region)},
                       {"session_count", a.session_count},
                       {"mean", a.mean},
                       {"trend", a.trend}});
  return regions;
}

}  // namespace hc::store
