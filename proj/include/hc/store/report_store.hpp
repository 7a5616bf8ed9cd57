#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hc/rehab/report.hpp"

namespace hc::store {

/// Root of the data directory: $HC_DATA_DIR if set and non-empty, else "data".
std::filesystem::path default_data_root();

/// Opaque ids: 1-64 characters from [A-Za-z0-9_-].
bool is_valid_id(std::string_view id);

class StoreError : public std::runtime_error {
 public:
  enum class Code {
    InvalidId,
    DuplicatePatient,
    UnknownPatient,
    DuplicateSession,
    UnknownSession,
    NoSessions,
    InvalidReport,
    Io,
  };
  StoreError(Code code, const std::string& detail) : std::runtime_error(detail), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

std::string_view to_string(StoreError::Code code);

struct PatientRecord {
  std::string patient_id;
  std::string alias;
  std::int64_t created_at_ms = 0;
  std::vector<std::string> session_ids;  // append order

  bool operator==(const PatientRecord&) const = default;
};

/// File-backed report store:
///   <root>/patients/<id>/index.json
///   <root>/patients/<id>/sessions/<session_id>.json
///   <root>/patients/<id>/audit.jsonl
/// Writers on one patient serialize through flock on <id>/index.lock. Every
/// file is replaced by write-temp-then-rename.
class ReportStore {
 public:
  explicit ReportStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }

  PatientRecord create_patient(const std::string& patient_id, const std::string& alias,
                               std::int64_t created_at_ms);
  bool has_patient(const std::string& patient_id) const;
  PatientRecord patient(const std::string& patient_id) const;
  std::vector<std::string> patient_ids() const;

  /// Validates, persists, and appends to the patient index; returns the session id.
  std::string store_session(const rehab::SessionReport& report);
  rehab::SessionReport load_session(const std::string& patient_id,
                                    const std::string& session_id) const;
  /// Reports ordered by started_at (ties keep index order).
  std::vector<rehab::SessionReport> patient_history(const std::string& patient_id) const;

  /// The only deletion path. Appends an audit record before removing the report.
  void purge_session(const std::string& patient_id, const std::string& session_id,
                     const std::string& reason);

  /// Test hook, called with the final path after a temp file is fully written
  /// and before it is renamed into place. Throwing from it simulates a crash.
  void set_fault_hook(std::function<void(const std::filesystem::path&)> hook) {
    fault_hook_ = std::move(hook);
  }

 private:
  std::filesystem::path patient_dir(const std::string& id) const;
  PatientRecord read_index(const std::string& patient_id) const;
  void write_index(const PatientRecord& rec);
  void atomic_write(const std::filesystem::path& path, const std::string& content);

  std::filesystem::path root_;
  std::function<void(const std::filesystem::path&)> fault_hook_;
};

struct RegionAggregate {
  rehab::FacialRegion region = rehab::FacialRegion::Eyebrow;
  std::size_t session_count = 0;
  double mean = 0.0;
  /// Least-squares slope of the region's per-session means against the
  /// ordinal 0, 1, 2, ... of the sessions that trained it.
  double trend = 0.0;

  bool operator==(const RegionAggregate&) const = default;
};

/// Running sums for one region; add() takes sessions in started_at order.
class RegionAccumulator {
 public:
  void add(double session_mean);
  std::size_t count() const { return n_; }
  double mean() const;
  double trend() const;

 private:
  std::size_t n_ = 0;
  double sum_x_ = 0.0, sum_y_ = 0.0, sum_xx_ = 0.0, sum_xy_ = 0.0;
};

/// Regions in canonical order, only those trained in at least one report.
/// `history` must already be in started_at order.
std::vector<RegionAggregate> aggregate_reports(std::span<const rehab::SessionReport> history);

/// Throws UnknownPatient or NoSessions.
std::vector<RegionAggregate> physician_aggregate(const ReportStore& store,
                                                 const std::string& patient_id);

nlohmann::json aggregate_to_json(std::span<const RegionAggregate> aggregates);

}  // namespace hc::store
