#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hc/detector/metrics.hpp"
#include "hc/detector/model.hpp"
#include "hc/rehab/catalog.hpp"
#include "hc/rehab/report.hpp"
#include "hc/rehab/session.hpp"
#include "hc/rehab/session_log.hpp"
#include "hc/rehab/timeline.hpp"
#include "hc/store/report_store.hpp"

namespace hc::service {

inline constexpr std::int64_t kDefaultIdleTimeoutMs = 300'000;

/// Error surfaced to clients; `code` is stable, `status` is the HTTP status.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(std::string code, int status, const std::string& detail)
      : std::runtime_error(detail), code_(std::move(code)), status_(status) {}
  const std::string& code() const noexcept { return code_; }
  int status() const noexcept { return status_; }

 private:
  std::string code_;
  int status_;
};

struct ServiceOptions {
  std::int64_t idle_timeout_ms = kDefaultIdleTimeoutMs;
  /// Milliseconds since the epoch; injectable for tests.
  std::function<std::int64_t()> clock;
  /// Seeds session-id generation; unset draws from std::random_device.
  std::optional<std::uint64_t> id_seed;
  std::size_t min_baseline_frames = rehab::kMinBaselineFrames;
};

struct CreateSessionRequest {
  std::string patient_id;
  rehab::Mode mode = rehab::Mode::Basic;
  std::vector<std::string> exercise_ids;  // basic
  std::int64_t duration_ms = 0;           // advanced
  rehab::Difficulty difficulty = rehab::Difficulty::Hard;
  std::uint64_t seed = 0;
};

struct SessionDescriptor {
  std::string session_id;
  std::string patient_id;
  rehab::Mode mode = rehab::Mode::Basic;
  rehab::Phase phase = rehab::Phase::Idle;
  std::int64_t started_at_ms = 0;
  std::vector<rehab::ExerciseSpec> exercises;
  std::optional<rehab::AdvancedTimeline> timeline;
};

nlohmann::json descriptor_to_json(const SessionDescriptor& d);

struct DetectResult {
  features::Label label = features::Label::Healthy;
  double probability = 0.0;
  std::string model_version;
  std::size_t frames_used = 0;
};

nlohmann::json detect_result_to_json(const DetectResult& r);

/// Classifies one subject's feature stream over its smile segment (the frames
/// after the neutral lead-in), matching how the detector is trained.
/// Throws std::invalid_argument on an empty, mis-sized or non-finite upload.
DetectResult detect_subject(const detector::DetectionModel& model,
                            std::span<const Eigen::VectorXd> features, std::string model_version);

class SessionService {
 public:
  SessionService(store::ReportStore store, rehab::ExerciseCatalog catalog,
                 std::optional<detector::DetectionModel> model, ServiceOptions options = {});
  ~SessionService();

  const rehab::ExerciseCatalog& catalog() const { return catalog_; }
  store::ReportStore& store() { return store_; }
  bool has_model() const { return model_.has_value(); }

  /// An empty id gets a generated one.
  store::PatientRecord create_patient(std::string patient_id, const std::string& alias);

  SessionDescriptor create_session(const CreateSessionRequest& request);
  SessionDescriptor describe(const std::string& session_id) const;

  std::vector<rehab::FeedbackEvent> start_baseline(const std::string& session_id);
  /// BaselineFrame while capturing the baseline, Frame otherwise.
  std::vector<rehab::FeedbackEvent> ingest_frame(const std::string& session_id,
                                                 const features::AUFrame& frame);
  /// Any non-frame event: StartBaseline, StartExercise, InstructionDone, Skip, Abort.
  std::vector<rehab::FeedbackEvent> command(const std::string& session_id,
                                            const rehab::SessionEvent& event);
  std::vector<rehab::FeedbackEvent> events_since(const std::string& session_id,
                                                 std::uint64_t since) const;

  /// Finalizes (aborting a non-terminal session first), persists, evicts.
  /// A second call returns the stored report.
  rehab::SessionReport complete_session(const std::string& session_id);

  rehab::SessionLog session_log(const std::string& session_id) const;

  /// Aborts, finalizes and persists sessions idle longer than the timeout.
  std::size_t reap_expired();
  std::size_t live_session_count() const;

  std::vector<rehab::SessionReport> patient_report(const std::string& patient_id) const;
  std::vector<store::RegionAggregate> patient_aggregate(const std::string& patient_id) const;

  DetectResult detect_frames(std::span<const features::AUFrame> frames) const;
  DetectResult detect_features(std::span<const Eigen::VectorXd> features) const;

 private:
  struct Live {
    mutable std::mutex mu;
    rehab::SessionState state;
    std::int64_t last_event_at = 0;
    bool done = false;  // persisted; about to leave the live table
  };
  struct Finished {
    std::string patient_id;
    std::vector<rehab::FeedbackEvent> feedback;
    rehab::SessionLog log;
  };

  std::int64_t now() const;
  std::string next_id(const char* prefix);
  std::shared_ptr<Live> find_live(const std::string& session_id) const;
  std::vector<rehab::FeedbackEvent> apply(const std::string& session_id,
                                          const rehab::SessionEvent& event);
  // Caller holds live.mu.
  rehab::SessionReport finish_locked(const std::string& session_id, Live& live);

  store::ReportStore store_;
  rehab::ExerciseCatalog catalog_;
  std::optional<detector::DetectionModel> model_;
  std::string model_version_;
  ServiceOptions options_;

  mutable std::shared_mutex table_mu_;
  std::map<std::string, std::shared_ptr<Live>> live_;
  std::map<std::string, Finished> finished_;

  std::mutex id_mu_;
  std::mt19937_64 id_rng_;
};

/// Maps a rejected transition to its client error.
ServiceError rejection_error(const rehab::Rejection& r);

}  // namespace hc::service
