#include "hc/service/session_service.hpp"

#include <chrono>
#include <cstdio>
#include <set>

#include "hc/detector/model_io.hpp"
#include "hc/features/cohort.hpp"

namespace hc::service {

namespace {

ServiceError from_store(const store::StoreError& e) {
  using C = store::StoreError::Code;
  int status = 500;
  switch (e.code()) {
    case C::InvalidId: status = 400; break;
    case C::UnknownPatient:
    case C::UnknownSession:
    case C::NoSessions: status = 404; break;
    case C::DuplicatePatient:
    case C::DuplicateSession: status = 409; break;
    case C::InvalidReport:
    case C::Io: status = 500; break;
  }
  return ServiceError(std::string(store::to_string(e.code())), status, e.what());
}

ServiceError unknown_session(const std::string& id) {
  return ServiceError("UnknownSession", 404, "unknown session '" + id + "'");
}

bool is_frame_event(const rehab::SessionEvent& e) {
  return std::holds_alternative<rehab::events::Frame>(e) ||
         std::holds_alternative<rehab::events::BaselineFrame>(e);
}

}  // namespace

ServiceError rejection_error(const rehab::Rejection& r) {
  using C = rehab::Rejection::Code;
  const std::string detail = r.detail + " (phase " + std::string(rehab::to_string(r.phase)) + ")";
  switch (r.code) {
    case C::IllegalEvent: return ServiceError("IllegalPhase", 409, detail);
    case C::NonMonotoneFrame: return ServiceError("NonMonotoneFrame", 409, detail);
    case C::MissingAU: return ServiceError("MissingAU", 422, detail);
    case C::UnknownExercise: return ServiceError("UnknownExercise", 422, detail);
    case C::BaselineTooShort: return ServiceError("BaselineTooShort", 409, detail);
  }
  return ServiceError("IllegalPhase", 409, detail);
}

nlohmann::json descriptor_to_json(const SessionDescriptor& d) {
  nlohmann::json exercises = nlohmann::json::array();
  for (const auto& ex : d.exercises) exercises.push_back(rehab::exercise_to_json(ex));
  nlohmann::json j = {{"session_id", d.session_id},
                      {"patient_id", d.patient_id},
                      {"mode", rehab::to_string(d.mode)},
                      {"phase", rehab::to_string(d.phase)},
                      {"started_at", d.started_at_ms},
                      {"exercises", std::move(exercises)}};
  if (d.timeline) j["timeline"] = rehab::timeline_to_json(*d.timeline);
  return j;
}

nlohmann::json detect_result_to_json(const DetectResult& r) {
  return {{"label", features::to_string(r.label)},
          {"probability", r.probability},
          {"model_version", r.model_version},
          {"frames_used", r.frames_used}};
}

DetectResult detect_subject(const detector::DetectionModel& model,
                            std::span<const Eigen::VectorXd> feats, std::string model_version) {
  if (feats.empty()) throw std::invalid_argument("upload has no frames");
  const std::size_t dim = model.hp.D;
  for (const auto& v : feats) {
    if (static_cast<std::size_t>(v.size()) != dim)
      throw std::invalid_argument("feature vector has dimension " + std::to_string(v.size()) +
                                  ", model expects " + std::to_string(dim));
    if (!v.allFinite()) throw std::invalid_argument("feature vector is not finite");
  }
  std::size_t first = features::neutral_frame_count(feats.size());
  if (first >= feats.size()) first = 0;
  const auto used = feats.subspan(first);
  const auto decision = detector::classify_subject(model, used);
  return {decision.label, decision.probability, std::move(model_version), used.size()};
}

SessionService::SessionService(store::ReportStore store, rehab::ExerciseCatalog catalog,
                               std::optional<detector::DetectionModel> model, ServiceOptions options)
    : store_(std::move(store)),
      catalog_(std::move(catalog)),
      model_(std::move(model)),
      options_(std::move(options)),
      id_rng_(options_.id_seed ? *options_.id_seed : std::random_device{}()) {
  if (model_) model_version_ = detector::model_version(*model_);
  if (options_.idle_timeout_ms <= 0) throw std::invalid_argument("idle timeout must be positive");
}

SessionService::~SessionService() = default;

std::int64_t SessionService::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string SessionService::next_id(const char* prefix) {
  std::lock_guard lock(id_mu_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(id_rng_()));
  return std::string(prefix) + buf;
}

store::PatientRecord SessionService::create_patient(std::string patient_id, const std::string& alias) {
  if (patient_id.empty()) patient_id = next_id("p_");
  try {
    return store_.create_patient(patient_id, alias, now());
  } catch (const store::StoreError& e) {
    throw from_store(e);
  }
}

SessionDescriptor SessionService::create_session(const CreateSessionRequest& req) {
  if (!store_.has_patient(req.patient_id))
    throw ServiceError("UnknownPatient", 404, "unknown patient '" + req.patient_id + "'");

  rehab::SessionConfig config;
  config.patient_id = req.patient_id;
  config.mode = req.mode;
  config.min_baseline_frames = options_.min_baseline_frames;
  if (req.mode == rehab::Mode::Basic) {
    if (req.exercise_ids.empty()) throw ServiceError("BadConfig", 400, "no exercises requested");
    std::set<std::string> seen;
    for (const auto& id : req.exercise_ids) {
      const auto* ex = catalog_.find(id);
      if (!ex) throw ServiceError("BadConfig", 400, "unknown exercise '" + id + "'");
      if (!seen.insert(id).second) throw ServiceError("BadConfig", 400, "exercise '" + id + "' repeated");
      config.exercises.push_back(*ex);
    }
  } else {
    try {
      config.timeline = rehab::build_advanced_timeline(catalog_, req.duration_ms, req.difficulty, req.seed);
    } catch (const std::invalid_argument& e) {
      throw ServiceError("BadConfig", 400, e.what());
    }
    std::set<std::string> seen;
    for (const auto& seg : config.timeline->segments)
      if (seen.insert(seg.exercise_id).second) config.exercises.push_back(*catalog_.find(seg.exercise_id));
  }

  auto live = std::make_shared<Live>();
  {
    std::unique_lock lock(table_mu_);
    do {
      config.session_id = next_id("s_");
    } while (live_.count(config.session_id) || finished_.count(config.session_id));
    config.started_at_ms = now();
    try {
      live->state = rehab::new_session(config);
    } catch (const std::invalid_argument& e) {
      throw ServiceError("BadConfig", 400, e.what());
    }
    live->last_event_at = config.started_at_ms;
    live_.emplace(config.session_id, live);
  }
  return {config.session_id, config.patient_id, config.mode, rehab::Phase::Idle,
          config.started_at_ms, config.exercises, config.timeline};
}

std::shared_ptr<SessionService::Live> SessionService::find_live(const std::string& session_id) const {
  std::shared_lock lock(table_mu_);
  auto it = live_.find(session_id);
  return it == live_.end() ? nullptr : it->second;
}

SessionDescriptor SessionService::describe(const std::string& session_id) const {
  auto live = find_live(session_id);
  if (!live) throw unknown_session(session_id);
  std::lock_guard lock(live->mu);
  const auto& c = live->state.config;
  return {c.session_id, c.patient_id, c.mode, live->state.phase, c.started_at_ms, c.exercises, c.timeline};
}

std::vector<rehab::FeedbackEvent> SessionService::apply(const std::string& session_id,
                                                        const rehab::SessionEvent& event) {
  auto live = find_live(session_id);
  if (!live) throw unknown_session(session_id);
  std::lock_guard lock(live->mu);
  if (live->done) throw unknown_session(session_id);

  rehab::SessionEvent effective = event;
  if (const auto* f = std::get_if<rehab::events::Frame>(&event);
      f && live->state.phase == rehab::Phase::BaselineCapture)
    effective = rehab::events::BaselineFrame{f->frame};

  rehab::Outcome out = rehab::advance_session(std::move(live->state), effective);
  live->state = std::move(out.state);
  if (out.rejection) throw rejection_error(*out.rejection);
  live->last_event_at = now();
  return std::move(out.feedback);
}

std::vector<rehab::FeedbackEvent> SessionService::start_baseline(const std::string& session_id) {
  return apply(session_id, rehab::events::StartBaseline{});
}

std::vector<rehab::FeedbackEvent> SessionService::ingest_frame(const std::string& session_id,
                                                               const features::AUFrame& frame) {
  return apply(session_id, rehab::events::Frame{frame});
}

std::vector<rehab::FeedbackEvent> SessionService::command(const std::string& session_id,
                                                          const rehab::SessionEvent& event) {
  if (is_frame_event(event))
    throw ServiceError("BadRequest", 400, "frames go to /sessions/{id}/frames");
  return apply(session_id, event);
}

std::vector<rehab::FeedbackEvent> SessionService::events_since(const std::string& session_id,
                                                               std::uint64_t since) const {
  auto filter = [since](const std::vector<rehab::FeedbackEvent>& all) {
    std::vector<rehab::FeedbackEvent> out;
    for (const auto& e : all)
      if (e.seq > since) out.push_back(e);
    return out;
  };
  if (auto live = find_live(session_id)) {
    std::lock_guard lock(live->mu);
    return filter(live->state.feedback);
  }
  std::shared_lock lock(table_mu_);
  auto it = finished_.find(session_id);
  if (it == finished_.end()) throw unknown_session(session_id);
  return filter(it->second.feedback);
}

rehab::SessionReport SessionService::finish_locked(const std::string& session_id, Live& live) {
  if (!rehab::is_terminal(live.state.phase))
    live.state = rehab::advance_session(std::move(live.state), rehab::events::Abort{}).state;
  rehab::SessionReport report = rehab::finalize_session(live.state);
  try {
    store_.store_session(report);
  } catch (const store::StoreError& e) {
    throw from_store(e);
  }
  live.done = true;

  std::unique_lock lock(table_mu_);
  finished_[session_id] = {live.state.config.patient_id, live.state.feedback,
                           rehab::session_log_of(live.state)};
  live_.erase(session_id);
  return report;
}

rehab::SessionReport SessionService::complete_session(const std::string& session_id) {
  if (auto live = find_live(session_id)) {
    std::lock_guard lock(live->mu);
    if (!live->done) return finish_locked(session_id, *live);
  }
  std::string patient_id;
  {
    std::shared_lock lock(table_mu_);
    auto it = finished_.find(session_id);
    if (it == finished_.end()) throw unknown_session(session_id);
    patient_id = it->second.patient_id;
  }
  try {
    return store_.load_session(patient_id, session_id);
  } catch (const store::StoreError& e) {
    throw from_store(e);
  }
}

rehab::SessionLog SessionService::session_log(const std::string& session_id) const {
  if (auto live = find_live(session_id)) {
    std::lock_guard lock(live->mu);
    return rehab::session_log_of(live->state);
  }
  std::shared_lock lock(table_mu_);
  auto it = finished_.find(session_id);
  if (it == finished_.end()) throw unknown_session(session_id);
  return it->second.log;
}

std::size_t SessionService::reap_expired() {
  std::vector<std::pair<std::string, std::shared_ptr<Live>>> candidates;
  {
    std::shared_lock lock(table_mu_);
    candidates.assign(live_.begin(), live_.end());
  }
  const std::int64_t t = now();
  std::size_t reaped = 0;
  for (auto& [id, live] : candidates) {
    std::lock_guard lock(live->mu);
    if (live->done || t - live->last_event_at < options_.idle_timeout_ms) continue;
    finish_locked(id, *live);
    ++reaped;
  }
  return reaped;
}

std::size_t SessionService::live_session_count() const {
  std::shared_lock lock(table_mu_);
  return live_.size();
}

std::vector<rehab::SessionReport> SessionService::patient_report(const std::string& patient_id) const {
  try {
    return store_.patient_history(patient_id);
  } catch (const store::StoreError& e) {
    throw from_store(e);
  }
}

std::vector<store::RegionAggregate> SessionService::patient_aggregate(const std::string& patient_id) const {
  try {
    return store::physician_aggregate(store_, patient_id);
  } catch (const store::StoreError& e) {
    throw from_store(e);
  }
}

DetectResult SessionService::detect_features(std::span<const Eigen::VectorXd> feats) const {
  if (!model_) throw ServiceError("NoModelLoaded", 503, "no detection model is loaded");
  try {
    return detect_subject(*model_, feats, model_version_);
  } catch (const std::invalid_argument& e) {
    throw ServiceError("MalformedUpload", 400, e.what());
  }
}

DetectResult SessionService::detect_frames(std::span<const features::AUFrame> frames) const {
  if (!model_) throw ServiceError("NoModelLoaded", 503, "no detection model is loaded");
  if (frames.empty()) throw ServiceError("MalformedUpload", 400, "upload has no frames");
  const features::FeatureEmbedding embedding(model_->hp.D);
  std::vector<Eigen::VectorXd> feats;
  feats.reserve(frames.size());
  for (const auto& f : frames) {
    try {
      feats.push_back(embedding.embed(f));
    } catch (const std::invalid_argument& e) {
      throw ServiceError("MalformedUpload", 400, e.what());
    }
  }
  return detect_features(feats);
}

}  // namespace hc::service
