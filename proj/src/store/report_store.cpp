#include "hc/store/report_store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace hc::store {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StoreError(StoreError::Code::Io, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Exclusive flock held for the lifetime of the object.
class FileLock {
 public:
  explicit FileLock(const fs::path& path) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw StoreError(StoreError::Code::Io, "cannot open lock " + path.string());
    while (::flock(fd_, LOCK_EX) != 0) {
      if (errno != EINTR) {
        ::close(fd_);
        throw StoreError(StoreError::Code::Io, "cannot lock " + path.string());
      }
    }
  }
  ~FileLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  FileLock(const FileLock&) = delete;
  FileLock& operator=(const FileLock&) = delete;

 private:
  int fd_ = -1;
};

void require_id(std::string_view what, const std::string& id) {
  if (!is_valid_id(id))
    throw StoreError(StoreError::Code::InvalidId, std::string(what) + " '" + id + "' is not a valid id");
}

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

fs::path default_data_root() {
  const char* env = std::getenv("HC_DATA_DIR");
  return env && *env ? fs::path(env) : fs::path("data");
}

bool is_valid_id(std::string_view id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
  });
}

std::string_view to_string(StoreError::Code code) {
  switch (code) {
    case StoreError::Code::InvalidId: return "InvalidId";
    case StoreError::Code::DuplicatePatient: return "DuplicatePatient";
    case StoreError::Code::UnknownPatient: return "UnknownPatient";
    case StoreError::Code::DuplicateSession: return "DuplicateSession";
    case StoreError::Code::UnknownSession: return "UnknownSession";
    case StoreError::Code::NoSessions: return "NoSessions";
    case StoreError::Code::InvalidReport: return "InvalidReport";
    case StoreError::Code::Io: return "Io";
  }
  return "Unknown";
}

ReportStore::ReportStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_ / "patients", ec);
  if (ec) throw StoreError(StoreError::Code::Io, "cannot create " + (root_ / "patients").string());
}

fs::path ReportStore::patient_dir(const std::string& id) const { return root_ / "patients" / id; }

void ReportStore::atomic_write(const fs::path& path, const std::string& content) {
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
  {
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw StoreError(StoreError::Code::Io, "cannot create " + tmp.string());
    const char* p = content.data();
    std::size_t left = content.size();
    while (left > 0) {
      const ssize_t n = ::write(fd, p, left);
      if (n < 0) {
        if (errno == EINTR) continue;
        ::close(fd);
        fs::remove(tmp);
        throw StoreError(StoreError::Code::Io, "write failed for " + tmp.string());
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
  }
  if (fault_hook_) fault_hook_(path);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw StoreError(StoreError::Code::Io, "rename failed for " + path.string() + ": " + ec.message());
  }
}

PatientRecord ReportStore::read_index(const std::string& patient_id) const {
  const fs::path index = patient_dir(patient_id) / "index.json";
  if (!fs::exists(index))
    throw StoreError(StoreError::Code::UnknownPatient, "unknown patient '" + patient_id + "'");
  try {
    const auto j = nlohmann::json::parse(read_file(index));
    PatientRecord rec;
    rec.patient_id = j.at("patient_id").get<std::string>();
    rec.alias = j.at("alias").get<std::string>();
    rec.created_at_ms = j.at("created_at").get<std::int64_t>();
    rec.session_ids = j.at("sessions").get<std::vector<std::string>>();
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(StoreError::Code::Io, "corrupt index for '" + patient_id + "': " + e.what());
  }
}

void ReportStore::write_index(const PatientRecord& rec) {
  const nlohmann::json j = {{"v", 1},
                            {"patient_id", rec.patient_id},
                            {"alias", rec.alias},
                            {"created_at", rec.created_at_ms},
                            {"sessions", rec.session_ids}};
  atomic_write(patient_dir(rec.patient_id) / "index.json", j.dump(2) + "\n");
}

PatientRecord ReportStore::create_patient(const std::string& patient_id, const std::string& alias,
                                          std::int64_t created_at_ms) {
  require_id("patient id", patient_id);
  const fs::path dir = patient_dir(patient_id);
  std::error_code ec;
  fs::create_directories(dir / "sessions", ec);
  if (ec) throw StoreError(StoreError::Code::Io, "cannot create " + dir.string());
  FileLock lock(dir / "index.lock");
  if (fs::exists(dir / "index.json"))
    throw StoreError(StoreError::Code::DuplicatePatient, "patient '" + patient_id + "' exists");
  PatientRecord rec{patient_id, alias, created_at_ms, {}};
  write_index(rec);
  return rec;
}

bool ReportStore::has_patient(const std::string& patient_id) const {
  return is_valid_id(patient_id) && fs::exists(patient_dir(patient_id) / "index.json");
}

PatientRecord ReportStore::patient(const std::string& patient_id) const {
  require_id("patient id", patient_id);
  return read_index(patient_id);
}

std::vector<std::string> ReportStore::patient_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(root_ / "patients"))
    if (entry.is_directory() && fs::exists(entry.path() / "index.json"))
      ids.push_back(entry.path().filename().string());
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string ReportStore::store_session(const rehab::SessionReport& report) {
  try {
    report.validate();
  } catch (const rehab::ReportError& e) {
    throw StoreError(StoreError::Code::InvalidReport, e.what());
  }
  require_id("patient id", report.patient_id);
  require_id("session id", report.session_id);
  const fs::path dir = patient_dir(report.patient_id);
  if (!fs::exists(dir / "index.json"))
    throw StoreError(StoreError::Code::UnknownPatient, "unknown patient '" + report.patient_id + "'");

  FileLock lock(dir / "index.lock");
  PatientRecord rec = read_index(report.patient_id);
  const fs::path file = dir / "sessions" / (report.session_id + ".json");
  // The index is authoritative; a report file it does not list is debris from
  // an interrupted write and gets replaced.
  if (std::find(rec.session_ids.begin(), rec.session_ids.end(), report.session_id) !=
      rec.session_ids.end())
    throw StoreError(StoreError::Code::DuplicateSession,
                     "session '" + report.session_id + "' is already stored");
  atomic_write(file, rehab::serialize_report(report));
  rec.session_ids.push_back(report.session_id);
  write_index(rec);
  return report.session_id;
}

rehab::SessionReport ReportStore::load_session(const std::string& patient_id,
                                               const std::string& session_id) const {
  require_id("patient id", patient_id);
  require_id("session id", session_id);
  const PatientRecord rec = read_index(patient_id);
  if (std::find(rec.session_ids.begin(), rec.session_ids.end(), session_id) == rec.session_ids.end())
    throw StoreError(StoreError::Code::UnknownSession, "unknown session '" + session_id + "'");
  try {
    return rehab::report_from_json(
        nlohmann::json::parse(read_file(patient_dir(patient_id) / "sessions" / (session_id + ".json"))));
  } catch (const nlohmann::json::exception& e) {
    throw StoreError(StoreError::Code::Io, "corrupt report '" + session_id + "': " + e.what());
  } catch (const rehab::ReportError& e) {
    throw StoreError(StoreError::Code::Io, "corrupt report '" + session_id + "': " + e.what());
  }
}

std::vector<rehab::SessionReport> ReportStore::patient_history(const std::string& patient_id) const {
  require_id("patient id", patient_id);
  const PatientRecord rec = read_index(patient_id);
  std::vector<rehab::SessionReport> out;
  out.reserve(rec.session_ids.size());
  for (const auto& sid : rec.session_ids) out.push_back(load_session(patient_id, sid));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.started_at_ms < b.started_at_ms;
  });
  return out;
}

void ReportStore::purge_session(const std::string& patient_id, const std::string& session_id,
                                const std::string& reason) {
  require_id("patient id", patient_id);
  require_id("session id", session_id);
  const fs::path dir = patient_dir(patient_id);
  if (!fs::exists(dir / "index.json"))
    throw StoreError(StoreError::Code::UnknownPatient, "unknown patient '" + patient_id + "'");
  FileLock lock(dir / "index.lock");
  PatientRecord rec = read_index(patient_id);
  auto it = std::find(rec.session_ids.begin(), rec.session_ids.end(), session_id);
  if (it == rec.session_ids.end())
    throw StoreError(StoreError::Code::UnknownSession, "unknown session '" + session_id + "'");

  {
    std::ofstream audit(dir / "audit.jsonl", std::ios::app | std::ios::binary);
    audit << nlohmann::json{{"action", "purge"},
                            {"session_id", session_id},
                            {"reason", reason},
                            {"at", now_ms()}}
                 .dump()
          << '\n';
    audit.flush();
    if (!audit) throw StoreError(StoreError::Code::Io, "cannot append audit entry");
  }
  rec.session_ids.erase(it);
  write_index(rec);
  std::error_code ec;
  fs::remove(dir / "sessions" / (session_id + ".json"), ec);
}

}  // namespace hc::store
