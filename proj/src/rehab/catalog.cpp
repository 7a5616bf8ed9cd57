#include "hc/rehab/catalog.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace hc::rehab {

namespace {

// Regions and AU codes follow the facial training table: eyebrow (AU1, AU4),
// nose and eye (AU5, AU44, AU9), lip (AU12, AU13, AU19, AU27, AU24, AU18,
// AU33, AU28); articulation reuses the lip/jaw AUs AU25, AU26, AU27.
constexpr const char* kBuiltinCatalog = R"json({
  "v": 1,
  "frame_schema": ["AU1", "AU2", "AU4", "AU5", "AU6", "AU9", "AU12", "AU13", "AU18", "AU19",
                   "AU24", "AU25", "AU26", "AU27", "AU28", "AU33", "AU44"],
  "exercises": [
    {"id": "eyebrow_raise", "region": "eyebrow", "targets": {"AU1": 0.6},
     "instruction_text": "Lift your eyebrows high, as if surprised.",
     "instruction_media": "media/eyebrow_raise.mp4"},
    {"id": "eyebrow_frown", "region": "eyebrow", "targets": {"AU4": 0.6},
     "instruction_text": "Pull your eyebrows together and down into a firm frown.",
     "instruction_media": "media/eyebrow_frown.mp4"},
    {"id": "eyebrow_center_raise", "region": "eyebrow", "targets": {"AU1": 0.5, "AU4": 0.5},
     "instruction_text": "Bring both eyebrows to the centre and lift the forehead.",
     "instruction_media": "media/eyebrow_center_raise.mp4"},
    {"id": "eye_widen", "region": "nose_and_eye", "targets": {"AU5": 0.6},
     "instruction_text": "Open your eyes as wide as you can and stare ahead.",
     "instruction_media": "media/eye_widen.mp4"},
    {"id": "hard_blink", "region": "nose_and_eye", "targets": {"AU44": 0.7},
     "instruction_text": "Close your eyes tightly, then open them again.",
     "instruction_media": "media/hard_blink.mp4"},
    {"id": "nose_wrinkle", "region": "nose_and_eye", "targets": {"AU9": 0.5},
     "instruction_text": "Wrinkle your nose upward.",
     "instruction_media": "media/nose_wrinkle.mp4"},
    {"id": "smile", "region": "lip", "targets": {"AU12": 0.6},
     "instruction_text": "Smile, pulling the corners of your mouth outward and upward.",
     "instruction_media": "media/smile.mp4"},
    {"id": "cheek_puff", "region": "lip", "targets": {"AU13": 0.5, "AU33": 0.5},
     "instruction_text": "Puff out your cheeks and hold for three seconds.",
     "instruction_media": "media/cheek_puff.mp4", "hold_ms": 3000},
    {"id": "tongue_move", "region": "lip", "targets": {"AU19": 0.5},
     "instruction_text": "Stick out your tongue and move it side to side.",
     "instruction_media": "media/tongue_move.mp4"},
    {"id": "mouth_widen", "region": "lip", "targets": {"AU27": 0.6},
     "instruction_text": "Stretch your mouth open wide.",
     "instruction_media": "media/mouth_widen.mp4"},
    {"id": "lip_purse", "region": "lip", "targets": {"AU24": 0.5},
     "instruction_text": "Press your lips firmly together.",
     "instruction_media": "media/lip_purse.mp4"},
    {"id": "lip_pout", "region": "lip", "targets": {"AU18": 0.5},
     "instruction_text": "Push your lips forward into a pout.",
     "instruction_media": "media/lip_pout.mp4"},
    {"id": "lip_suck", "region": "lip", "targets": {"AU28": 0.5},
     "instruction_text": "Suck your lips in between your teeth.",
     "instruction_media": "media/lip_suck.mp4"},
    {"id": "say_a", "region": "articulation", "targets": {"AU25": 0.6, "AU26": 0.6, "AU27": 0.4},
     "instruction_text": "Say a long, open 'ah'.",
     "instruction_media": "media/say_a.mp4"},
    {"id": "say_o", "region": "articulation", "targets": {"AU25": 0.5, "AU26": 0.5},
     "instruction_text": "Say a round 'oh'.",
     "instruction_media": "media/say_o.mp4"},
    {"id": "say_i", "region": "articulation", "targets": {"AU25": 0.6, "AU27": 0.5},
     "instruction_text": "Say a wide 'ee'.",
     "instruction_media": "media/say_i.mp4"}
  ]
})json";

}  // namespace

std::string_view to_string(FacialRegion region) {
  switch (region) {
    case FacialRegion::Eyebrow: return "eyebrow";
    case FacialRegion::NoseAndEye: return "nose_and_eye";
    case FacialRegion::Lip: return "lip";
    case FacialRegion::Articulation: return "articulation";
  }
  return "unknown";
}

FacialRegion region_from_string(std::string_view text) {
  for (FacialRegion r : kRegionCycle)
    if (to_string(r) == text) return r;
  throw std::invalid_argument("unknown facial region '" + std::string(text) + "'");
}

void ExerciseSpec::validate() const {
  if (id.empty()) throw std::invalid_argument("exercise id is empty");
  if (targets.empty()) throw std::invalid_argument("exercise " + id + " has no target AUs");
  for (const auto& [au, amp] : targets)
    if (!(amp > 0.0 && amp <= 1.0))
      throw std::invalid_argument("exercise " + id + ": target amplitude for " + au +
                                  " must be in (0,1]");
  if (reps < 1) throw std::invalid_argument("exercise " + id + ": reps must be >= 1");
  if (hold_ms < 0 || hold_ms >= timeout_ms)
    throw std::invalid_argument("exercise " + id + ": hold_ms must be in [0, timeout_ms)");
}

nlohmann::json exercise_to_json(const ExerciseSpec& spec) {
  return {{"id", spec.id},
          {"region", to_string(spec.region)},
          {"targets", spec.targets},
          {"reps", spec.reps},
          {"hold_ms", spec.hold_ms},
          {"timeout_ms", spec.timeout_ms},
          {"instruction_text", spec.instruction_text},
          {"instruction_media", spec.instruction_media}};
}

ExerciseSpec exercise_from_json(const nlohmann::json& j) {
  ExerciseSpec s;
  s.id = j.at("id").get<std::string>();
  s.region = region_from_string(j.at("region").get<std::string>());
  s.targets = j.at("targets").get<std::map<std::string, double>>();
  s.reps = j.value("reps", s.reps);
  s.hold_ms = j.value("hold_ms", s.hold_ms);
  s.timeout_ms = j.value("timeout_ms", s.timeout_ms);
  s.instruction_text = j.value("instruction_text", std::string());
  s.instruction_media = j.value("instruction_media", std::string());
  s.validate();
  return s;
}

ExerciseCatalog::ExerciseCatalog(std::vector<std::string> frame_schema,
                                 std::vector<ExerciseSpec> exercises)
    : frame_schema_(std::move(frame_schema)), exercises_(std::move(exercises)) {
  if (exercises_.empty()) throw CatalogError("catalog has no exercises");
  const std::set<std::string> schema(frame_schema_.begin(), frame_schema_.end());
  std::set<std::string> ids;
  for (const auto& e : exercises_) {
    try {
      e.validate();
    } catch (const std::invalid_argument& err) {
      throw CatalogError(err.what());
    }
    if (!ids.insert(e.id).second) throw CatalogError("duplicate exercise id " + e.id);
    for (const auto& [au, amp] : e.targets)
      if (!schema.count(au))
        throw CatalogError("exercise " + e.id + " targets " + au + ", not in the frame schema");
  }
}

const ExerciseSpec* ExerciseCatalog::find(std::string_view id) const {
  auto it = std::find_if(exercises_.begin(), exercises_.end(),
                         [&](const ExerciseSpec& e) { return e.id == id; });
  return it == exercises_.end() ? nullptr : &*it;
}

std::vector<const ExerciseSpec*> ExerciseCatalog::in_region(FacialRegion region) const {
  std::vector<const ExerciseSpec*> out;
  for (const auto& e : exercises_)
    if (e.region == region) out.push_back(&e);
  return out;
}

nlohmann::json ExerciseCatalog::to_json() const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : exercises_) list.push_back(exercise_to_json(e));
  return {{"v", 1}, {"frame_schema", frame_schema_}, {"exercises", std::move(list)}};
}

ExerciseCatalog catalog_from_json(const nlohmann::json& j) {
  try {
    if (j.value("v", 1) != 1) throw CatalogError("unsupported catalog version");
    std::vector<ExerciseSpec> exercises;
    for (const auto& e : j.at("exercises")) exercises.push_back(exercise_from_json(e));
    return ExerciseCatalog(j.at("frame_schema").get<std::vector<std::string>>(),
                           std::move(exercises));
  } catch (const nlohmann::json::exception& e) {
    throw CatalogError(std::string("malformed catalog: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CatalogError(std::string("malformed catalog: ") + e.what());
  }
}

ExerciseCatalog load_exercise_catalog() { return catalog_from_json(nlohmann::json::parse(kBuiltinCatalog)); }

ExerciseCatalog load_exercise_catalog(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw CatalogError(std::string("malformed catalog: ") + e.what());
  }
  return catalog_from_json(j);
}

ExerciseCatalog load_exercise_catalog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CatalogError("cannot open catalog " + path.string());
  return load_exercise_catalog(in);
}

}  // namespace hc::rehab
