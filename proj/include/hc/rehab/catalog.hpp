#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hc::rehab {

enum class FacialRegion { Eyebrow, NoseAndEye, Lip, Articulation };

inline constexpr FacialRegion kRegionCycle[] = {FacialRegion::Eyebrow, FacialRegion::NoseAndEye,
                                                FacialRegion::Lip, FacialRegion::Articulation};

std::string_view to_string(FacialRegion region);
FacialRegion region_from_string(std::string_view text);

struct ExerciseSpec {
  std::string id;
  FacialRegion region = FacialRegion::Lip;
  /// AU code -> target amplitude in (0, 1]. Codes are opaque identifiers.
  std::map<std::string, double> targets;
  std::uint32_t reps = 3;
  std::int64_t hold_ms = 500;
  std::int64_t timeout_ms = 15000;
  std::string instruction_text;
  std::string instruction_media;

  void validate() const;
  bool operator==(const ExerciseSpec&) const = default;
};

nlohmann::json exercise_to_json(const ExerciseSpec& spec);
ExerciseSpec exercise_from_json(const nlohmann::json& j);

class CatalogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ExerciseCatalog {
 public:
  ExerciseCatalog(std::vector<std::string> frame_schema, std::vector<ExerciseSpec> exercises);

  const std::vector<ExerciseSpec>& exercises() const { return exercises_; }
  const std::vector<std::string>& frame_schema() const { return frame_schema_; }
  const ExerciseSpec* find(std::string_view id) const;
  std::vector<const ExerciseSpec*> in_region(FacialRegion region) const;

  nlohmann::json to_json() const;

 private:
  std::vector<std::string> frame_schema_;
  std::vector<ExerciseSpec> exercises_;
};

/// The built-in facial training catalog.
ExerciseCatalog load_exercise_catalog();
/// Throws CatalogError on malformed input or unknown target AUs.
ExerciseCatalog load_exercise_catalog(std::istream& in);
ExerciseCatalog load_exercise_catalog(const std::filesystem::path& path);
ExerciseCatalog catalog_from_json(const nlohmann::json& j);

}  // namespace hc::rehab
