#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "hc/detector/model.hpp"

namespace hc::detector {

// Weights file: "HCMD1", u32 D F C1 C2 k, then per tensor
// (u32 name length, name, u32 rank, u32 dims..., f64 LE row-major values).

class ModelFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_model(const DetectionModel& model, std::ostream& out);
void save_model(const DetectionModel& model, const std::filesystem::path& path);

/// Training hyperparameters other than the dimensions are not stored and come
/// back as defaults.
DetectionModel load_model(std::istream& in);
DetectionModel load_model(const std::filesystem::path& path);

/// "hcmd1-" + FNV-1a 64 of the serialized weights, as hex.
std::string model_version(const DetectionModel& model);

}  // namespace hc::detector
