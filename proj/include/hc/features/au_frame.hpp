#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hc::features {

/// One timestamped sample of action-unit activations, each in [0, 1].
struct AUFrame {
  std::int64_t t_ms = 0;
  std::map<std::string, double> intensities;

  bool operator==(const AUFrame&) const = default;
};

class FrameStreamError : public std::runtime_error {
 public:
  enum class Kind {
    MalformedLine,
    IntensityOutOfRange,
    NonMonotoneTimestamp,
    InconsistentAUSet,
  };

  FrameStreamError(Kind kind, std::size_t line_no, std::string au_code,
                   const std::string& detail);

  Kind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& au_code() const noexcept { return au_code_; }

 private:
  Kind kind_;
  std::size_t line_;
  std::string au_code_;
};

std::string_view to_string(FrameStreamError::Kind kind);

/// Decodes one JSON record; structural and range checks only, `line_no` is
/// used for error reporting.
AUFrame frame_from_json(const nlohmann::json& record, std::size_t line_no = 1);
nlohmann::json frame_to_json(const AUFrame& frame);

/// Enforces the stream invariants (strictly increasing t_ms, identical AU
/// key set) one frame at a time.
class FrameStreamChecker {
 public:
  void check(const AUFrame& frame, std::size_t line_no);
  std::optional<std::int64_t> last_t_ms() const { return last_t_ms_; }

 private:
  std::optional<std::int64_t> last_t_ms_;
  std::vector<std::string> keys_;
};

std::vector<AUFrame> parse_au_frame_stream(std::istream& input);
std::vector<AUFrame> parse_au_frame_stream(std::string_view text);

void write_au_frame_stream(std::ostream& out, std::span<const AUFrame> frames);

}  // namespace hc::features
