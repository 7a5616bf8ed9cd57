#include "hc/features/au_frame.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace hc::features {

namespace {

std::string describe(FrameStreamError::Kind kind, std::size_t line_no,
                     const std::string& au, const std::string& detail) {
  std::ostringstream os;
  os << to_string(kind) << " at line " << line_no;
  if (!au.empty()) os << " (" << au << ")";
  if (!detail.empty()) os << ": " << detail;
  return os.str();
}

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

FrameStreamError::FrameStreamError(Kind kind, std::size_t line_no,
                                   std::string au_code,
                                   const std::string& detail)
    : std::runtime_error(describe(kind, line_no, au_code, detail)),
      kind_(kind),
      line_(line_no),
      au_code_(std::move(au_code)) {}

std::string_view to_string(FrameStreamError::Kind kind) {
  switch (kind) {
    case FrameStreamError::Kind::MalformedLine: return "MalformedLine";
    case FrameStreamError::Kind::IntensityOutOfRange: return "IntensityOutOfRange";
    case FrameStreamError::Kind::NonMonotoneTimestamp: return "NonMonotoneTimestamp";
    case FrameStreamError::Kind::InconsistentAUSet: return "InconsistentAUSet";
  }
  return "Unknown";
}

AUFrame frame_from_json(const nlohmann::json& record, std::size_t line_no) {
  using Kind = FrameStreamError::Kind;
  auto malformed = [line_no](const std::string& why) {
    return FrameStreamError(Kind::MalformedLine, line_no, {}, why);
  };
  if (!record.is_object()) throw malformed("record is not an object");

  auto t = record.find("t_ms");
  if (t == record.end() || !t->is_number_integer())
    throw malformed("t_ms missing or not an integer");
  if (t->is_number_unsigned()) {
    if (t->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX))
      throw malformed("t_ms too large");
  } else if (t->get<std::int64_t>() < 0) {
    throw malformed("t_ms negative");
  }

  auto au = record.find("au");
  if (au == record.end() || !au->is_object())
    throw malformed("au missing or not an object");
  if (au->empty()) throw malformed("au is empty");

  AUFrame frame;
  frame.t_ms = t->get<std::int64_t>();
  for (const auto& [code, value] : au->items()) {
    if (code.empty()) throw malformed("empty AU code");
    if (!value.is_number()) throw malformed("intensity for " + code + " is not a number");
    const double v = value.get<double>();
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw FrameStreamError(Kind::IntensityOutOfRange, line_no, code,
                             "value " + value.dump());
    frame.intensities.emplace(code, v);
  }
  return frame;
}

nlohmann::json frame_to_json(const AUFrame& frame) {
  nlohmann::json au = nlohmann::json::object();
  for (const auto& [code, v] : frame.intensities) au[code] = v;
  return {{"t_ms", frame.t_ms}, {"au", std::move(au)}};
}

void FrameStreamChecker::check(const AUFrame& frame, std::size_t line_no) {
  using Kind = FrameStreamError::Kind;
  if (last_t_ms_ && frame.t_ms <= *last_t_ms_)
    throw FrameStreamError(Kind::NonMonotoneTimestamp, line_no, {},
                           "t_ms " + std::to_string(frame.t_ms) + " after " +
                               std::to_string(*last_t_ms_));
  if (last_t_ms_) {
    bool same = frame.intensities.size() == keys_.size();
    std::size_t i = 0;
    for (auto it = frame.intensities.begin(); same && it != frame.intensities.end(); ++it, ++i)
      same = it->first == keys_[i];
    if (!same) throw FrameStreamError(Kind::InconsistentAUSet, line_no, {}, "AU key set differs");
  } else {
    keys_.clear();
    for (const auto& kv : frame.intensities) keys_.push_back(kv.first);
  }
  last_t_ms_ = frame.t_ms;
}

std::vector<AUFrame> parse_au_frame_stream(std::istream& input) {
  std::vector<AUFrame> frames;
  FrameStreamChecker checker;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(input, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FrameStreamError(FrameStreamError::Kind::MalformedLine, line_no, {}, e.what());
    }
    AUFrame frame = frame_from_json(record, line_no);
    checker.check(frame, line_no);
    frames.push_back(std::move(frame));
  }
  return frames;
}

std::vector<AUFrame> parse_au_frame_stream(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_au_frame_stream(in);
}

void write_au_frame_stream(std::ostream& out, std::span<const AUFrame> frames) {
  for (const auto& f : frames) out << frame_to_json(f).dump() << '\n';
}

}  // namespace hc::features
