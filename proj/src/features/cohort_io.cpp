#include "hc/features/cohort_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

namespace hc::features {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 5> kFeatureMagic = {'A', 'U', 'F', 'V', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("features.bin truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("features.bin truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

std::string read_trimmed(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto b = s.find_first_not_of(" \t\r\n");
  const auto e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

}  // namespace

void write_feature_file(std::ostream& out, std::span<const Eigen::VectorXd> rows) {
  const std::size_t dim = rows.empty() ? 0 : static_cast<std::size_t>(rows.front().size());
  out.write(kFeatureMagic.data(), kFeatureMagic.size());
  put_u32(out, static_cast<std::uint32_t>(rows.size()));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& r : rows) {
    if (static_cast<std::size_t>(r.size()) != dim)
      throw std::invalid_argument("feature rows have differing dimension");
    for (Eigen::Index i = 0; i < r.size(); ++i) put_f64(out, r(i));
  }
}

std::vector<Eigen::VectorXd> read_feature_file(std::istream& in) {
  std::array<char, 5> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kFeatureMagic)
    throw std::runtime_error("features.bin: bad magic");
  const std::uint32_t count = get_u32(in);
  const std::uint32_t dim = get_u32(in);
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    Eigen::VectorXd v(dim);
    for (std::uint32_t i = 0; i < dim; ++i) v(i) = get_f64(in);
    rows.push_back(std::move(v));
  }
  return rows;
}

void write_subject(const fs::path& dir, const LabeledSubject& subject) {
  subject.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "label.txt");
    out << to_string(subject.label) << '\n';
  }
  {
    std::ofstream out(dir / "frames.jsonl");
    write_au_frame_stream(out, subject.frames);
  }
  if (!subject.feature_vectors.empty()) {
    std::ofstream out(dir / "features.bin", std::ios::binary);
    write_feature_file(out, subject.feature_vectors);
  }
}

LabeledSubject read_subject(const fs::path& dir) {
  LabeledSubject subject;
  subject.subject_id = dir.filename().string();
  subject.label = label_from_string(read_trimmed(dir / "label.txt"));
  {
    std::ifstream in(dir / "frames.jsonl");
    if (!in) throw std::runtime_error("cannot open " + (dir / "frames.jsonl").string());
    subject.frames = parse_au_frame_stream(in);
  }
  const fs::path features = dir / "features.bin";
  if (fs::exists(features)) {
    std::ifstream in(features, std::ios::binary);
    subject.feature_vectors = read_feature_file(in);
  }
  subject.validate();
  return subject;
}

void write_cohort(const fs::path& root, std::span<const LabeledSubject> cohort) {
  fs::create_directories(root);
  for (const auto& s : cohort) write_subject(root / s.subject_id, s);
}

std::vector<LabeledSubject> read_cohort(const fs::path& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("cohort directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory() && fs::exists(entry.path() / "label.txt")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<LabeledSubject> cohort;
  cohort.reserve(dirs.size());
  for (const auto& d : dirs) cohort.push_back(read_subject(d));
  return cohort;
}

}  // namespace hc::features
