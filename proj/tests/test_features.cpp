#include <doctest.h>

#include <filesystem>
#include <random>
#include <set>
#include <sstream>

#include "hc/features/au_frame.hpp"
#include "hc/features/cohort.hpp"
#include "hc/features/cohort_io.hpp"

using namespace hc::features;
namespace fs = std::filesystem;

namespace {

template <class Fn>
FrameStreamError capture(Fn&& fn) {
  try {
    fn();
  } catch (const FrameStreamError& e) {
    return e;
  }
  FAIL("expected FrameStreamError");
  throw std::logic_error("unreachable");
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hc_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("single record parses to one frame") {
  const auto frames = parse_au_frame_stream(R"({"t_ms":0,"au":{"AU12":0.0,"AU6":0.0}})");
  REQUIRE(frames.size() == 1);
  CHECK(frames[0].t_ms == 0);
  CHECK(frames[0].intensities.size() == 2);
}

TEST_CASE("stream errors carry kind, line and AU") {
  auto e = capture([] {
    parse_au_frame_stream("{\"t_ms\":0,\"au\":{\"AU12\":0.1}}\n{\"t_ms\":0,\"au\":{\"AU12\":0.2}}\n");
  });
  CHECK(e.kind() == FrameStreamError::Kind::NonMonotoneTimestamp);
  CHECK(e.line() == 2);

  e = capture([] { parse_au_frame_stream(R"({"t_ms":0,"au":{"AU12":1.5}})"); });
  CHECK(e.kind() == FrameStreamError::Kind::IntensityOutOfRange);
  CHECK(e.line() == 1);
  CHECK(e.au_code() == "AU12");

  e = capture([] {
    parse_au_frame_stream("{\"t_ms\":0,\"au\":{\"AU12\":0.1}}\n{\"t_ms\":5,\"au\":{\"AU6\":0.2}}\n");
  });
  CHECK(e.kind() == FrameStreamError::Kind::InconsistentAUSet);
  CHECK(e.line() == 2);

  e = capture([] { parse_au_frame_stream("{\"t_ms\":0,\"au\":{\"AU12\":0.1}}\n\nnot json\n"); });
  CHECK(e.kind() == FrameStreamError::Kind::MalformedLine);
  CHECK(e.line() == 3);

  e = capture([] { parse_au_frame_stream(R"({"t_ms":-1,"au":{"AU12":0.1}})"); });
  CHECK(e.kind() == FrameStreamError::Kind::MalformedLine);
  e = capture([] { parse_au_frame_stream(R"({"t_ms":1.5,"au":{"AU12":0.1}})"); });
  CHECK(e.kind() == FrameStreamError::Kind::MalformedLine);
  e = capture([] { parse_au_frame_stream(R"({"t_ms":1,"au":{}})"); });
  CHECK(e.kind() == FrameStreamError::Kind::MalformedLine);
}

TEST_CASE("serialize then parse is the identity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AUFrame> frames;
    std::int64_t t = 0;
    for (int i = 0; i < 15; ++i) {
      t += 1 + static_cast<std::int64_t>(rng() % 50);
      frames.push_back({t, {{"AU1", u(rng)}, {"AU12", u(rng)}, {"AU44", u(rng)}}});
    }
    std::ostringstream out;
    write_au_frame_stream(out, frames);
    CHECK(parse_au_frame_stream(out.str()) == frames);
  }
}

TEST_CASE("cohort counts, labels and determinism") {
  CohortConfig cfg;
  const auto a = synthesize_cohort(cfg);
  const auto b = synthesize_cohort(cfg);
  REQUIRE(a.size() == 105);
  std::size_t healthy = 0;
  for (const auto& s : a) healthy += s.label == Label::Healthy;
  CHECK(healthy == 55);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].subject_id == b[i].subject_id);
    CHECK(a[i].frames == b[i].frames);
    REQUIRE(a[i].feature_vectors.size() == b[i].feature_vectors.size());
    for (std::size_t f = 0; f < a[i].feature_vectors.size(); ++f)
      CHECK(a[i].feature_vectors[f] == b[i].feature_vectors[f]);
  }
}

TEST_CASE("noise-free peaks: 0.8 healthy, 0.8 x attenuation hypomimia") {
  CohortConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.n_healthy = 2;
  cfg.n_hypomimia = 2;
  for (const auto& s : synthesize_cohort(cfg)) {
    const double peak = s.label == Label::Healthy ? 0.8 : 0.8 * 0.4;
    const std::size_t neutral = neutral_frame_count(s.frames.size());
    for (std::size_t i = 0; i < s.frames.size(); ++i)
      for (const auto& [au, v] : s.frames[i].intensities) {
        const bool expressive = au == "AU6" || au == "AU12" || au == "AU25" || au == "AU26";
        CHECK(v == doctest::Approx(i >= neutral && expressive ? peak : 0.0).epsilon(1e-15));
      }
  }
}

TEST_CASE("generator balance and segment structure over random configs") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    CohortConfig cfg;
    cfg.n_healthy = 1 + rng() % 6;
    cfg.n_hypomimia = 1 + rng() % 6;
    cfg.frames_per_subject = 2 + rng() % 20;
    cfg.attenuation = 0.1 + 0.8 * std::uniform_real_distribution<double>(0, 1)(rng);
    cfg.noise_sigma = 0.0;
    cfg.feature_dim = 4 + rng() % 8;
    cfg.seed = rng();
    const auto cohort = synthesize_cohort(cfg);
    REQUIRE(cohort.size() == cfg.n_healthy + cfg.n_hypomimia);
    std::size_t healthy = 0;
    for (const auto& s : cohort) {
      healthy += s.label == Label::Healthy;
      REQUIRE(s.frames.size() == cfg.frames_per_subject);
      REQUIRE(s.feature_vectors.size() == s.frames.size());
      CHECK(static_cast<std::size_t>(s.feature_vectors[0].size()) == cfg.feature_dim);
      const std::size_t neutral = neutral_frame_count(s.frames.size());
      CHECK(neutral == s.frames.size() / 4);
      const double peak = s.label == Label::Healthy ? 0.8 : 0.8 * cfg.attenuation;
      CHECK(s.frames.back().intensities.at("AU12") == doctest::Approx(peak));
      CHECK(s.frames.front().intensities.at("AU12") == doctest::Approx(neutral > 0 ? 0.0 : peak));
    }
    CHECK(healthy == cfg.n_healthy);
  }
}

TEST_CASE("invalid cohort configs are rejected") {
  CohortConfig cfg;
  cfg.attenuation = 1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.n_healthy = 0;
  CHECK_THROWS_AS(synthesize_cohort(cfg), std::invalid_argument);
  cfg = {};
  cfg.noise_sigma = -0.1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("split sizes follow floor allocation") {
  auto make = [](std::size_t n) {
    CohortConfig cfg;
    cfg.n_healthy = n / 2;
    cfg.n_hypomimia = n - n / 2;
    cfg.frames_per_subject = 4;
    cfg.feature_dim = 4;
    return synthesize_cohort(cfg);
  };
  const auto hundred = make(100);
  auto s = split_by_subject(hundred, {}, 1);
  CHECK(s.train.size() == 60);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);

  const auto ten = make(10);
  s = split_by_subject(ten, {}, 1);
  CHECK(s.train.size() == 6);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 2);

  const auto two = make(2);
  CHECK_THROWS_AS(split_by_subject(two, {}, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_by_subject(hundred, {0.5, 0.2, 0.2}, 1), std::invalid_argument);
}

TEST_CASE("split is a deterministic partition for all seeds") {
  CohortConfig cfg;
  cfg.frames_per_subject = 4;
  cfg.feature_dim = 4;
  const auto cohort = synthesize_cohort(cfg);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = split_by_subject(cohort, {}, seed);
    std::multiset<std::string> ids;
    for (const auto* part : {&s.train, &s.val, &s.test})
      for (const auto& subj : *part) ids.insert(subj.subject_id);
    CHECK(ids.size() == cohort.size());
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == cohort.size());
    const auto again = split_by_subject(cohort, {}, seed);
    for (std::size_t i = 0; i < s.test.size(); ++i) CHECK(again.test[i].subject_id == s.test[i].subject_id);
  }
}

TEST_CASE("smile selection skips the neutral lead-in") {
  LabeledSubject s;
  for (int i = 0; i < 8; ++i) s.frames.push_back({i, {{"AU12", 0.0}}});
  const auto idx = select_frames(s, FrameSelection::Smile);
  REQUIRE(idx.size() == 6);
  CHECK(idx.front() == 2);
  CHECK(select_frames(s, FrameSelection::All).size() == 8);
  s.frames.resize(1);
  CHECK(select_frames(s, FrameSelection::Smile).size() == 1);
}

TEST_CASE("cohort directory round trip") {
  CohortConfig cfg;
  cfg.n_healthy = 3;
  cfg.n_hypomimia = 2;
  cfg.frames_per_subject = 6;
  cfg.feature_dim = 5;
  const auto cohort = synthesize_cohort(cfg);
  const auto dir = scratch_dir("cohort");
  write_cohort(dir, cohort);
  const auto back = read_cohort(dir);
  REQUIRE(back.size() == cohort.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].subject_id == cohort[i].subject_id);
    CHECK(back[i].label == cohort[i].label);
    CHECK(back[i].frames == cohort[i].frames);
    REQUIRE(back[i].feature_vectors.size() == cohort[i].feature_vectors.size());
    for (std::size_t f = 0; f < back[i].feature_vectors.size(); ++f)
      CHECK(back[i].feature_vectors[f] == cohort[i].feature_vectors[f]);
  }
  fs::remove_all(dir);
}

TEST_CASE("feature file header and rejection of bad magic") {
  std::vector<Eigen::VectorXd> rows = {Eigen::VectorXd::Constant(3, 0.25), Eigen::VectorXd::Constant(3, -1.5)};
  std::stringstream buf;
  write_feature_file(buf, rows);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 5) == "AUFV1");
  CHECK(bytes.size() == 5 + 4 + 4 + 6 * 8);
  CHECK(static_cast<unsigned char>(bytes[5]) == 2);  // little-endian count
  CHECK(static_cast<unsigned char>(bytes[9]) == 3);  // little-endian D
  std::stringstream in(bytes);
  const auto back = read_feature_file(in);
  REQUIRE(back.size() == 2);
  CHECK(back[1] == rows[1]);

  std::stringstream bad("AUFV2" + bytes.substr(5));
  CHECK_THROWS(read_feature_file(bad));
  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS(read_feature_file(truncated));
}

TEST_CASE("embedding is fixed across instances") {
  const FeatureEmbedding a(16), b(16);
  Eigen::Matrix<double, 8, 1> x;
  x << 0.1, 0.2, 0.0, 0.8, 0.0, 0.8, 0.5, 0.4;
  CHECK(a.embed(x) == b.embed(x));
  AUFrame missing{0, {{"AU12", 0.5}}};
  CHECK_THROWS_AS(a.embed(missing), std::invalid_argument);
}

}  // TEST_SUITE
