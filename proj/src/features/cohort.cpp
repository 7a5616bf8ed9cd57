#include "hc/features/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hc::features {

namespace {

constexpr std::uint64_t kEmbeddingSeed = 0x4843'454D'4245'4431ULL;

bool is_expressive(std::string_view au) {
  return std::find(kExpressiveAUs.begin(), kExpressiveAUs.end(), au) != kExpressiveAUs.end();
}

std::string subject_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "subj_%03zu", index);
  return buf;
}

}  // namespace

std::string_view to_string(Label label) {
  return label == Label::Hypomimia ? "hypomimia" : "healthy";
}

Label label_from_string(std::string_view text) {
  if (text == "healthy") return Label::Healthy;
  if (text == "hypomimia") return Label::Hypomimia;
  throw std::invalid_argument("unknown label '" + std::string(text) + "'");
}

void LabeledSubject::validate() const {
  if (frames.empty()) throw std::invalid_argument("subject " + subject_id + " has no frames");
  if (!feature_vectors.empty() && feature_vectors.size() != frames.size())
    throw std::invalid_argument("subject " + subject_id +
                                ": feature vectors not aligned with frames");
}

void CohortConfig::validate() const {
  if (n_healthy < 1 || n_hypomimia < 1) throw std::invalid_argument("cohort counts must be >= 1");
  if (frames_per_subject < 1) throw std::invalid_argument("frames_per_subject must be >= 1");
  if (!(attenuation > 0.0 && attenuation < 1.0))
    throw std::invalid_argument("attenuation must be in (0,1)");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma))
    throw std::invalid_argument("noise_sigma must be >= 0");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be >= 1");
}

FeatureEmbedding::FeatureEmbedding(std::size_t dim)
    : projection_(static_cast<Eigen::Index>(dim), 8), offset_(static_cast<Eigen::Index>(dim)) {
  if (dim == 0) throw std::invalid_argument("embedding dimension must be >= 1");
  std::mt19937_64 rng(kEmbeddingSeed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index r = 0; r < projection_.rows(); ++r)
    for (Eigen::Index c = 0; c < 8; ++c) projection_(r, c) = gauss(rng);
  for (Eigen::Index r = 0; r < offset_.size(); ++r) offset_(r) = 0.1 * gauss(rng);
}

Eigen::VectorXd FeatureEmbedding::embed(const Eigen::Matrix<double, 8, 1>& intensities) const {
  return projection_ * intensities + offset_;
}

Eigen::VectorXd FeatureEmbedding::embed(const AUFrame& frame) const {
  Eigen::Matrix<double, 8, 1> a;
  for (std::size_t i = 0; i < kDetectionAUs.size(); ++i) {
    auto it = frame.intensities.find(std::string(kDetectionAUs[i]));
    if (it == frame.intensities.end())
      throw std::invalid_argument("frame lacks detection AU " + std::string(kDetectionAUs[i]));
    a(static_cast<Eigen::Index>(i)) = it->second;
  }
  return embed(a);
}

std::size_t neutral_frame_count(std::size_t frame_count) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(frame_count) * kNeutralFraction));
}

std::vector<LabeledSubject> synthesize_cohort(const CohortConfig& config) {
  config.validate();
  const FeatureEmbedding embedding(config.feature_dim);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto noise = [&] { return config.noise_sigma > 0.0 ? config.noise_sigma * gauss(rng) : 0.0; };

  const std::size_t total = config.n_healthy + config.n_hypomimia;
  const std::size_t n_neutral = neutral_frame_count(config.frames_per_subject);

  std::vector<LabeledSubject> cohort;
  cohort.reserve(total);
  for (std::size_t s = 0; s < total; ++s) {
    LabeledSubject subject;
    subject.subject_id = subject_name(s);
    subject.label = s < config.n_healthy ? Label::Healthy : Label::Hypomimia;
    const double peak = subject.label == Label::Healthy
                            ? kHealthyPeakAmplitude
                            : kHealthyPeakAmplitude * config.attenuation;

    subject.frames.reserve(config.frames_per_subject);
    subject.feature_vectors.reserve(config.frames_per_subject);
    for (std::size_t f = 0; f < config.frames_per_subject; ++f) {
      const bool smiling = f >= n_neutral;
      AUFrame frame;
      frame.t_ms = static_cast<std::int64_t>(f) * kFrameIntervalMs;
      Eigen::Matrix<double, 8, 1> a;
      for (std::size_t i = 0; i < kDetectionAUs.size(); ++i) {
        const double clean = smiling && is_expressive(kDetectionAUs[i]) ? peak : 0.0;
        const double v = std::clamp(clean + noise(), 0.0, 1.0);
        a(static_cast<Eigen::Index>(i)) = v;
        frame.intensities.emplace(kDetectionAUs[i], v);
      }
      Eigen::VectorXd x = embedding.embed(a);
      for (Eigen::Index d = 0; d < x.size(); ++d) x(d) += noise();
      subject.frames.push_back(std::move(frame));
      subject.feature_vectors.push_back(std::move(x));
    }
    cohort.push_back(std::move(subject));
  }
  return cohort;
}

std::vector<std::size_t> select_frames(const LabeledSubject& subject, FrameSelection selection) {
  const std::size_t n = subject.frames.size();
  std::size_t first = selection == FrameSelection::Smile ? neutral_frame_count(n) : 0;
  // Single-frame subjects keep their only frame.
  if (first >= n) first = 0;
  std::vector<std::size_t> idx(n - first);
  std::iota(idx.begin(), idx.end(), first);
  return idx;
}

std::vector<Eigen::VectorXd> feature_vectors_or_embed(const LabeledSubject& subject,
                                                      std::size_t feature_dim) {
  if (!subject.feature_vectors.empty()) {
    for (const auto& v : subject.feature_vectors)
      if (static_cast<std::size_t>(v.size()) != feature_dim)
        throw std::invalid_argument("subject " + subject.subject_id + " has feature dimension " +
                                    std::to_string(v.size()) + ", expected " +
                                    std::to_string(feature_dim));
    return subject.feature_vectors;
  }
  const FeatureEmbedding embedding(feature_dim);
  std::vector<Eigen::VectorXd> out;
  out.reserve(subject.frames.size());
  for (const auto& f : subject.frames) out.push_back(embedding.embed(f));
  return out;
}

void SplitRatios::validate() const {
  for (double r : {train, val, test})
    if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("split ratios must each be in (0,1)");
  if (std::abs(train + val + test - 1.0) > 1e-9)
    throw std::invalid_argument("split ratios must sum to 1");
}

SubjectSplit split_by_subject(std::span<const LabeledSubject> cohort, const SplitRatios& ratios,
                              std::uint64_t seed) {
  ratios.validate();
  const std::size_t n = cohort.size();
  if (n < 3) throw std::invalid_argument("need at least 3 subjects to split");
  auto floor_count = [n](double r) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
  };
  const std::size_t n_val = floor_count(ratios.val);
  const std::size_t n_test = floor_count(ratios.test);
  if (n_val == 0 || n_test == 0 || n_val + n_test >= n)
    throw std::invalid_argument("too few subjects for nonempty splits");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SubjectSplit split;
  const std::size_t n_train = n - n_val - n_test;
  for (std::size_t i = 0; i < n; ++i) {
    const LabeledSubject& s = cohort[order[i]];
    if (i < n_train)
      split.train.push_back(s);
    else if (i < n_train + n_val)
      split.val.push_back(s);
    else
      split.test.push_back(s);
  }
  return split;
}

std::vector<AULabeledSample> synthesize_au_labeled_samples(std::size_t count,
                                                           std::size_t feature_dim,
                                                           double noise_sigma,
                                                           std::uint64_t seed) {
  const FeatureEmbedding embedding(feature_dim);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<AULabeledSample> samples;
  samples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    AULabeledSample s;
    for (Eigen::Index a = 0; a < 8; ++a) s.au_targets(a) = unit(rng);
    s.feature_vector = embedding.embed(s.au_targets);
    if (noise_sigma > 0.0)
      for (Eigen::Index d = 0; d < s.feature_vector.size(); ++d)
        s.feature_vector(d) += noise_sigma * gauss(rng);
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace hc::features
