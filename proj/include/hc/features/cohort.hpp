#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hc/features/au_frame.hpp"

namespace hc::features {

/// Node order shared by the whole detection pipeline.
inline constexpr std::array<std::string_view, 8> kDetectionAUs = {
    "AU1", "AU2", "AU4", "AU6", "AU9", "AU12", "AU25", "AU26"};

/// AUs that carry the smile in synthetic subjects.
inline constexpr std::array<std::string_view, 4> kExpressiveAUs = {"AU6", "AU12", "AU25",
                                                                   "AU26"};

inline constexpr double kHealthyPeakAmplitude = 0.8;
inline constexpr double kNeutralFraction = 0.25;
inline constexpr std::int64_t kFrameIntervalMs = 33;

enum class Label { Healthy, Hypomimia };

std::string_view to_string(Label label);
Label label_from_string(std::string_view text);
inline int class_index(Label label) { return label == Label::Hypomimia ? 1 : 0; }

struct LabeledSubject {
  std::string subject_id;
  Label label = Label::Healthy;
  std::vector<AUFrame> frames;
  /// Empty, or aligned 1:1 with `frames`.
  std::vector<Eigen::VectorXd> feature_vectors;

  void validate() const;
};

struct CohortConfig {
  std::size_t n_healthy = 55;
  std::size_t n_hypomimia = 50;
  std::size_t frames_per_subject = 40;
  double attenuation = 0.4;
  double noise_sigma = 0.05;
  std::uint64_t seed = 7;
  std::size_t feature_dim = 32;

  void validate() const;
};

/// Fixed linear map from the 8 detection-AU intensities to a D-dimensional
/// raw feature vector; stands in for the vision backbone.
class FeatureEmbedding {
 public:
  explicit FeatureEmbedding(std::size_t dim);

  std::size_t dim() const { return static_cast<std::size_t>(projection_.rows()); }
  Eigen::VectorXd embed(const Eigen::Matrix<double, 8, 1>& intensities) const;
  /// Uses the detection AUs of `frame`; a missing AU throws std::invalid_argument.
  Eigen::VectorXd embed(const AUFrame& frame) const;

 private:
  Eigen::MatrixXd projection_;
  Eigen::VectorXd offset_;
};

/// Neutral segment then a smile plateau; deterministic given `config.seed`.
std::vector<LabeledSubject> synthesize_cohort(const CohortConfig& config);

/// Number of leading frames treated as the neutral segment.
std::size_t neutral_frame_count(std::size_t frame_count);

enum class FrameSelection { Smile, All };

/// The subject's stored feature vectors, or (when absent) the noise-free
/// embedding of each frame's detection AUs.
std::vector<Eigen::VectorXd> feature_vectors_or_embed(const LabeledSubject& subject,
                                                      std::size_t feature_dim);

std::vector<std::size_t> select_frames(const LabeledSubject& subject, FrameSelection selection);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;

  void validate() const;
};

struct SubjectSplit {
  std::vector<LabeledSubject> train;
  std::vector<LabeledSubject> val;
  std::vector<LabeledSubject> test;
};

/// Whole-subject partition: val/test get floor(n * ratio), train the rest.
SubjectSplit split_by_subject(std::span<const LabeledSubject> cohort, const SplitRatios& ratios,
                              std::uint64_t seed);

struct AULabeledSample {
  Eigen::VectorXd feature_vector;
  Eigen::Matrix<double, 8, 1> au_targets;
};

/// AU-labeled pretraining data drawn through the same embedding as the cohort.
std::vector<AULabeledSample> synthesize_au_labeled_samples(std::size_t count,
                                                           std::size_t feature_dim,
                                                           double noise_sigma,
                                                           std::uint64_t seed);

}  // namespace hc::features
