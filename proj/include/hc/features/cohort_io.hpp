#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "hc/features/cohort.hpp"

namespace hc::features {

// Cohort directory layout, one directory per subject:
//   <root>/<subject_id>/label.txt      healthy | hypomimia
//   <root>/<subject_id>/frames.jsonl   AU frame records
//   <root>/<subject_id>/features.bin   optional, "AUFV1" + u32 count + u32 D + f64 LE rows

void write_feature_file(std::ostream& out, std::span<const Eigen::VectorXd> rows);
std::vector<Eigen::VectorXd> read_feature_file(std::istream& in);

void write_subject(const std::filesystem::path& dir, const LabeledSubject& subject);
LabeledSubject read_subject(const std::filesystem::path& dir);

void write_cohort(const std::filesystem::path& root, std::span<const LabeledSubject> cohort);
/// Subjects are returned sorted by directory name.
std::vector<LabeledSubject> read_cohort(const std::filesystem::path& root);

}  // namespace hc::features
