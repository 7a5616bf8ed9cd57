#include "hc/detector/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "hc/features/cohort.hpp"

namespace hc::detector {

void Hyperparams::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (D < 1 || F < 1 || C1 < 1 || C2 < 1) throw std::invalid_argument("dimensions must be >= 1");
  if (k < 1 || k > kNodes - 1) throw std::invalid_argument("k must be in [1,7]");
}

std::string tensor_name(std::string_view group, std::size_t index, std::string_view kind) {
  std::string name(group);
  name += '.';
  if (group == "head") {
    name += features::kDetectionAUs[index];
  } else {
    // conv taps are named by node offset
    name += "tap";
    name += std::to_string(static_cast<int>(index) - 1);
  }
  name += '.';
  name += kind;
  return name;
}

Parameters Parameters::zeros(const Hyperparams& hp) {
  const auto D = static_cast<Eigen::Index>(hp.D), F = static_cast<Eigen::Index>(hp.F),
             C1 = static_cast<Eigen::Index>(hp.C1), C2 = static_cast<Eigen::Index>(hp.C2);
  Parameters p;
  for (std::size_t i = 0; i < kNodes; ++i) {
    p.head_weight[i] = Eigen::MatrixXd::Zero(F, D);
    p.head_bias[i] = Eigen::VectorXd::Zero(F);
  }
  p.gcn1_weight = Eigen::MatrixXd::Zero(F, F);
  p.gcn2_weight = Eigen::MatrixXd::Zero(F, F);
  for (std::size_t t = 0; t < kConvWidth; ++t) {
    p.conv1_weight[t] = Eigen::MatrixXd::Zero(C1, F);
    p.conv2_weight[t] = Eigen::MatrixXd::Zero(C2, C1);
  }
  p.conv1_bias = Eigen::VectorXd::Zero(C1);
  p.conv2_bias = Eigen::VectorXd::Zero(C2);
  p.out_weight = Eigen::MatrixXd::Zero(kClasses, C2);
  p.out_bias = Eigen::VectorXd::Zero(kClasses);
  return p;
}

bool same_shapes(const Parameters& a, const Parameters& b) {
  bool same = true;
  for_each_tensor(
      [&](const std::string&, const auto& x, const auto& y) {
        same = same && x.rows() == y.rows() && x.cols() == y.cols();
      },
      a, b);
  return same;
}

bool all_finite(const Parameters& p) {
  bool ok = true;
  for_each_tensor([&](const std::string&, const auto& x) { ok = ok && x.allFinite(); }, p);
  return ok;
}

std::size_t parameter_count(const Parameters& p) {
  std::size_t n = 0;
  for_each_tensor([&](const std::string&, const auto& x) { n += static_cast<std::size_t>(x.size()); },
                  p);
  return n;
}

DetectionModel init_model(const Hyperparams& hp) {
  hp.validate();
  DetectionModel model{hp, Parameters::zeros(hp)};
  std::mt19937_64 rng(hp.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto fill = [&](Eigen::MatrixXd& m, double fan_in, double gain) {
    const double stddev = std::sqrt(gain / fan_in);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = stddev * gauss(rng);
  };
  Parameters& p = model.params;
  for (auto& w : p.head_weight) fill(w, static_cast<double>(hp.D), 2.0);
  fill(p.gcn1_weight, static_cast<double>(hp.F), 2.0);
  fill(p.gcn2_weight, static_cast<double>(hp.F), 2.0);
  for (auto& w : p.conv1_weight) fill(w, static_cast<double>(kConvWidth * hp.F), 2.0);
  for (auto& w : p.conv2_weight) fill(w, static_cast<double>(kConvWidth * hp.C1), 2.0);
  fill(p.out_weight, static_cast<double>(hp.C2), 1.0);
  return model;
}

void load_head_weights(DetectionModel& model, const HeadWeights& heads) {
  for (std::size_t i = 0; i < kNodes; ++i) {
    const auto& w = model.params.head_weight[i];
    if (heads.weight[i].rows() != w.rows() || heads.weight[i].cols() != w.cols() ||
        heads.bias[i].size() != model.params.head_bias[i].size())
      throw std::invalid_argument("transferred head " + std::to_string(i) +
                                  " does not match model shape");
  }
  for (std::size_t i = 0; i < kNodes; ++i) {
    model.params.head_weight[i] = heads.weight[i];
    model.params.head_bias[i] = heads.bias[i];
  }
}

}  // namespace hc::detector
