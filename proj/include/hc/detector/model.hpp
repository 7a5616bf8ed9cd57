#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "hc/graph/au_graph.hpp"

namespace hc::detector {

inline constexpr std::size_t kNodes = graph::kAUNodeCount;
inline constexpr std::size_t kClasses = 2;
/// Conv taps cover node offsets -1, 0, +1.
inline constexpr std::size_t kConvWidth = 3;

struct Hyperparams {
  double lr = 0.05;
  double momentum = 0.9;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t D = 32;   // raw feature dimension
  std::size_t F = 16;   // per-AU node feature dimension
  std::size_t C1 = 16;  // conv1 output channels
  std::size_t C2 = 8;   // conv2 output channels
  std::size_t k = 2;    // kNN neighbours

  void validate() const;
};

/// Every learnable tensor. Gradients and momentum buffers use the same type.
struct Parameters {
  std::array<Eigen::MatrixXd, kNodes> head_weight;  // F x D
  std::array<Eigen::VectorXd, kNodes> head_bias;    // F
  Eigen::MatrixXd gcn1_weight;                      // F x F
  Eigen::MatrixXd gcn2_weight;                      // F x F
  std::array<Eigen::MatrixXd, kConvWidth> conv1_weight;  // C1 x F per tap
  Eigen::VectorXd conv1_bias;                            // C1
  std::array<Eigen::MatrixXd, kConvWidth> conv2_weight;  // C2 x C1 per tap
  Eigen::VectorXd conv2_bias;                            // C2
  Eigen::MatrixXd out_weight;                            // 2 x C2
  Eigen::VectorXd out_bias;                              // 2

  static Parameters zeros(const Hyperparams& hp);
};

std::string tensor_name(std::string_view group, std::size_t index, std::string_view kind);

/// Calls fn(name, tensor_from_each_set...) for every tensor, in a fixed order.
template <class Fn, class... Ps>
void for_each_tensor(Fn&& fn, Ps&... sets) {
  for (std::size_t i = 0; i < kNodes; ++i) {
    fn(tensor_name("head", i, "weight"), sets.head_weight[i]...);
    fn(tensor_name("head", i, "bias"), sets.head_bias[i]...);
  }
  fn(std::string("gcn1.weight"), sets.gcn1_weight...);
  fn(std::string("gcn2.weight"), sets.gcn2_weight...);
  for (std::size_t t = 0; t < kConvWidth; ++t)
    fn(tensor_name("conv1", t, "weight"), sets.conv1_weight[t]...);
  fn(std::string("conv1.bias"), sets.conv1_bias...);
  for (std::size_t t = 0; t < kConvWidth; ++t)
    fn(tensor_name("conv2", t, "weight"), sets.conv2_weight[t]...);
  fn(std::string("conv2.bias"), sets.conv2_bias...);
  fn(std::string("out.weight"), sets.out_weight...);
  fn(std::string("out.bias"), sets.out_bias...);
}

bool same_shapes(const Parameters& a, const Parameters& b);
bool all_finite(const Parameters& p);
std::size_t parameter_count(const Parameters& p);

struct DetectionModel {
  Hyperparams hp;
  Parameters params;
};

/// He-normal weights and zero biases drawn from hp.seed.
DetectionModel init_model(const Hyperparams& hp);

/// Extractor head weights, the unit moved by transfer learning.
struct HeadWeights {
  std::array<Eigen::MatrixXd, kNodes> weight;
  std::array<Eigen::VectorXd, kNodes> bias;
};

/// Throws std::invalid_argument if shapes differ from the model's heads.
void load_head_weights(DetectionModel& model, const HeadWeights& heads);

}  // namespace hc::detector
