#pragma once

#include <array>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hc/detector/model.hpp"
#include "hc/graph/au_graph.hpp"

namespace hc::detector {

/// Raised when a forward stage produces NaN/Inf; names the stage.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(std::string stage)
      : std::runtime_error("non-finite values after stage '" + stage + "'"),
        stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Row i = ReLU(W_i x + b_i), one F-vector per AU head.
graph::NodeMatrix extract_au_node_features(const DetectionModel& model,
                                           const Eigen::VectorXd& feature_vector);

/// Intermediate activations kept for backpropagation.
struct ForwardTrace {
  Eigen::VectorXd input;
  Eigen::MatrixXd head_pre, head_out;  // 8 x F
  graph::AUGraph graph;
  graph::NormalizedAdjacency a_hat;
  Eigen::MatrixXd gcn1_in, gcn1_pre, gcn1_out;  // gcn*_in = A_hat * H
  Eigen::MatrixXd gcn2_in, gcn2_pre, gcn2_out;
  Eigen::MatrixXd conv1_pre, conv1_out;  // 8 x C1
  Eigen::MatrixXd conv2_pre, conv2_out;  // 8 x C2
  Eigen::VectorXd pooled;                // C2
  Eigen::VectorXd logits;
  Eigen::Vector2d probabilities;  // (healthy, hypomimia)
};

/// Full pipeline. If `fixed_graph` is given it replaces the kNN graph built
/// from the head outputs.
ForwardTrace forward_trace(const DetectionModel& model, const Eigen::VectorXd& feature_vector,
                           const graph::AUGraph* fixed_graph = nullptr);

Eigen::Vector2d forward(const DetectionModel& model, const Eigen::VectorXd& feature_vector);

/// -ln(max(p[label], 1e-12)).
double cross_entropy_loss(const Eigen::Vector2d& probabilities, int label);

struct Example {
  const Eigen::VectorXd* features;
  int label;
};

struct GradientResult {
  Parameters gradients;
  double mean_loss = 0.0;
};

/// Exact gradients of the mean batch loss; the kNN topology of each sample
/// is treated as constant.
GradientResult model_gradients(const DetectionModel& model, std::span<const Example> batch);

}  // namespace hc::detector
