#include "hc/detector/network.hpp"

#include <algorithm>
#include <cmath>

namespace hc::detector {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& x) { return x.cwiseMax(0.0); }

Eigen::MatrixXd relu_mask(const Eigen::MatrixXd& pre) {
  return (pre.array() > 0.0).cast<double>().matrix();
}

void require_finite(const Eigen::MatrixXd& m, const char* stage) {
  if (!m.allFinite()) throw NonFiniteError(stage);
}

// out[n] = bias + sum_t W_t * in[n + t - 1], zero padded along the node axis.
Eigen::MatrixXd node_conv(const Eigen::MatrixXd& in,
                          const std::array<Eigen::MatrixXd, kConvWidth>& w,
                          const Eigen::VectorXd& bias) {
  const Eigen::Index nodes = in.rows();
  Eigen::MatrixXd out = bias.transpose().replicate(nodes, 1);
  for (std::size_t t = 0; t < kConvWidth; ++t) {
    const Eigen::Index offset = static_cast<Eigen::Index>(t) - 1;
    for (Eigen::Index n = 0; n < nodes; ++n) {
      const Eigen::Index src = n + offset;
      if (src < 0 || src >= nodes) continue;
      out.row(n).noalias() += in.row(src) * w[t].transpose();
    }
  }
  return out;
}

// Accumulates weight/bias gradients and returns d(in).
Eigen::MatrixXd node_conv_backward(const Eigen::MatrixXd& in, const Eigen::MatrixXd& d_out,
                                   const std::array<Eigen::MatrixXd, kConvWidth>& w,
                                   std::array<Eigen::MatrixXd, kConvWidth>& d_w,
                                   Eigen::VectorXd& d_bias) {
  const Eigen::Index nodes = in.rows();
  Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(in.rows(), in.cols());
  d_bias.noalias() += d_out.colwise().sum().transpose();
  for (std::size_t t = 0; t < kConvWidth; ++t) {
    const Eigen::Index offset = static_cast<Eigen::Index>(t) - 1;
    for (Eigen::Index n = 0; n < nodes; ++n) {
      const Eigen::Index src = n + offset;
      if (src < 0 || src >= nodes) continue;
      d_w[t].noalias() += d_out.row(n).transpose() * in.row(src);
      d_in.row(src).noalias() += d_out.row(n) * w[t];
    }
  }
  return d_in;
}

void check_input(const DetectionModel& model, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != model.hp.D)
    throw std::invalid_argument("feature vector has length " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(model.hp.D));
}

}  // namespace

graph::NodeMatrix extract_au_node_features(const DetectionModel& model,
                                           const Eigen::VectorXd& feature_vector) {
  check_input(model, feature_vector);
  const Parameters& p = model.params;
  graph::NodeMatrix h(static_cast<Eigen::Index>(kNodes), static_cast<Eigen::Index>(model.hp.F));
  for (std::size_t i = 0; i < kNodes; ++i)
    h.row(static_cast<Eigen::Index>(i)) =
        (p.head_weight[i] * feature_vector + p.head_bias[i]).cwiseMax(0.0).transpose();
  return h;
}

ForwardTrace forward_trace(const DetectionModel& model, const Eigen::VectorXd& feature_vector,
                           const graph::AUGraph* fixed_graph) {
  check_input(model, feature_vector);
  const Parameters& p = model.params;
  ForwardTrace tr;
  tr.input = feature_vector;

  tr.head_pre.resize(static_cast<Eigen::Index>(kNodes), static_cast<Eigen::Index>(model.hp.F));
  for (std::size_t i = 0; i < kNodes; ++i)
    tr.head_pre.row(static_cast<Eigen::Index>(i)) =
        (p.head_weight[i] * feature_vector + p.head_bias[i]).transpose();
  require_finite(tr.head_pre, "extractor");
  tr.head_out = relu(tr.head_pre);

  tr.graph = fixed_graph ? *fixed_graph : graph::build_knn_graph(tr.head_out, model.hp.k);
  tr.a_hat = graph::normalize_adjacency(tr.graph);

  tr.gcn1_in = tr.a_hat.matrix * tr.head_out;
  tr.gcn1_pre = tr.gcn1_in * p.gcn1_weight;
  require_finite(tr.gcn1_pre, "gcn1");
  tr.gcn1_out = relu(tr.gcn1_pre);

  tr.gcn2_in = tr.a_hat.matrix * tr.gcn1_out;
  tr.gcn2_pre = tr.gcn2_in * p.gcn2_weight;
  require_finite(tr.gcn2_pre, "gcn2");
  tr.gcn2_out = relu(tr.gcn2_pre);

  tr.conv1_pre = node_conv(tr.gcn2_out, p.conv1_weight, p.conv1_bias);
  require_finite(tr.conv1_pre, "conv1");
  tr.conv1_out = relu(tr.conv1_pre);

  tr.conv2_pre = node_conv(tr.conv1_out, p.conv2_weight, p.conv2_bias);
  require_finite(tr.conv2_pre, "conv2");
  tr.conv2_out = relu(tr.conv2_pre);

  tr.pooled = tr.conv2_out.colwise().mean().transpose();
  tr.logits = p.out_weight * tr.pooled + p.out_bias;
  require_finite(tr.logits, "linear");

  const double m = tr.logits.maxCoeff();
  const Eigen::Vector2d e = (tr.logits.array() - m).exp().matrix();
  tr.probabilities = e / e.sum();
  return tr;
}

Eigen::Vector2d forward(const DetectionModel& model, const Eigen::VectorXd& feature_vector) {
  return forward_trace(model, feature_vector).probabilities;
}

double cross_entropy_loss(const Eigen::Vector2d& probabilities, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
  return -std::log(std::max(probabilities(label), 1e-12));
}

GradientResult model_gradients(const DetectionModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("model_gradients: empty batch");
  const Parameters& p = model.params;
  GradientResult result{Parameters::zeros(model.hp), 0.0};
  Parameters& g = result.gradients;
  const double scale = 1.0 / static_cast<double>(batch.size());

  for (const Example& ex : batch) {
    const ForwardTrace tr = forward_trace(model, *ex.features);
    result.mean_loss += cross_entropy_loss(tr.probabilities, ex.label) * scale;

    // softmax + cross-entropy
    Eigen::VectorXd d_logits = tr.probabilities;
    d_logits(ex.label) -= 1.0;
    d_logits *= scale;

    g.out_weight.noalias() += d_logits * tr.pooled.transpose();
    g.out_bias += d_logits;
    const Eigen::VectorXd d_pooled = p.out_weight.transpose() * d_logits;

    // mean pool over nodes
    Eigen::MatrixXd d_conv2_out =
        (d_pooled.transpose() / static_cast<double>(kNodes)).replicate(tr.conv2_out.rows(), 1);
    const Eigen::MatrixXd d_conv2_pre = d_conv2_out.cwiseProduct(relu_mask(tr.conv2_pre));
    const Eigen::MatrixXd d_conv1_out =
        node_conv_backward(tr.conv1_out, d_conv2_pre, p.conv2_weight, g.conv2_weight, g.conv2_bias);

    const Eigen::MatrixXd d_conv1_pre = d_conv1_out.cwiseProduct(relu_mask(tr.conv1_pre));
    const Eigen::MatrixXd d_gcn2_out =
        node_conv_backward(tr.gcn2_out, d_conv1_pre, p.conv1_weight, g.conv1_weight, g.conv1_bias);

    // A_hat is symmetric, so its transpose is itself.
    const Eigen::MatrixXd d_gcn2_pre = d_gcn2_out.cwiseProduct(relu_mask(tr.gcn2_pre));
    g.gcn2_weight.noalias() += tr.gcn2_in.transpose() * d_gcn2_pre;
    const Eigen::MatrixXd d_gcn1_out = tr.a_hat.matrix * (d_gcn2_pre * p.gcn2_weight.transpose());

    const Eigen::MatrixXd d_gcn1_pre = d_gcn1_out.cwiseProduct(relu_mask(tr.gcn1_pre));
    g.gcn1_weight.noalias() += tr.gcn1_in.transpose() * d_gcn1_pre;
    const Eigen::MatrixXd d_head_out = tr.a_hat.matrix * (d_gcn1_pre * p.gcn1_weight.transpose());

    const Eigen::MatrixXd d_head_pre = d_head_out.cwiseProduct(relu_mask(tr.head_pre));
    for (std::size_t i = 0; i < kNodes; ++i) {
      const Eigen::VectorXd d_row = d_head_pre.row(static_cast<Eigen::Index>(i)).transpose();
      g.head_weight[i].noalias() += d_row * ex.features->transpose();
      g.head_bias[i] += d_row;
    }
  }
  return result;
}

}  // namespace hc::detector
