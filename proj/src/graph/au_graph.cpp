#include "hc/graph/au_graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hc::graph {

namespace {

void fill_edges_from_adjacency(AUGraph& g) {
  g.edges.clear();
  const auto n = g.adjacency.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      if (g.adjacency(i, j) != 0.0)
        g.edges.emplace_back(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
}

}  // namespace

AUGraph build_knn_graph(const NodeMatrix& nodes, std::size_t k) {
  const auto n = static_cast<std::size_t>(nodes.rows());
  if (n < 2) throw std::invalid_argument("kNN graph needs at least 2 nodes");
  if (k < 1 || k > n - 1)
    throw std::invalid_argument("k must be in [1, " + std::to_string(n - 1) + "], got " +
                                std::to_string(k));
  if (!nodes.allFinite()) throw std::invalid_argument("node features must be finite");

  AUGraph g;
  g.k = k;
  g.adjacency = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  g.out_neighbors.resize(n);

  std::vector<std::size_t> candidates(n);
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j)
      dist[j] = (nodes.row(static_cast<Eigen::Index>(i)) - nodes.row(static_cast<Eigen::Index>(j)))
                    .squaredNorm();
    candidates.resize(n);
    std::iota(candidates.begin(), candidates.end(), 0);
    candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(i));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), [&](std::size_t a, std::size_t b) {
                        return dist[a] < dist[b] || (dist[a] == dist[b] && a < b);
                      });
    g.out_neighbors[i].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t j : g.out_neighbors[i]) {
      g.adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
      g.adjacency(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
    }
  }
  fill_edges_from_adjacency(g);
  return g;
}

AUGraph graph_from_edges(std::size_t node_count,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  AUGraph g;
  const auto n = static_cast<Eigen::Index>(node_count);
  g.adjacency = Eigen::MatrixXd::Zero(n, n);
  for (auto [a, b] : edges) {
    if (a >= node_count || b >= node_count || a == b)
      throw std::invalid_argument("invalid edge");
    g.adjacency(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0;
    g.adjacency(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0;
  }
  fill_edges_from_adjacency(g);
  return g;
}

NormalizedAdjacency normalize_adjacency(const AUGraph& graph) {
  const auto n = graph.adjacency.rows();
  Eigen::MatrixXd a = graph.adjacency + Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd inv_sqrt_deg = a.rowwise().sum().array().rsqrt();
  return {inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal()};
}

Eigen::MatrixXd graph_conv_forward(const NormalizedAdjacency& a_hat, const NodeMatrix& h,
                                   const Eigen::MatrixXd& w) {
  if (a_hat.matrix.rows() != a_hat.matrix.cols() || a_hat.matrix.cols() != h.rows() ||
      h.cols() != w.rows())
    throw std::invalid_argument("graph_conv_forward: dimension mismatch");
  return (a_hat.matrix * h * w).cwiseMax(0.0);
}

}  // namespace hc::graph
