#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace hc::graph {

inline constexpr std::size_t kAUNodeCount = 8;

/// Node feature matrix, one row per AU in pipeline node order.
using NodeMatrix = Eigen::MatrixXd;

/// Symmetrized k-nearest-neighbour graph over node feature rows.
struct AUGraph {
  std::size_t k = 0;
  /// Directed kNN choices before symmetrization, nearest first.
  std::vector<std::vector<std::size_t>> out_neighbors;
  /// Unordered pairs (i < j), ascending.
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  Eigen::MatrixXd adjacency;

  std::size_t node_count() const { return static_cast<std::size_t>(adjacency.rows()); }
};

struct NormalizedAdjacency {
  Eigen::MatrixXd matrix;
};

/// Each node links to its k closest other nodes (Euclidean, ties to the
/// lower index); the edge set is the union of both directions.
AUGraph build_knn_graph(const NodeMatrix& nodes, std::size_t k);

/// Graph with an explicit undirected edge list; out_neighbors left empty.
AUGraph graph_from_edges(std::size_t node_count,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// D^{-1/2} (A + I) D^{-1/2}, D the degree matrix of A + I.
NormalizedAdjacency normalize_adjacency(const AUGraph& graph);

/// ReLU(A_hat * H * W).
Eigen::MatrixXd graph_conv_forward(const NormalizedAdjacency& a_hat, const NodeMatrix& h,
                                   const Eigen::MatrixXd& w);

}  // namespace hc::graph
