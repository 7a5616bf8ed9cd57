#include "oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace hc::testing {

namespace {

double dist(const Eigen::MatrixXd& nodes, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < nodes.cols(); ++c) {
    const double d = nodes(static_cast<Eigen::Index>(a), c) - nodes(static_cast<Eigen::Index>(b), c);
    s += d * d;
  }
  return std::sqrt(s);
}

bool precedes(double da, std::size_t a, double db, std::size_t b) {
  return da < db || (da == db && a < b);
}

// Calls fn on every k-subset of `items`.
template <class Fn>
void for_each_subset(const std::vector<std::size_t>& items, std::size_t k, std::size_t start,
                     std::vector<std::size_t>& current, Fn& fn) {
  if (current.size() == k) {
    fn(current);
    return;
  }
  for (std::size_t i = start; i < items.size(); ++i) {
    current.push_back(items[i]);
    for_each_subset(items, k, i + 1, current, fn);
    current.pop_back();
  }
}

double relu(double v) { return v > 0.0 ? v : 0.0; }

using Mat = std::vector<std::vector<double>>;

Mat zeros(std::size_t r, std::size_t c) { return Mat(r, std::vector<double>(c, 0.0)); }

}  // namespace

std::vector<std::set<std::size_t>> brute_force_knn(const Eigen::MatrixXd& nodes, std::size_t k) {
  const auto n = static_cast<std::size_t>(nodes.rows());
  std::vector<std::set<std::size_t>> result(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    int found = 0;
    std::vector<std::size_t> current;
    auto check = [&](const std::vector<std::size_t>& subset) {
      const std::set<std::size_t> s(subset.begin(), subset.end());
      for (std::size_t in : s)
        for (std::size_t out : others) {
          if (s.count(out)) continue;
          if (!precedes(dist(nodes, i, in), in, dist(nodes, i, out), out)) return;
        }
      ++found;
      result[i] = s;
    };
    for_each_subset(others, k, 0, current, check);
    if (found != 1) throw std::logic_error("brute-force kNN: no unique neighbour set");
  }
  return result;
}

std::vector<std::pair<std::size_t, std::size_t>> symmetric_edges(
    const std::vector<std::set<std::size_t>>& neighbours) {
  std::set<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < neighbours.size(); ++i)
    for (std::size_t j : neighbours[i]) e.insert({std::min(i, j), std::max(i, j)});
  return {e.begin(), e.end()};
}

Eigen::Vector2d naive_forward(const detector::DetectionModel& model, const Eigen::VectorXd& x,
                              const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  const auto& p = model.params;
  const std::size_t N = detector::kNodes, F = model.hp.F, C1 = model.hp.C1, C2 = model.hp.C2,
                    D = model.hp.D;

  Mat h = zeros(N, F);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t f = 0; f < F; ++f) {
      double s = p.head_bias[i](static_cast<Eigen::Index>(f));
      for (std::size_t d = 0; d < D; ++d)
        s += p.head_weight[i](static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(d)) *
             x(static_cast<Eigen::Index>(d));
      h[i][f] = relu(s);
    }

  // A + I, then symmetric degree normalization.
  Mat a = zeros(N, N);
  for (std::size_t i = 0; i < N; ++i) a[i][i] = 1.0;
  for (auto [i, j] : edges) a[i][j] = a[j][i] = 1.0;
  std::vector<double> deg(N, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) deg[i] += a[i][j];
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);

  auto gcn = [&](const Mat& in, const Eigen::MatrixXd& w) {
    Mat mixed = zeros(N, F);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t f = 0; f < F; ++f) mixed[i][f] += a[i][j] * in[j][f];
    Mat out = zeros(N, F);
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t g = 0; g < F; ++g) {
        double s = 0.0;
        for (std::size_t f = 0; f < F; ++f)
          s += mixed[i][f] * w(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(g));
        out[i][g] = relu(s);
      }
    return out;
  };
  h = gcn(h, p.gcn1_weight);
  h = gcn(h, p.gcn2_weight);

  auto conv = [&](const Mat& in, std::size_t cin, std::size_t cout,
                  const std::array<Eigen::MatrixXd, detector::kConvWidth>& w, const Eigen::VectorXd& b) {
    Mat out = zeros(N, cout);
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t c = 0; c < cout; ++c) {
        double s = b(static_cast<Eigen::Index>(c));
        for (int off = -1; off <= 1; ++off) {
          const long src = static_cast<long>(n) + off;
          if (src < 0 || src >= static_cast<long>(N)) continue;
          for (std::size_t q = 0; q < cin; ++q)
            s += w[static_cast<std::size_t>(off + 1)](static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(q)) *
                 in[static_cast<std::size_t>(src)][q];
        }
        out[n][c] = relu(s);
      }
    return out;
  };
  const Mat c1 = conv(h, F, C1, p.conv1_weight, p.conv1_bias);
  const Mat c2 = conv(c1, C1, C2, p.conv2_weight, p.conv2_bias);

  std::vector<double> pooled(C2, 0.0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C2; ++c) pooled[c] += c2[n][c] / static_cast<double>(N);

  double logit[2];
  for (int k = 0; k < 2; ++k) {
    logit[k] = p.out_bias(k);
    for (std::size_t c = 0; c < C2; ++c) logit[k] += p.out_weight(k, static_cast<Eigen::Index>(c)) * pooled[c];
  }
  const double m = std::max(logit[0], logit[1]);
  const double e0 = std::exp(logit[0] - m), e1 = std::exp(logit[1] - m);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

detector::Parameters finite_difference_gradients(const detector::DetectionModel& model,
                                                 std::span<const detector::Example> batch, double step) {
  std::vector<graph::AUGraph> graphs;
  for (const auto& ex : batch) graphs.push_back(detector::forward_trace(model, *ex.features).graph);

  detector::DetectionModel work = model;
  auto mean_loss = [&] {
    double s = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto tr = detector::forward_trace(work, *batch[b].features, &graphs[b]);
      s += detector::cross_entropy_loss(tr.probabilities, batch[b].label);
    }
    return s / static_cast<double>(batch.size());
  };

  detector::Parameters grads = detector::Parameters::zeros(model.hp);
  detector::for_each_tensor(
      [&](const std::string&, auto& w, auto& g) {
        for (Eigen::Index i = 0; i < w.size(); ++i) {
          double& v = w.data()[i];
          const double saved = v;
          v = saved + step;
          const double up = mean_loss();
          v = saved - step;
          const double down = mean_loss();
          v = saved;
          g.data()[i] = (up - down) / (2.0 * step);
        }
      },
      work.params, grads);
  return grads;
}

double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double denom = std::max({a.norm(), b.norm(), 1e-6});
  return (a - b).norm() / denom;
}

HandMetrics hand_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  const double TP = static_cast<double>(tp), FP = static_cast<double>(fp), FN = static_cast<double>(fn),
               TN = static_cast<double>(tn);
  const double total = TP + FP + FN + TN;
  HandMetrics m{};
  m.accuracy = total > 0 ? (TP + TN) / total : 0.0;
  m.ppv = TP + FP > 0 ? TP / (TP + FP) : 0.0;
  m.tpr = TP + FN > 0 ? TP / (TP + FN) : 0.0;
  // F1 written as the harmonic form 2TP / (2TP + FP + FN) to stay independent.
  m.f1 = TP > 0 ? 2 * TP / (2 * TP + FP + FN) : 0.0;
  return m;
}

double two_pass_slope(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += static_cast<double>(i);
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxy += dx * (y[i] - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace hc::testing
