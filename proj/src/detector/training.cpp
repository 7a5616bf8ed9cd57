#include "hc/detector/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "hc/detector/network.hpp"

namespace hc::detector {

namespace {

struct FrameSet {
  std::vector<Eigen::VectorXd> features;
  std::vector<int> labels;

  std::vector<Example> examples() const {
    std::vector<Example> out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) out.push_back({&features[i], labels[i]});
    return out;
  }
};

FrameSet collect_frames(std::span<const features::LabeledSubject> subjects, std::size_t dim,
                        features::FrameSelection selection) {
  FrameSet set;
  for (const auto& s : subjects) {
    s.validate();
    const auto vectors = features::feature_vectors_or_embed(s, dim);
    for (std::size_t i : features::select_frames(s, selection)) {
      set.features.push_back(vectors[i]);
      set.labels.push_back(features::class_index(s.label));
    }
  }
  return set;
}

struct SetScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

SetScore score_frames(const DetectionModel& model, const FrameSet& set) {
  SetScore out;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.features.size(); ++i) {
    const Eigen::Vector2d p = forward(model, set.features[i]);
    out.loss += cross_entropy_loss(p, set.labels[i]);
    const int predicted = p(1) > 0.5 ? 1 : 0;
    correct += predicted == set.labels[i] ? 1 : 0;
  }
  const auto n = static_cast<double>(set.features.size());
  out.loss /= n;
  out.accuracy = static_cast<double>(correct) / n;
  return out;
}

}  // namespace

void sgd_step(Parameters& params, const Parameters& gradients, double lr, double momentum,
              Parameters& velocity) {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
  if (!same_shapes(params, gradients) || !same_shapes(params, velocity))
    throw std::invalid_argument("sgd_step: shape mismatch");
  for_each_tensor(
      [&](const std::string&, auto& w, const auto& g, auto& v) {
        v = momentum * v + g;
        w -= lr * v;
      },
      params, gradients, velocity);
}

TrainingResult train(std::span<const features::LabeledSubject> train_set,
                     std::span<const features::LabeledSubject> val_set,
                     const TrainOptions& options) {
  const Hyperparams& hp = options.hp;
  hp.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training split");
  if (val_set.empty()) throw std::invalid_argument("train: empty validation split");

  const FrameSet train_frames = collect_frames(train_set, hp.D, options.selection);
  const FrameSet val_frames = collect_frames(val_set, hp.D, options.selection);
  const std::vector<Example> examples = train_frames.examples();

  DetectionModel model = init_model(hp);
  if (options.pretrained_heads) load_head_weights(model, *options.pretrained_heads);
  Parameters velocity = Parameters::zeros(hp);

  TrainingResult result{model, {}, 0};
  double best_accuracy = -1.0;

  std::mt19937_64 rng(hp.seed ^ 0x5348'5546'464C'4531ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Example> batch;
  batch.reserve(hp.batch_size);

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      for (std::size_t i = start; i < end; ++i) batch.push_back(examples[order[i]]);
      GradientResult grad;
      try {
        grad = model_gradients(model, batch);
      } catch (const NonFiniteError&) {
        throw DivergenceError(epoch);
      }
      if (!std::isfinite(grad.mean_loss)) throw DivergenceError(epoch);
      sgd_step(model.params, grad.gradients, hp.lr, hp.momentum, velocity);
    }

    SetScore tr, va;
    try {
      tr = score_frames(model, train_frames);
      va = score_frames(model, val_frames);
    } catch (const NonFiniteError&) {
      throw DivergenceError(epoch);
    }
    if (!std::isfinite(tr.loss) || !std::isfinite(va.loss)) throw DivergenceError(epoch);
    result.history.push_back({epoch, tr.loss, va.loss, va.accuracy});
    if (va.accuracy > best_accuracy) {
      best_accuracy = va.accuracy;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  if (hp.epochs == 0) result.model = model;
  return result;
}

void write_history_csv(std::ostream& out, std::span<const EpochRecord> history) {
  out << "epoch,train_loss,val_loss,val_accuracy\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : history)
    out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.val_accuracy << '\n';
  out.precision(old_precision);
}

Eigen::Matrix<double, 8, 1> PretrainResult::predict(const Eigen::VectorXd& x) const {
  Eigen::Matrix<double, 8, 1> out;
  for (std::size_t i = 0; i < kNodes; ++i) {
    const Eigen::VectorXd h = (heads.weight[i] * x + heads.bias[i]).cwiseMax(0.0);
    out(static_cast<Eigen::Index>(i)) = readout_weight.dot(h) + readout_bias;
  }
  return out;
}

PretrainResult pretrain_au_heads(std::span<const features::AULabeledSample> samples,
                                 const Hyperparams& hp, const PretrainOptions& options) {
  hp.validate();
  if (samples.empty()) throw std::invalid_argument("pretrain_au_heads: empty sample set");
  for (const auto& s : samples)
    if (static_cast<std::size_t>(s.feature_vector.size()) != hp.D)
      throw std::invalid_argument("pretrain_au_heads: sample dimension mismatch");

  Hyperparams seeded = hp;
  seeded.seed = options.seed;
  const DetectionModel init = init_model(seeded);

  PretrainResult result;
  for (std::size_t i = 0; i < kNodes; ++i) {
    result.heads.weight[i] = init.params.head_weight[i];
    result.heads.bias[i] = init.params.head_bias[i];
  }
  std::mt19937_64 rng(options.seed ^ 0x5052'4554'5241'494EULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  result.readout_weight.resize(static_cast<Eigen::Index>(hp.F));
  for (Eigen::Index f = 0; f < result.readout_weight.size(); ++f)
    result.readout_weight(f) = gauss(rng) / std::sqrt(static_cast<double>(hp.F));

  HeadWeights vel_heads;
  for (std::size_t i = 0; i < kNodes; ++i) {
    vel_heads.weight[i] = Eigen::MatrixXd::Zero(result.heads.weight[i].rows(), result.heads.weight[i].cols());
    vel_heads.bias[i] = Eigen::VectorXd::Zero(result.heads.bias[i].size());
  }
  Eigen::VectorXd vel_readout = Eigen::VectorXd::Zero(result.readout_weight.size());
  double vel_readout_bias = 0.0;

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const double lr = options.lr, mu = options.momentum;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      const double scale = 1.0 / static_cast<double>((end - start) * kNodes);
      HeadWeights g;
      for (std::size_t i = 0; i < kNodes; ++i) {
        g.weight[i] = Eigen::MatrixXd::Zero(vel_heads.weight[i].rows(), vel_heads.weight[i].cols());
        g.bias[i] = Eigen::VectorXd::Zero(vel_heads.bias[i].size());
      }
      Eigen::VectorXd g_readout = Eigen::VectorXd::Zero(result.readout_weight.size());
      double g_readout_bias = 0.0;

      for (std::size_t s = start; s < end; ++s) {
        const auto& sample = samples[order[s]];
        const Eigen::VectorXd& x = sample.feature_vector;
        for (std::size_t i = 0; i < kNodes; ++i) {
          const Eigen::VectorXd z = result.heads.weight[i] * x + result.heads.bias[i];
          const Eigen::VectorXd h = z.cwiseMax(0.0);
          const double err = result.readout_weight.dot(h) + result.readout_bias -
                             sample.au_targets(static_cast<Eigen::Index>(i));
          epoch_loss += err * err;
          const double d_pred = 2.0 * err * scale;
          g_readout += d_pred * h;
          g_readout_bias += d_pred;
          const Eigen::VectorXd d_z =
              (d_pred * result.readout_weight).cwiseProduct((z.array() > 0.0).cast<double>().matrix());
          g.weight[i].noalias() += d_z * x.transpose();
          g.bias[i] += d_z;
        }
      }
      for (std::size_t i = 0; i < kNodes; ++i) {
        vel_heads.weight[i] = mu * vel_heads.weight[i] + g.weight[i];
        vel_heads.bias[i] = mu * vel_heads.bias[i] + g.bias[i];
        result.heads.weight[i] -= lr * vel_heads.weight[i];
        result.heads.bias[i] -= lr * vel_heads.bias[i];
      }
      vel_readout = mu * vel_readout + g_readout;
      vel_readout_bias = mu * vel_readout_bias + g_readout_bias;
      result.readout_weight -= lr * vel_readout;
      result.readout_bias -= lr * vel_readout_bias;
    }
    epoch_loss /= static_cast<double>(samples.size() * kNodes);
    if (!std::isfinite(epoch_loss)) throw DivergenceError(epoch + 1);
    result.loss_history.push_back(epoch_loss);
  }
  return result;
}

}  // namespace hc::detector
