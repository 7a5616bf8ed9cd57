#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "hc/detector/model.hpp"
#include "hc/features/cohort.hpp"

namespace hc::detector {

/// v <- momentum * v + g; w <- w - lr * v, tensor by tensor.
void sgd_step(Parameters& params, const Parameters& gradients, double lr, double momentum,
              Parameters& velocity);

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::size_t epoch)
      : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainOptions {
  Hyperparams hp;
  features::FrameSelection selection = features::FrameSelection::Smile;
  /// Transferred extractor heads; seeded random heads when absent.
  std::optional<HeadWeights> pretrained_heads;
};

struct TrainingResult {
  DetectionModel model;  // best validation accuracy checkpoint
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
};

/// Mini-batch SGD with momentum over frames, shuffled per epoch from hp.seed.
TrainingResult train(std::span<const features::LabeledSubject> train_set,
                     std::span<const features::LabeledSubject> val_set,
                     const TrainOptions& options);

/// CSV: epoch,train_loss,val_loss,val_accuracy
void write_history_csv(std::ostream& out, std::span<const EpochRecord> history);

struct PretrainOptions {
  double lr = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 60;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

struct PretrainResult {
  HeadWeights heads;
  Eigen::VectorXd readout_weight;  // F, shared by all heads
  double readout_bias = 0.0;
  std::vector<double> loss_history;

  /// Predicted intensity of each AU for one feature vector.
  Eigen::Matrix<double, 8, 1> predict(const Eigen::VectorXd& feature_vector) const;
};

/// Regresses each AU intensity from its head through a shared linear readout
/// (squared error); the heads seed a DetectionModel with dimensions `hp`.
PretrainResult pretrain_au_heads(std::span<const features::AULabeledSample> samples,
                                 const Hyperparams& hp, const PretrainOptions& options);

}  // namespace hc::detector
