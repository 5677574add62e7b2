#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitgcn/config.hpp"
#include "gaitgcn/model.hpp"

namespace gaitgcn {

struct EpochMetrics {
  std::string stream;
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double acc = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

/// {"stream":...,"epoch":...,"lr":...,"loss":...,"acc":...}, no trailing newline.
std::string format_metrics_line(const EpochMetrics& m);

class TrainingDivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// SGD with momentum and L2 weight decay: v = mu*v + g + wd*p; p -= lr*v.
class Sgd {
 public:
  Sgd(std::vector<Tensor> params, double momentum, double weight_decay);
  void step(double lr);
  void zero_grad();

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> velocity_;
  double momentum_;
  double weight_decay_;
};

struct TrainOptions {
  /// Indices of the streams to train; empty trains all of them in order.
  std::vector<std::size_t> streams;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  std::vector<std::string> classes;  // label index -> subject id
};

/// Sorted distinct subject ids.
std::vector<std::string> class_labels(const std::vector<SkeletonSequence>& sequences);

/// Milestones rescaled from a base schedule length, floor(m * epochs / base_epochs).
std::vector<std::size_t> scaled_milestones(const std::vector<std::size_t>& milestones,
                                           std::size_t base_epochs, std::size_t epochs);

/// Trains each selected stream on subject identity with cross-entropy.
/// Shuffling is driven by config.seed so equal seeds give equal logs.
TrainResult train(MultiStreamModel& model, const std::vector<SkeletonSequence>& train_set,
                  const TrainConfig& config, const TrainOptions& options = {});

/// Rounds every entry to the nearest float, in place.
void round_to_single(std::span<double> values);

/// One f_m record per sequence, evaluation mode.
std::vector<EmbeddingRecord> extract_embeddings(const MultiStreamModel& model,
                                                const std::vector<SkeletonSequence>& sequences,
                                                std::size_t batch_size = 32);

}  // namespace gaitgcn
