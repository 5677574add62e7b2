#include "gaitgcn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "gaitgcn/ops.hpp"
#include "gaitgcn/random.hpp"

namespace gaitgcn {

std::string format_metrics_line(const EpochMetrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "{\"stream\":\"%s\",\"epoch\":%zu,\"lr\":%.17g,\"loss\":%.17g,\"acc\":%.17g}",
                m.stream.c_str(), m.epoch, m.lr, m.loss, m.acc);
  return buf;
}

Sgd::Sgd(std::vector<Tensor> params, double momentum, double weight_decay)
    : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
  velocity_.reserve(params_.size());
  for (const auto& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void Sgd::step(double lr) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_data();
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j] + weight_decay_ * w[j];
      w[j] -= lr * v[j];
    }
  }
}

void Sgd::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<std::string> class_labels(const std::vector<SkeletonSequence>& sequences) {
  std::vector<std::string> ids;
  for (const auto& s : sequences) ids.push_back(s.subject_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::vector<std::size_t> scaled_milestones(const std::vector<std::size_t>& milestones,
                                           std::size_t base_epochs, std::size_t epochs) {
  if (base_epochs == 0) throw std::invalid_argument("scaled_milestones: base_epochs is zero");
  std::vector<std::size_t> out;
  for (std::size_t m : milestones) out.push_back(m * epochs / base_epochs);
  return out;
}

void round_to_single(std::span<double> values) {
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

namespace {

void round_parameters(const TensorList& list) {
  for (const auto& nt : list) {
    Tensor t = nt.tensor;
    round_to_single(t.mutable_data());
  }
}

}  // namespace

TrainResult train(MultiStreamModel& model, const std::vector<SkeletonSequence>& train_set,
                  const TrainConfig& config, const TrainOptions& options) {
  TrainResult result;
  result.classes = class_labels(train_set);
  if (result.classes.size() < 2) {
    throw std::invalid_argument("train: the train split needs at least 2 subjects, got " +
                                std::to_string(result.classes.size()));
  }
  if (result.classes.size() > model.config().num_classes) {
    throw std::invalid_argument("train: " + std::to_string(result.classes.size()) +
                                " subjects exceed model.num_classes = " +
                                std::to_string(model.config().num_classes));
  }
  if (config.batch_size > train_set.size()) {
    throw std::invalid_argument("train: batch_size " + std::to_string(config.batch_size) +
                                " exceeds the train set size " + std::to_string(train_set.size()));
  }
  if (config.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");

  std::vector<std::size_t> labels;
  std::vector<StreamBundle> bundles;
  labels.reserve(train_set.size());
  bundles.reserve(train_set.size());
  for (const auto& s : train_set) {
    auto it = std::lower_bound(result.classes.begin(), result.classes.end(), s.subject_id);
    labels.push_back(static_cast<std::size_t>(it - result.classes.begin()));
    bundles.push_back(make_stream_bundle(s, model.topology()));
  }

  std::vector<std::size_t> selected = options.streams;
  if (selected.empty()) {
    selected.resize(model.streams().size());
    std::iota(selected.begin(), selected.end(), 0);
  }

  const bool single = config.precision == Precision::single;
  for (std::size_t si : selected) {
    const StreamModel& stream = model.stream(si);
    const std::string name(to_string(stream.stream().kind));
    TensorList tensors = model.stream_tensors(si);
    if (single) round_parameters(tensors);

    std::vector<Tensor> params;
    for (const auto& nt : tensors)
      if (nt.trainable) params.push_back(nt.tensor);
    Sgd sgd(params, config.momentum, config.weight_decay);

    std::vector<Tensor> inputs;
    inputs.reserve(bundles.size());
    for (const auto& b : bundles) {
      Tensor x = bundle_stream(b, stream.stream().kind);
      if (single) {
        x = x.clone();
        round_to_single(x.mutable_data());
      }
      inputs.push_back(x);
    }

    Rng rng(config.seed + 0x9e3779b97f4a7c15ULL * (si + 1));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      const double lr = config.learning_rate(epoch);
      shuffle(order, rng);
      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        std::vector<Tensor> xs;
        std::vector<std::size_t> ys;
        for (std::size_t i = start; i < end; ++i) {
          xs.push_back(inputs[order[i]]);
          ys.push_back(labels[order[i]]);
        }
        StreamOutput out = stream.forward(stack_samples(xs), true);
        Tensor loss = softmax_cross_entropy(out.logits, ys);
        const double l = loss.item();
        if (!std::isfinite(l)) {
          throw TrainingDivergedError("train: non-finite loss in stream " + name + " at epoch " +
                                      std::to_string(epoch) + ", batch starting at " +
                                      std::to_string(start) + " (lr " + std::to_string(lr) + ")");
        }
        loss_sum += l * static_cast<double>(ys.size());

        auto logits = out.logits.data();
        const std::size_t k = out.logits.dim(1);
        for (std::size_t r = 0; r < ys.size(); ++r) {
          auto row = logits.subspan(r * k, k);
          auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
          if (best == ys[r]) ++correct;
        }

        sgd.zero_grad();
        loss.backward();
        sgd.step(lr);
        if (single) round_parameters(tensors);
      }
      EpochMetrics m{name, epoch, lr, loss_sum / static_cast<double>(order.size()),
                     static_cast<double>(correct) / static_cast<double>(order.size())};
      result.log.push_back(m);
      if (options.on_epoch) options.on_epoch(m);
    }
  }
  return result;
}

std::vector<EmbeddingRecord> extract_embeddings(const MultiStreamModel& model,
                                                const std::vector<SkeletonSequence>& sequences,
                                                std::size_t batch_size) {
  if (batch_size == 0) batch_size = 1;
  std::vector<EmbeddingRecord> records;
  records.reserve(sequences.size());
  for (std::size_t start = 0; start < sequences.size(); start += batch_size) {
    const std::size_t end = std::min(sequences.size(), start + batch_size);
    std::vector<StreamBundle> bundles;
    for (std::size_t i = start; i < end; ++i) {
      bundles.push_back(make_stream_bundle(sequences[i], model.topology()));
    }
    Tensor f = model.embed(bundles);
    const std::size_t d = f.dim(1);
    for (std::size_t i = start; i < end; ++i) {
      const auto& s = sequences[i];
      EmbeddingRecord r;
      r.subject_id = s.subject_id;
      r.condition = s.condition;
      r.seq_index = s.seq_index;
      r.view_deg = s.view_deg;
      r.source = EmbeddingSource::model;
      auto row = f.data().subspan((i - start) * d, d);
      r.vector.assign(row.begin(), row.end());
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace gaitgcn
