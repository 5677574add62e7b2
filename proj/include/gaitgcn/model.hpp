#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gaitgcn/config.hpp"
#include "gaitgcn/layers.hpp"
#include "gaitgcn/skeleton.hpp"
#include "gaitgcn/tensor.hpp"

namespace gaitgcn {

struct StreamOutput {
  Tensor embedding;                  // (N, C_last)
  Tensor logits;                     // (N, num_classes)
  std::vector<Tensor> block_outputs;  // (N, C_b, T_b, V) per block
};

/// One skeleton stream: data batchnorm over (C*V) channels, the STGC blocks,
/// global average pooling over (T, V) and a linear classifier.
class StreamModel {
 public:
  StreamModel(const ModelConfig& config, const StreamConfig& stream,
              const SkeletonTopology& topo, Rng& rng);

  /// x is (C, T, V) or (N, C, T, V); the unbatched form returns N = 1.
  StreamOutput forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, TensorList& out) const;

  const StreamConfig& stream() const { return stream_; }
  const std::vector<StgcBlock>& blocks() const { return blocks_; }
  std::size_t embedding_dim() const { return channels_.back(); }

 private:
  std::vector<std::size_t> channels_;
  std::size_t in_channels_;
  std::size_t frames_;
  std::size_t joints_;
  StreamConfig stream_;
  std::optional<BatchNorm> data_bn_;
  std::vector<StgcBlock> blocks_;
  Tensor fc_weight_;  // (C_last, num_classes)
  Tensor fc_bias_;
};

class MultiStreamModel {
 public:
  explicit MultiStreamModel(ModelConfig config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }
  const SkeletonTopology& topology() const { return topo_; }
  const std::vector<StreamModel>& streams() const { return streams_; }
  const StreamModel& stream(std::size_t i) const { return streams_.at(i); }

  /// Every tensor, named "stream<i>.<...>", including running statistics.
  TensorList tensors() const;
  TensorList stream_tensors(std::size_t i) const;
  std::size_t embedding_dim() const;

  /// f_m for a batch of bundles, (N, sum of stream embedding dims), evaluation mode.
  Tensor embed(const std::vector<StreamBundle>& bundles) const;

 private:
  ModelConfig config_;
  SkeletonTopology topo_;
  std::vector<StreamModel> streams_;
};

/// Stacks (C,T,V) tensors into (N,C,T,V); all shapes must agree.
Tensor stack_samples(const std::vector<Tensor>& samples);
Tensor bundle_stream(const StreamBundle& bundle, StreamKind kind);

// Embedding records --------------------------------------------------------

enum class EmbeddingSource { model, appearance, fused };
std::string_view to_string(EmbeddingSource s);
EmbeddingSource parse_embedding_source(std::string_view s);

struct EmbeddingRecord {
  std::string subject_id;
  Condition condition = Condition::NM;
  int seq_index = 1;
  int view_deg = 0;
  EmbeddingSource source = EmbeddingSource::model;
  std::vector<double> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// f_m record of one sequence (evaluation mode).
EmbeddingRecord forward_multistream(const MultiStreamModel& model, const SkeletonSequence& seq);

/// concat(f_m, lambda * f_a); metadata of the two records must agree.
EmbeddingRecord fuse_two_branch(const EmbeddingRecord& f_m, const EmbeddingRecord& f_a, double lambda);

/// One record per line: subject condition seq view source v0 v1 ... (%.17g).
void write_embeddings(const std::filesystem::path& path, const std::vector<EmbeddingRecord>& records);
std::string format_embeddings(const std::vector<EmbeddingRecord>& records);
std::vector<EmbeddingRecord> read_embeddings(const std::filesystem::path& path);
std::vector<EmbeddingRecord> parse_embeddings(std::string_view text, const std::string& source = "<memory>");

// Checkpoints --------------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const MultiStreamModel& model, const std::filesystem::path& path);
std::string serialize_checkpoint(const MultiStreamModel& model);
/// Rebuilds the model from the stored config and restores every tensor.
MultiStreamModel load_checkpoint(const std::filesystem::path& path);
MultiStreamModel deserialize_checkpoint(std::string_view bytes);
/// Restores into an existing model; the stored config must equal model.config().
void load_checkpoint_into(MultiStreamModel& model, const std::filesystem::path& path);

}  // namespace gaitgcn
