#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gaitgcn/graph.hpp"
#include "gaitgcn/layers.hpp"
#include "gaitgcn/skeleton.hpp"

namespace gaitgcn {

struct StreamConfig {
  StreamKind kind = StreamKind::joint;
  AdjacencySpec adjacency;
  AttentionMode attention = AttentionMode::stc;

  bool operator==(const StreamConfig& o) const {
    return kind == o.kind && adjacency.kind == o.adjacency.kind &&
           adjacency.scales == o.adjacency.scales && attention == o.attention;
  }
};

/// Architecture of the skeleton branch. Defaults are the full-size model:
/// three blocks of 96/192/384 channels with strides 1/2/2 on 2x120x15
/// input; the joint stream uses multi-scale natural adjacency with
/// spatio-temporal attention, bone and motion use the fully connected
/// graph with full attention.
struct ModelConfig {
  std::size_t in_channels = 2;
  std::size_t num_joints = 15;
  std::size_t frames = 120;
  std::vector<std::size_t> channels{96, 192, 384};
  std::vector<std::size_t> strides{1, 2, 2};
  std::size_t tau = 3;
  std::size_t dilation = 1;
  std::size_t reduction = 4;
  std::size_t temporal_kernel = 3;
  std::vector<std::size_t> temporal_dilations{1, 2};
  std::size_t num_classes = 74;
  bool batchnorm = true;
  double lambda = 400.0;
  std::vector<StreamConfig> streams{
      {StreamKind::joint, AdjacencySpec{AdjacencySpec::Kind::multiscale, 4}, AttentionMode::st},
      {StreamKind::bone, AdjacencySpec{AdjacencySpec::Kind::full, 0}, AttentionMode::stc},
      {StreamKind::motion, AdjacencySpec{AdjacencySpec::Kind::full, 0}, AttentionMode::stc},
  };

  bool operator==(const ModelConfig&) const = default;
  void validate() const;
};

enum class Precision { single, double_precision };
std::string_view to_string(Precision p);
Precision parse_precision(std::string_view s);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 65;
  double lr = 0.1;
  double lr_decay = 0.1;
  std::vector<std::size_t> lr_milestones{45, 55};
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
  Precision precision = Precision::double_precision;

  /// lr * decay^(number of milestones <= epoch), epochs counted from 0.
  double learning_rate(std::size_t epoch) const;
  bool operator==(const TrainConfig&) const = default;
};

/// Sequences of one condition with index in [first, last].
struct SequenceFilter {
  Condition condition = Condition::NM;
  int first = 1;
  int last = 1;

  bool matches(Condition c, int seq_index) const {
    return c == condition && seq_index >= first && seq_index <= last;
  }
  bool operator==(const SequenceFilter&) const = default;
};

/// Gallery NM01-04; probes NM05-06, BG01-02, CL01-02; 11 views 0..180.
struct EvalProtocol {
  SequenceFilter gallery{Condition::NM, 1, 4};
  std::vector<SequenceFilter> probes{
      {Condition::NM, 5, 6}, {Condition::BG, 1, 2}, {Condition::CL, 1, 2}};
  std::vector<int> views{0, 18, 36, 54, 72, 90, 108, 126, 144, 162, 180};

  bool operator==(const EvalProtocol&) const = default;
};

struct ExperimentConfig {
  ModelConfig model;
  TrainConfig train;
  EvalProtocol protocol;

  bool operator==(const ExperimentConfig&) const = default;
};

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

std::string experiment_config_to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(std::string_view text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Applies "section.key=value" (value parsed as JSON, else taken as a string).
void apply_override(ExperimentConfig& config, std::string_view assignment);

}  // namespace gaitgcn
