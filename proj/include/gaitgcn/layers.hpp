#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gaitgcn/graph.hpp"
#include "gaitgcn/ops.hpp"
#include "gaitgcn/random.hpp"
#include "gaitgcn/tensor.hpp"

// Layers operate on batched feature maps laid out (N, C, T, V).

namespace gaitgcn {

enum class Activation { relu, linear };
Tensor activate(const Tensor& x, Activation act);

enum class AttentionMode { stc, st, c, none };
std::string_view to_string(AttentionMode m);
AttentionMode parse_attention_mode(std::string_view s);

struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool trainable = true;  // false for running statistics
};
using TensorList = std::vector<NamedTensor>;

/// Fan-in scaled uniform initialization in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// x (N,C,T,V) times a (C_in, C_out) channel matrix -> (N,C_out,T,V).
Tensor mix_channels(const Tensor& x, const Tensor& weight);
/// x (N,C,T,V_in) aggregated by a (V_out, V_in) matrix -> (N,C,T,V_out).
Tensor aggregate_joints(const Tensor& x, const Tensor& aggregator);

class BatchNorm {
 public:
  explicit BatchNorm(std::size_t channels, double momentum = 0.1);
  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, TensorList& out) const;

 private:
  Tensor gamma_;
  Tensor beta_;
  mutable BatchNormState state_;
};

struct SpatialGcnOptions {
  bool batchnorm = true;
  Activation activation = Activation::relu;
};

/// σ(Σ_k Agg_k · f · W_k) with Agg_k = Λ_k^{-1/2}(A_k + M_k)Λ_k^{-1/2}.
class SpatialGcn {
 public:
  SpatialGcn(std::vector<AdjacencyMatrix> adjacencies, std::size_t in_channels,
             std::size_t out_channels, Rng& rng, SpatialGcnOptions options = {});

  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, TensorList& out) const;

  std::size_t scales() const { return adjacencies_.size(); }
  std::size_t num_joints() const { return adjacencies_.front().size(); }
  const AdjacencyMatrix& adjacency(std::size_t k) const { return adjacencies_[k]; }
  Tensor weight(std::size_t k) const { return weights_[k]; }          // (C_in, C_out)
  Tensor correction(std::size_t k) const { return corrections_[k]; }  // (V, V)

 private:
  std::vector<AdjacencyMatrix> adjacencies_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> corrections_;
  std::optional<BatchNorm> bn_;
  SpatialGcnOptions options_;
};

struct UnifiedStgcOptions {
  std::size_t tau = 3;
  std::size_t dilation = 1;
  bool batchnorm = true;
  Activation activation = Activation::relu;
};

/// Graph convolution over τ-frame windows of tiled joints: for each frame,
/// gathers frames t + d(i - (τ-1)/2) (zero outside the sequence), aggregates
/// over the τV spacetime nodes and keeps the centre frame's rows.
class UnifiedStgc {
 public:
  UnifiedStgc(const AdjacencyMatrix& base, std::size_t in_channels, std::size_t out_channels,
              Rng& rng, UnifiedStgcOptions options = {});

  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, TensorList& out) const;

  const AdjacencyMatrix& tiled() const { return tiled_; }
  std::size_t num_joints() const { return base_size_; }
  Tensor weight() const { return weight_; }
  Tensor correction() const { return correction_; }  // (τV, τV)
  const UnifiedStgcOptions& options() const { return options_; }

 private:
  AdjacencyMatrix tiled_;
  std::size_t base_size_;
  Tensor weight_;
  Tensor correction_;
  std::optional<BatchNorm> bn_;
  UnifiedStgcOptions options_;
};

struct TemporalConvOptions {
  std::size_t kernel = 3;
  std::vector<std::size_t> dilations{1, 2};
  bool pointwise_branch = true;
  std::size_t stride = 1;
  bool residual = true;
  bool batchnorm = true;
  Activation activation = Activation::relu;
};

/// Multi-branch bottleneck temporal convolution. Each dilated branch is a
/// 1x1 reduction, activation and a Kx1 dilated convolution; the optional
/// pointwise branch is a strided 1x1 convolution. Branch outputs are
/// concatenated to C_out and summed with the residual path.
class TemporalConv {
 public:
  TemporalConv(std::size_t in_channels, std::size_t out_channels, Rng& rng,
               TemporalConvOptions options = {});

  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, TensorList& out) const;

  struct Branch {
    std::size_t width = 0;
    std::size_t dilation = 0;  // 0 marks the pointwise branch
    Tensor reduce;             // (width, C_in, 1, 1)
    Tensor temporal;           // (width, width, K, 1); undefined for pointwise
    std::optional<BatchNorm> reduce_bn;
    std::optional<BatchNorm> out_bn;
  };
  const std::vector<Branch>& branches() const { return branches_; }
  const TemporalConvOptions& options() const { return options_; }
  bool projected_residual() const { return residual_weight_.defined(); }
  Tensor residual_weight() const { return residual_weight_; }

 private:
  std::size_t in_channels_;
  std::size_t out_channels_;
  std::vector<Branch> branches_;
  Tensor residual_weight_;
  std::optional<BatchNorm> residual_bn_;
  TemporalConvOptions options_;
};

/// Attention maps of one STC-Att pass; undefined members were not computed.
struct AttentionMaps {
  Tensor channel;   // (N, C)
  Tensor temporal;  // (N, C, T)
  Tensor spatial;   // (N, C, V)
  Tensor st;        // (N, C, T, V) = spatial ⊗ temporal per channel
};

/// Spatial-temporal-channel attention. The channel branch squeezes (T,V)
/// by global average pooling and excites through C -> C/r -> C with a final
/// sigmoid. The spatio-temporal branch pools over joints (C,T) and frames
/// (C,V), compresses the concatenation C -> C/r with ReLU, then two
/// independent heads C/r -> C score frames and joints through sigmoids.
class StcAtt {
 public:
  StcAtt(std::size_t channels, std::size_t reduction, AttentionMode mode, Rng& rng);

  Tensor forward(const Tensor& x) const;
  AttentionMaps maps(const Tensor& x) const;
  void collect(const std::string& prefix, TensorList& out) const;

  AttentionMode mode() const { return mode_; }
  std::size_t channels() const { return channels_; }
  std::size_t hidden() const { return hidden_; }

  // Channel branch: (C, C/r), (C/r), (C/r, C), (C).
  Tensor fc1_weight, fc1_bias, fc2_weight, fc2_bias;
  // Spatio-temporal branch, as 1x1 convolutions (out, in, 1, 1).
  Tensor compress_weight, compress_bias;
  Tensor temporal_weight, temporal_bias;
  Tensor spatial_weight, spatial_bias;

 private:
  bool has_channel() const { return mode_ == AttentionMode::stc || mode_ == AttentionMode::c; }
  bool has_st() const { return mode_ == AttentionMode::stc || mode_ == AttentionMode::st; }

  std::size_t channels_;
  std::size_t hidden_;
  AttentionMode mode_;
};

struct StgcBlockConfig {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t stride = 1;
  AdjacencySpec adjacency;
  std::size_t tau = 3;
  std::size_t dilation = 1;
  // Width of the windowed pathway before its strided reduction; 0 means out_channels.
  std::size_t g3d_channels = 0;
  std::size_t temporal_kernel = 3;
  std::vector<std::size_t> temporal_dilations{1, 2};
  bool temporal_residual = true;
  AttentionMode attention = AttentionMode::stc;
  std::size_t reduction = 4;
  bool batchnorm = true;
  Activation activation = Activation::relu;
};

/// Windowed spatio-temporal pathway and factorized spatial-then-temporal
/// pathway, summed, activated and passed through STC-Att.
class StgcBlock {
 public:
  StgcBlock(const StgcBlockConfig& config, const SkeletonTopology& topo, Rng& rng);

  Tensor forward(const Tensor& x, bool training) const;
  void collect(const std::string& prefix, TensorList& out) const;

  const StgcBlockConfig& config() const { return config_; }
  const SpatialGcn& spatial() const { return spatial_; }
  const TemporalConv& temporal() const { return temporal_; }
  const UnifiedStgc& windowed() const { return windowed_; }
  Tensor windowed_reduce() const { return reduce_weight_; }  // (C_out, C_g3d, K, 1)
  const StcAtt& attention() const { return attention_; }

 private:
  StgcBlockConfig config_;
  SpatialGcn spatial_;
  TemporalConv temporal_;
  UnifiedStgc windowed_;
  Tensor reduce_weight_;
  std::optional<BatchNorm> reduce_bn_;
  StcAtt attention_;
};

/// Looks up a tensor by exact name; throws std::out_of_range if absent.
Tensor find_tensor(const TensorList& list, std::string_view name);

}  // namespace gaitgcn
