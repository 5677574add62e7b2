#include "gaitgcn/model.hpp"

#include <cmath>
#include <stdexcept>

#include "gaitgcn/ops.hpp"

namespace gaitgcn {

StreamModel::StreamModel(const ModelConfig& config, const StreamConfig& stream,
                         const SkeletonTopology& topo, Rng& rng)
    : channels_(config.channels),
      in_channels_(config.in_channels),
      frames_(config.frames),
      joints_(config.num_joints),
      stream_(stream) {
  config.validate();
  if (topo.num_joints() != config.num_joints) {
    throw std::invalid_argument("StreamModel: topology has " + std::to_string(topo.num_joints()) +
                                " joints, config expects " + std::to_string(config.num_joints));
  }
  if (config.batchnorm) data_bn_.emplace(config.in_channels * config.num_joints);

  std::size_t in = config.in_channels;
  for (std::size_t b = 0; b < config.channels.size(); ++b) {
    StgcBlockConfig bc;
    bc.in_channels = in;
    bc.out_channels = config.channels[b];
    bc.stride = config.strides[b];
    bc.adjacency = stream.adjacency;
    bc.tau = config.tau;
    bc.dilation = config.dilation;
    bc.temporal_kernel = config.temporal_kernel;
    bc.temporal_dilations = config.temporal_dilations;
    bc.attention = stream.attention;
    bc.reduction = config.reduction;
    bc.batchnorm = config.batchnorm;
    blocks_.emplace_back(bc, topo, rng);
    in = config.channels[b];
  }
  fc_weight_ = init_uniform({in, config.num_classes}, in, rng);
  fc_bias_ = Tensor({config.num_classes}, 0.0, true);
}

StreamOutput StreamModel::forward(const Tensor& input, bool training) const {
  Tensor x = input;
  if (x.ndim() == 3) x = reshape(x, {1, x.dim(0), x.dim(1), x.dim(2)});
  if (x.ndim() != 4 || x.dim(1) != in_channels_ || x.dim(2) != frames_ || x.dim(3) != joints_) {
    throw ShapeError("StreamModel: expected input (" + std::to_string(in_channels_) + "," +
                     std::to_string(frames_) + "," + std::to_string(joints_) +
                     ") or batched, got " + shape_str(input.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1), t = x.dim(2), v = x.dim(3);

  if (data_bn_) {
    Tensor y = reshape(transpose(x, {0, 1, 3, 2}), {n, c * v, t});
    y = data_bn_->forward(y, training);
    x = transpose(reshape(y, {n, c, v, t}), {0, 1, 3, 2});
  }

  StreamOutput out;
  for (const auto& block : blocks_) {
    x = block.forward(x, training);
    out.block_outputs.push_back(x);
  }
  out.embedding = mean(x, {2, 3});
  out.logits = linear(out.embedding, fc_weight_, fc_bias_);
  return out;
}

void StreamModel::collect(const std::string& prefix, TensorList& out) const {
  if (data_bn_) data_bn_->collect(prefix + "data_bn.", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect(prefix + "block" + std::to_string(b) + ".", out);
  }
  out.push_back({prefix + "fc.weight", fc_weight_, true});
  out.push_back({prefix + "fc.bias", fc_bias_, true});
}

MultiStreamModel::MultiStreamModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), topo_(SkeletonTopology::gait15()) {
  config_.validate();
  if (config_.num_joints != topo_.num_joints()) {
    throw std::invalid_argument("MultiStreamModel: only the " + std::to_string(topo_.num_joints()) +
                                "-joint topology is supported");
  }
  Rng rng(seed);
  streams_.reserve(config_.streams.size());
  for (const auto& s : config_.streams) streams_.emplace_back(config_, s, topo_, rng);
}

TensorList MultiStreamModel::tensors() const {
  TensorList out;
  for (std::size_t i = 0; i < streams_.size(); ++i) {
    streams_[i].collect("stream" + std::to_string(i) + ".", out);
  }
  return out;
}

TensorList MultiStreamModel::stream_tensors(std::size_t i) const {
  TensorList out;
  streams_.at(i).collect("stream" + std::to_string(i) + ".", out);
  return out;
}

std::size_t MultiStreamModel::embedding_dim() const {
  std::size_t d = 0;
  for (const auto& s : streams_) d += s.embedding_dim();
  return d;
}

Tensor stack_samples(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw std::invalid_argument("stack_samples: no samples");
  const Shape& s0 = samples.front().shape();
  std::vector<double> data;
  data.reserve(samples.size() * samples.front().numel());
  for (const auto& s : samples) {
    if (s.shape() != s0) {
      throw ShapeError("stack_samples: shape " + shape_str(s.shape()) + " differs from " +
                       shape_str(s0));
    }
    auto d = s.data();
    data.insert(data.end(), d.begin(), d.end());
  }
  Shape shape{samples.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  return Tensor(shape, std::move(data));
}

Tensor bundle_stream(const StreamBundle& bundle, StreamKind kind) {
  switch (kind) {
    case StreamKind::joint: return bundle.joint;
    case StreamKind::bone: return bundle.bone;
    case StreamKind::motion: return bundle.motion;
  }
  throw std::logic_error("bundle_stream: bad kind");
}

Tensor MultiStreamModel::embed(const std::vector<StreamBundle>& bundles) const {
  NoGradGuard no_grad;
  std::vector<Tensor> parts;
  for (const auto& stream : streams_) {
    std::vector<Tensor> xs;
    xs.reserve(bundles.size());
    for (const auto& b : bundles) xs.push_back(bundle_stream(b, stream.stream().kind));
    parts.push_back(stream.forward(stack_samples(xs), false).embedding);
  }
  return concat(parts, 1);
}

EmbeddingRecord forward_multistream(const MultiStreamModel& model, const SkeletonSequence& seq) {
  StreamBundle bundle = make_stream_bundle(seq, model.topology());
  Tensor f = model.embed({bundle});
  EmbeddingRecord rec;
  rec.subject_id = seq.subject_id;
  rec.condition = seq.condition;
  rec.seq_index = seq.seq_index;
  rec.view_deg = seq.view_deg;
  rec.source = EmbeddingSource::model;
  rec.vector.assign(f.data().begin(), f.data().end());
  return rec;
}

EmbeddingRecord fuse_two_branch(const EmbeddingRecord& f_m, const EmbeddingRecord& f_a, double lambda) {
  if (f_m.subject_id != f_a.subject_id || f_m.condition != f_a.condition ||
      f_m.seq_index != f_a.seq_index || f_m.view_deg != f_a.view_deg) {
    throw std::invalid_argument("fuse_two_branch: records describe different sequences (" +
                                f_m.subject_id + "/" + std::string(to_string(f_m.condition)) + "-" +
                                std::to_string(f_m.seq_index) + "/" + std::to_string(f_m.view_deg) +
                                " vs " + f_a.subject_id + "/" +
                                std::string(to_string(f_a.condition)) + "-" +
                                std::to_string(f_a.seq_index) + "/" + std::to_string(f_a.view_deg) + ")");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("fuse_two_branch: lambda must be positive and finite");
  }
  EmbeddingRecord out = f_m;
  out.source = EmbeddingSource::fused;
  out.vector.reserve(f_m.vector.size() + f_a.vector.size());
  for (double a : f_a.vector) out.vector.push_back(lambda * a);
  return out;
}

}  // namespace gaitgcn
