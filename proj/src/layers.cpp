#include "gaitgcn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace gaitgcn {

Tensor activate(const Tensor& x, Activation act) {
  return act == Activation::relu ? relu(x) : x;
}

std::string_view to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::stc: return "stc";
    case AttentionMode::st: return "st";
    case AttentionMode::c: return "c";
    case AttentionMode::none: return "none";
  }
  return "?";
}

AttentionMode parse_attention_mode(std::string_view s) {
  if (s == "stc") return AttentionMode::stc;
  if (s == "st") return AttentionMode::st;
  if (s == "c") return AttentionMode::c;
  if (s == "none") return AttentionMode::none;
  throw std::invalid_argument("unknown attention mode '" + std::string(s) +
                              "' (expected stc, st, c or none)");
}

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> values(shape_numel(shape));
  for (double& v : values) v = uniform(rng, -bound, bound);
  return Tensor(std::move(shape), std::move(values), true);
}

Tensor mix_channels(const Tensor& x, const Tensor& weight) {
  if (weight.ndim() != 2) {
    throw ShapeError("mix_channels: weight must be (C_in, C_out), got " + shape_str(weight.shape()));
  }
  const std::size_t in = weight.dim(0), out = weight.dim(1);
  return conv2d(x, reshape(transpose(weight), {out, in, 1, 1}), Tensor());
}

Tensor aggregate_joints(const Tensor& x, const Tensor& aggregator) {
  if (x.ndim() != 4 || aggregator.ndim() != 2 || aggregator.dim(1) != x.dim(3)) {
    throw ShapeError("aggregate_joints: aggregator " + shape_str(aggregator.shape()) +
                     " does not act on input " + shape_str(x.shape()));
  }
  const std::size_t N = x.dim(0), C = x.dim(1), T = x.dim(2), V = x.dim(3);
  const std::size_t V_out = aggregator.dim(0);
  Tensor flat = reshape(x, {N * C * T, V});
  return reshape(matmul(flat, transpose(aggregator)), {N, C, T, V_out});
}

Tensor find_tensor(const TensorList& list, std::string_view name) {
  for (const auto& nt : list) {
    if (nt.name == name) return nt.tensor;
  }
  throw std::out_of_range("no tensor named '" + std::string(name) + "'");
}

// --- BatchNorm ---------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t channels, double momentum)
    : gamma_(Shape{channels}, 1.0, true), beta_(Shape{channels}, 0.0, true) {
  state_.running_mean = Tensor(Shape{channels}, 0.0);
  state_.running_var = Tensor(Shape{channels}, 1.0);
  state_.momentum = momentum;
}

Tensor BatchNorm::forward(const Tensor& x, bool training) const {
  return batchnorm(x, gamma_, beta_, state_, training);
}

void BatchNorm::collect(const std::string& prefix, TensorList& out) const {
  out.push_back({prefix + "gamma", gamma_, true});
  out.push_back({prefix + "beta", beta_, true});
  out.push_back({prefix + "running_mean", state_.running_mean, false});
  out.push_back({prefix + "running_var", state_.running_var, false});
}

// --- SpatialGcn --------------------------------------------------------------

SpatialGcn::SpatialGcn(std::vector<AdjacencyMatrix> adjacencies, std::size_t in_channels,
                       std::size_t out_channels, Rng& rng, SpatialGcnOptions options)
    : adjacencies_(std::move(adjacencies)), options_(options) {
  if (adjacencies_.empty()) throw std::invalid_argument("SpatialGcn: no adjacency matrices");
  const std::size_t V = adjacencies_.front().size();
  for (const auto& A : adjacencies_) {
    if (A.size() != V) throw std::invalid_argument("SpatialGcn: adjacency sizes differ");
    normalize_aggregator(A);  // rejects isolated nodes up front
  }
  const std::size_t fan_in = in_channels * adjacencies_.size();
  for (std::size_t k = 0; k < adjacencies_.size(); ++k) {
    weights_.push_back(init_uniform({in_channels, out_channels}, fan_in, rng));
    corrections_.push_back(Tensor({V, V}, 0.0, true));
  }
  if (options_.batchnorm) bn_.emplace(out_channels);
}

Tensor SpatialGcn::forward(const Tensor& x, bool training) const {
  if (x.ndim() != 4 || x.dim(3) != num_joints() || x.dim(1) != weights_.front().dim(0)) {
    throw ShapeError("SpatialGcn: expected (N," + std::to_string(weights_.front().dim(0)) +
                     ",T," + std::to_string(num_joints()) + "), got " + shape_str(x.shape()));
  }
  Tensor total;
  for (std::size_t k = 0; k < adjacencies_.size(); ++k) {
    Tensor agg = aggregator_tensor(adjacencies_[k], corrections_[k]);
    Tensor term = mix_channels(aggregate_joints(x, agg), weights_[k]);
    total = total.defined() ? add(total, term) : term;
  }
  if (bn_) total = bn_->forward(total, training);
  return activate(total, options_.activation);
}

void SpatialGcn::collect(const std::string& prefix, TensorList& out) const {
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    out.push_back({prefix + "weight" + std::to_string(k), weights_[k], true});
    out.push_back({prefix + "correction" + std::to_string(k), corrections_[k], true});
  }
  if (bn_) bn_->collect(prefix + "bn.", out);
}

// --- UnifiedStgc -------------------------------------------------------------

UnifiedStgc::UnifiedStgc(const AdjacencyMatrix& base, std::size_t in_channels,
                         std::size_t out_channels, Rng& rng, UnifiedStgcOptions options)
    : base_size_(base.size()), options_(options) {
  if (options_.tau % 2 == 0) {
    throw std::invalid_argument("UnifiedStgc: window size must be odd so it centres on a frame, got " +
                                std::to_string(options_.tau));
  }
  tiled_ = tile_st_adjacency(base, options_.tau, options_.dilation);
  normalize_aggregator(tiled_);
  const std::size_t n = tiled_.size();
  weight_ = init_uniform({in_channels, out_channels}, in_channels, rng);
  correction_ = Tensor({n, n}, 0.0, true);
  if (options_.batchnorm) bn_.emplace(out_channels);
}

Tensor UnifiedStgc::forward(const Tensor& x, bool training) const {
  if (x.ndim() != 4 || x.dim(3) != base_size_ || x.dim(1) != weight_.dim(0)) {
    throw ShapeError("UnifiedStgc: expected (N," + std::to_string(weight_.dim(0)) + ",T," +
                     std::to_string(base_size_) + "), got " + shape_str(x.shape()));
  }
  const std::size_t centre = (options_.tau - 1) / 2;
  Tensor windows = unfold_temporal(x, options_.tau, options_.dilation);
  Tensor agg = aggregator_tensor(tiled_, correction_);
  Tensor centre_rows = slice(agg, 0, centre * base_size_, base_size_);
  Tensor out = mix_channels(aggregate_joints(windows, centre_rows), weight_);
  if (bn_) out = bn_->forward(out, training);
  return activate(out, options_.activation);
}

void UnifiedStgc::collect(const std::string& prefix, TensorList& out) const {
  out.push_back({prefix + "weight", weight_, true});
  out.push_back({prefix + "correction", correction_, true});
  if (bn_) bn_->collect(prefix + "bn.", out);
}

// --- TemporalConv ------------------------------------------------------------

TemporalConv::TemporalConv(std::size_t in_channels, std::size_t out_channels, Rng& rng,
                           TemporalConvOptions options)
    : in_channels_(in_channels), out_channels_(out_channels), options_(std::move(options)) {
  if (options_.kernel % 2 == 0) {
    throw std::invalid_argument("TemporalConv: kernel size must be odd for symmetric padding");
  }
  if (options_.stride < 1) throw std::invalid_argument("TemporalConv: stride must be >= 1");
  const std::size_t n_branches = options_.dilations.size() + (options_.pointwise_branch ? 1 : 0);
  if (n_branches == 0 || n_branches > out_channels) {
    throw std::invalid_argument("TemporalConv: need between 1 and C_out branches");
  }
  for (std::size_t b = 0; b < n_branches; ++b) {
    Branch br;
    br.width = out_channels / n_branches + (b < out_channels % n_branches ? 1 : 0);
    br.reduce = init_uniform({br.width, in_channels, 1, 1}, in_channels, rng);
    if (b < options_.dilations.size()) {
      br.dilation = options_.dilations[b];
      if (br.dilation < 1) throw std::invalid_argument("TemporalConv: dilation must be >= 1");
      br.temporal = init_uniform({br.width, br.width, options_.kernel, 1}, br.width * options_.kernel, rng);
      if (options_.batchnorm) br.reduce_bn.emplace(br.width);
    }
    if (options_.batchnorm) br.out_bn.emplace(br.width);
    branches_.push_back(std::move(br));
  }
  if (options_.residual && (in_channels != out_channels || options_.stride != 1)) {
    residual_weight_ = init_uniform({out_channels, in_channels, 1, 1}, in_channels, rng);
    if (options_.batchnorm) residual_bn_.emplace(out_channels);
  }
}

Tensor TemporalConv::forward(const Tensor& x, bool training) const {
  if (x.ndim() != 4 || x.dim(1) != in_channels_) {
    throw ShapeError("TemporalConv: expected (N," + std::to_string(in_channels_) + ",T,V), got " +
                     shape_str(x.shape()));
  }
  const std::size_t s = options_.stride;
  std::vector<Tensor> outs;
  for (const auto& br : branches_) {
    Tensor y;
    if (br.dilation == 0) {
      Conv2dParams p;
      p.stride = {s, 1};
      y = conv2d(x, br.reduce, Tensor(), p);
    } else {
      y = conv2d(x, br.reduce, Tensor());
      if (br.reduce_bn) y = br.reduce_bn->forward(y, training);
      y = activate(y, options_.activation);
      Conv2dParams p;
      p.stride = {s, 1};
      p.dilation = {br.dilation, 1};
      p.padding = {(options_.kernel - 1) * br.dilation / 2, 0};
      y = conv2d(y, br.temporal, Tensor(), p);
    }
    if (br.out_bn) y = br.out_bn->forward(y, training);
    outs.push_back(y);
  }
  Tensor out = outs.size() == 1 ? outs.front() : concat(outs, 1);
  if (options_.residual) {
    Tensor res = x;
    if (residual_weight_.defined()) {
      Conv2dParams p;
      p.stride = {s, 1};
      res = conv2d(x, residual_weight_, Tensor(), p);
      if (residual_bn_) res = residual_bn_->forward(res, training);
    }
    out = add(out, res);
  }
  return out;
}

void TemporalConv::collect(const std::string& prefix, TensorList& out) const {
  for (std::size_t b = 0; b < branches_.size(); ++b) {
    const auto& br = branches_[b];
    const std::string p = prefix + "branch" + std::to_string(b) + ".";
    out.push_back({p + "reduce", br.reduce, true});
    if (br.temporal.defined()) out.push_back({p + "temporal", br.temporal, true});
    if (br.reduce_bn) br.reduce_bn->collect(p + "reduce_bn.", out);
    if (br.out_bn) br.out_bn->collect(p + "out_bn.", out);
  }
  if (residual_weight_.defined()) out.push_back({prefix + "residual", residual_weight_, true});
  if (residual_bn_) residual_bn_->collect(prefix + "residual_bn.", out);
}

// --- StcAtt ------------------------------------------------------------------

StcAtt::StcAtt(std::size_t channels, std::size_t reduction, AttentionMode mode, Rng& rng)
    : channels_(channels), hidden_(0), mode_(mode) {
  if (reduction == 0 || channels % reduction != 0) {
    throw std::invalid_argument("StcAtt: channels (" + std::to_string(channels) +
                                ") must be divisible by the reduction ratio (" +
                                std::to_string(reduction) + ")");
  }
  hidden_ = channels / reduction;
  if (has_channel()) {
    fc1_weight = init_uniform({channels, hidden_}, channels, rng);
    fc1_bias = init_uniform({hidden_}, channels, rng);
    fc2_weight = init_uniform({hidden_, channels}, hidden_, rng);
    fc2_bias = init_uniform({channels}, hidden_, rng);
  }
  if (has_st()) {
    compress_weight = init_uniform({hidden_, channels, 1, 1}, channels, rng);
    compress_bias = init_uniform({hidden_}, channels, rng);
    temporal_weight = init_uniform({channels, hidden_, 1, 1}, hidden_, rng);
    temporal_bias = init_uniform({channels}, hidden_, rng);
    spatial_weight = init_uniform({channels, hidden_, 1, 1}, hidden_, rng);
    spatial_bias = init_uniform({channels}, hidden_, rng);
  }
}

AttentionMaps StcAtt::maps(const Tensor& x) const {
  if (x.ndim() != 4 || x.dim(1) != channels_) {
    throw ShapeError("StcAtt: expected (N," + std::to_string(channels_) + ",T,V), got " +
                     shape_str(x.shape()));
  }
  const std::size_t N = x.dim(0), C = channels_, T = x.dim(2), V = x.dim(3);
  AttentionMaps m;
  if (has_channel()) {
    Tensor squeezed = mean(x, {2, 3});  // (N, C)
    Tensor hidden = relu(linear(squeezed, fc1_weight, fc1_bias));
    m.channel = sigmoid(linear(hidden, fc2_weight, fc2_bias));
  }
  if (has_st()) {
    Tensor per_frame = mean(x, {3});  // (N, C, T)
    Tensor per_joint = mean(x, {2});  // (N, C, V)
    Tensor pooled = reshape(concat({per_frame, per_joint}, 2), {N, C, T + V, 1});
    Tensor compressed = relu(conv2d(pooled, compress_weight, compress_bias));
    Tensor frames = slice(compressed, 2, 0, T);
    Tensor joints = slice(compressed, 2, T, V);
    m.temporal = reshape(sigmoid(conv2d(frames, temporal_weight, temporal_bias)), {N, C, T});
    m.spatial = reshape(sigmoid(conv2d(joints, spatial_weight, spatial_bias)), {N, C, V});
    Tensor outer = batched_matmul(reshape(m.temporal, {N * C, T, 1}), reshape(m.spatial, {N * C, 1, V}));
    m.st = reshape(outer, {N, C, T, V});
  }
  return m;
}

Tensor StcAtt::forward(const Tensor& x) const {
  if (mode_ == AttentionMode::none) return x;
  const AttentionMaps m = maps(x);
  Tensor out = x;
  if (m.channel.defined()) {
    const std::size_t N = x.dim(0), C = x.dim(1);
    out = multiply(out, expand(reshape(m.channel, {N, C, 1, 1}), x.shape()));
  }
  if (m.st.defined()) out = multiply(out, m.st);
  return out;
}

void StcAtt::collect(const std::string& prefix, TensorList& out) const {
  const std::pair<const char*, Tensor> named[] = {
      {"fc1_weight", fc1_weight},         {"fc1_bias", fc1_bias},
      {"fc2_weight", fc2_weight},         {"fc2_bias", fc2_bias},
      {"compress_weight", compress_weight}, {"compress_bias", compress_bias},
      {"temporal_weight", temporal_weight}, {"temporal_bias", temporal_bias},
      {"spatial_weight", spatial_weight},   {"spatial_bias", spatial_bias},
  };
  for (const auto& [name, t] : named) {
    if (t.defined()) out.push_back({prefix + name, t, true});
  }
}

// --- StgcBlock ---------------------------------------------------------------

namespace {

TemporalConvOptions temporal_options(const StgcBlockConfig& c) {
  TemporalConvOptions o;
  o.kernel = c.temporal_kernel;
  o.dilations = c.temporal_dilations;
  o.stride = c.stride;
  o.residual = c.temporal_residual;
  o.batchnorm = c.batchnorm;
  o.activation = c.activation;
  return o;
}

std::size_t g3d_width(const StgcBlockConfig& c) {
  return c.g3d_channels ? c.g3d_channels : c.out_channels;
}

}  // namespace

StgcBlock::StgcBlock(const StgcBlockConfig& config, const SkeletonTopology& topo, Rng& rng)
    : config_(config),
      spatial_(config.adjacency.build(topo), config.in_channels, config.out_channels, rng,
               {config.batchnorm, config.activation}),
      temporal_(config.out_channels, config.out_channels, rng, temporal_options(config)),
      windowed_(config.adjacency.base(topo), config.in_channels, g3d_width(config), rng,
                {config.tau, config.dilation, config.batchnorm, config.activation}),
      attention_(config.out_channels, config.reduction, config.attention, rng) {
  if (config.temporal_kernel % 2 == 0) {
    throw std::invalid_argument("StgcBlock: temporal kernel must be odd");
  }
  const std::size_t g = g3d_width(config);
  reduce_weight_ = init_uniform({config.out_channels, g, config.temporal_kernel, 1},
                                g * config.temporal_kernel, rng);
  if (config.batchnorm) reduce_bn_.emplace(config.out_channels);
}

Tensor StgcBlock::forward(const Tensor& x, bool training) const {
  Tensor factorized = temporal_.forward(spatial_.forward(x, training), training);

  Conv2dParams p;
  p.stride = {config_.stride, 1};
  p.padding = {(config_.temporal_kernel - 1) / 2, 0};
  Tensor windowed = conv2d(windowed_.forward(x, training), reduce_weight_, Tensor(), p);
  if (reduce_bn_) windowed = reduce_bn_->forward(windowed, training);

  if (factorized.shape() != windowed.shape()) {
    throw ShapeError("StgcBlock: pathway outputs differ: " + shape_str(factorized.shape()) +
                     " vs " + shape_str(windowed.shape()));
  }
  Tensor out = activate(add(factorized, windowed), config_.activation);
  return attention_.forward(out);
}

void StgcBlock::collect(const std::string& prefix, TensorList& out) const {
  spatial_.collect(prefix + "spatial.", out);
  temporal_.collect(prefix + "temporal.", out);
  windowed_.collect(prefix + "windowed.", out);
  out.push_back({prefix + "windowed_reduce", reduce_weight_, true});
  if (reduce_bn_) reduce_bn_->collect(prefix + "windowed_reduce_bn.", out);
  attention_.collect(prefix + "attention.", out);
}

}  // namespace gaitgcn
