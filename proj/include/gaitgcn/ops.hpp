#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "gaitgcn/tensor.hpp"

// Differentiable primitives. Every function validates shapes and throws
// ShapeError naming the op and the offending shapes. No implicit
// broadcasting: mixing shapes goes through expand() or add_bias().

namespace gaitgcn {

Tensor matmul(const Tensor& a, const Tensor& b);           // (m,k)x(k,n)
Tensor batched_matmul(const Tensor& a, const Tensor& b);   // (B,m,k)x(B,k,n)

struct Conv2dParams {
  std::array<std::size_t, 2> stride{1, 1};
  std::array<std::size_t, 2> dilation{1, 1};
  std::array<std::size_t, 2> padding{0, 0};
};

/// x: (N,C,H,W), weight: (O,C,KH,KW), bias: undefined or (O).
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const Conv2dParams& params = {});

Tensor add(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
/// Adds a 1-D `bias` along `axis` of x.
Tensor add_bias(const Tensor& x, const Tensor& bias, std::size_t axis);
/// x: (N,in), weight: (in,out), bias: (out).
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization over every axis except axis 1. In training
/// mode the batch statistics are used and the running statistics move
/// toward them by `momentum`; otherwise the running statistics are used.
Tensor batchnorm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                 BatchNormState& state, bool training);

/// Reductions drop the reduced axes. Reducing every axis gives shape (1).
Tensor mean(const Tensor& x, std::vector<std::size_t> axes);
Tensor max(const Tensor& x, std::vector<std::size_t> axes);
Tensor sum(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);
/// General axis permutation: out.shape[i] == x.shape[perm[i]].
Tensor transpose(const Tensor& x, std::vector<std::size_t> perm);
Tensor transpose(const Tensor& x);  // 2-D
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
/// Explicit broadcast: every axis of x must equal the target or be 1.
Tensor expand(const Tensor& x, Shape shape);

/// x: (N,C,T,V) -> (N,C,T,tau*V). Node i*V+v of frame t holds joint v of
/// frame t + dilation*(i - (tau-1)/2), zero outside [0,T). tau must be odd.
Tensor unfold_temporal(const Tensor& x, std::size_t tau, std::size_t dilation);

/// Mean cross-entropy of softmax(logits) against integer class labels.
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);

}  // namespace gaitgcn
