#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gaitgcn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when operand shapes violate an operation's shape rule.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised in checked mode when a primitive receives NaN or Inf.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Tensor;

namespace detail {

struct TensorImpl;

// One recorded primitive application. The backward closure reads the
// gradient of the output and accumulates into the inputs' gradients.
struct GraphNode {
  std::uint64_t sequence = 0;
  std::string op;
  std::vector<Tensor> inputs;
  std::function<void(std::span<const double> out_grad)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::shared_ptr<GraphNode> grad_fn;
};

}  // namespace detail

/// Dense row-major N-dimensional array of doubles with optional gradient.
///
/// Tensor is a cheap handle: copies share storage. Values produced by the
/// primitives in ops.hpp record their provenance when any input requires a
/// gradient, and `backward()` walks that record in reverse creation order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access. Only leaves (parameters, inputs) should be mutated,
  // and only between forward passes.
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;

  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Gradient of this scalar with respect to every reachable requires_grad
  // tensor. Leaf gradients accumulate across calls; intermediate gradients
  // are reset at the start of each call.
  void backward() const;

  /// Same storage values, no history, no gradient requirement.
  Tensor detach() const;
  /// Deep copy of the values.
  Tensor clone() const;

  const detail::GraphNode* grad_fn() const;
  const detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  friend Tensor make_result(Shape, std::vector<double>, std::string,
                            std::vector<Tensor>,
                            std::function<void(std::span<const double>)>);
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// Op names of the recorded graph feeding `root`, in the order backward
/// visits them (reverse creation order).
std::vector<std::string> backward_order(const Tensor& root);

// Builds an op output. When any input requires grad and recording is
// enabled, the output carries a graph node with the given backward closure.
Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward);

// Accumulates `g` into `t`'s gradient when `t` requires one.
void accumulate_grad(const Tensor& t, std::span<const double> g);

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Enables non-finite input checks in every primitive on this thread.
class CheckedModeGuard {
 public:
  explicit CheckedModeGuard(bool enabled = true);
  ~CheckedModeGuard();
  CheckedModeGuard(const CheckedModeGuard&) = delete;
  CheckedModeGuard& operator=(const CheckedModeGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();
bool checked_mode();

}  // namespace gaitgcn
