#include "gaitgcn/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

namespace gaitgcn {

namespace {

thread_local bool t_grad_enabled = true;
thread_local bool t_checked_mode = false;
std::atomic<std::uint64_t> g_node_sequence{0};

detail::TensorImpl& require_impl(const std::shared_ptr<detail::TensorImpl>& impl) {
  if (!impl) throw std::logic_error("use of undefined tensor");
  return *impl;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : Tensor(shape, std::vector<double>(shape_numel(shape), fill), requires_grad) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<detail::TensorImpl>()) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{value}, requires_grad);
}

const Shape& Tensor::shape() const { return require_impl(impl_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::size_t Tensor::numel() const { return require_impl(impl_).data.size(); }

std::span<const double> Tensor::data() const { return require_impl(impl_).data; }

std::span<double> Tensor::mutable_data() { return require_impl(impl_).data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return require_impl(impl_).requires_grad; }

void Tensor::set_requires_grad(bool value) { require_impl(impl_).requires_grad = value; }

bool Tensor::is_leaf() const { return require_impl(impl_).grad_fn == nullptr; }

bool Tensor::has_grad() const { return !require_impl(impl_).grad.empty(); }

std::span<const double> Tensor::grad() const { return require_impl(impl_).grad; }

std::span<double> Tensor::mutable_grad() {
  auto& impl = require_impl(impl_);
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

void Tensor::zero_grad() { require_impl(impl_).grad.clear(); }

const detail::GraphNode* Tensor::grad_fn() const { return require_impl(impl_).grad_fn.get(); }

Tensor Tensor::detach() const {
  return Tensor(shape(), impl_->data, false);
}

Tensor Tensor::clone() const { return detach(); }

void accumulate_grad(const Tensor& t, std::span<const double> g) {
  auto* impl = const_cast<detail::TensorImpl*>(t.impl());
  if (!impl || !impl->requires_grad) return;
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) impl->grad[i] += g[i];
}

Tensor make_result(Shape shape, std::vector<double> data, std::string op,
                   std::vector<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward) {
  Tensor out(std::move(shape), std::move(data), false);
  if (!t_grad_enabled) return out;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::GraphNode>();
  node->sequence = g_node_sequence.fetch_add(1, std::memory_order_relaxed);
  node->op = std::move(op);
  node->inputs = std::move(inputs);
  node->backward = std::move(backward);
  out.impl_->requires_grad = true;
  out.impl_->grad_fn = std::move(node);
  return out;
}

namespace {

using NodeEntry = std::pair<detail::TensorImpl*, detail::GraphNode*>;

std::vector<NodeEntry> collect_graph(const detail::TensorImpl* root) {
  std::vector<NodeEntry> entries;
  std::unordered_set<const detail::TensorImpl*> seen;
  std::vector<detail::TensorImpl*> stack{const_cast<detail::TensorImpl*>(root)};
  while (!stack.empty()) {
    auto* impl = stack.back();
    stack.pop_back();
    if (!seen.insert(impl).second) continue;
    if (!impl->grad_fn) continue;
    entries.emplace_back(impl, impl->grad_fn.get());
    for (const auto& in : impl->grad_fn->inputs) {
      if (in.defined() && in.requires_grad()) {
        stack.push_back(const_cast<detail::TensorImpl*>(in.impl()));
      }
    }
  }
  // Creation order is a topological order; backward runs it in reverse.
  std::sort(entries.begin(), entries.end(), [](const NodeEntry& a, const NodeEntry& b) {
    return a.second->sequence > b.second->sequence;
  });
  return entries;
}

}  // namespace

void Tensor::backward() const {
  auto& impl = require_impl(impl_);
  if (impl.data.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " + shape_str(impl.shape));
  }
  if (!impl.requires_grad) throw std::logic_error("backward: loss does not require grad");
  auto entries = collect_graph(&impl);
  for (auto& [t, node] : entries) t->grad.assign(t->data.size(), 0.0);
  if (impl.grad.empty()) impl.grad.assign(1, 0.0);
  impl.grad[0] += 1.0;
  for (auto& [t, node] : entries) node->backward(t->grad);
}

std::vector<std::string> backward_order(const Tensor& root) {
  std::vector<std::string> ops;
  if (!root.defined()) return ops;
  for (const auto& [t, node] : collect_graph(root.impl())) ops.push_back(node->op);
  return ops;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

CheckedModeGuard::CheckedModeGuard(bool enabled) : previous_(t_checked_mode) {
  t_checked_mode = enabled;
}
CheckedModeGuard::~CheckedModeGuard() { t_checked_mode = previous_; }

bool grad_enabled() { return t_grad_enabled; }
bool checked_mode() { return t_checked_mode; }

}  // namespace gaitgcn
