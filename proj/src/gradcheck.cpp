#include "gaitgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gaitgcn {

namespace {

double eval_scalar(const std::function<Tensor()>& loss_fn) {
  NoGradGuard no_grad;
  Tensor out = loss_fn();
  if (out.numel() != 1) {
    throw ShapeError("gradient_check: function must return a scalar, got " +
                     shape_str(out.shape()));
  }
  return out.item();
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  // Partial Fisher-Yates on raw engine output keeps the choice portable.
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> wrt,
                               const GradCheckOptions& options) {
  if (!(options.epsilon >= 1e-7 && options.epsilon <= 1e-3)) {
    throw std::invalid_argument("gradient_check: epsilon must lie in [1e-7, 1e-3]");
  }
  for (auto& t : wrt) {
    if (!t.is_leaf()) throw std::invalid_argument("gradient_check: can only perturb leaf tensors");
    t.set_requires_grad(true);
    t.zero_grad();
  }

  const double base = eval_scalar(loss_fn);
  if (eval_scalar(loss_fn) != base) {
    throw NondeterministicError("gradient_check: function is not deterministic");
  }

  Tensor loss = loss_fn();
  loss.backward();

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  const double eps = options.epsilon;
  for (auto& t : wrt) {
    std::vector<double> analytic(t.numel(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    double worst = 0.0;
    auto values = t.mutable_data();
    for (std::size_t i : pick_coords(t.numel(), options.max_coords_per_tensor, rng)) {
      const double orig = values[i];
      values[i] = orig + eps;
      const double up = eval_scalar(loss_fn);
      values[i] = orig - eps;
      const double down = eval_scalar(loss_fn);
      values[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      worst = std::max(worst, err);
      ++result.coords_checked;
    }
    result.per_tensor.push_back(worst);
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                               double epsilon) {
  GradCheckOptions options;
  options.epsilon = epsilon;
  return gradient_check([&] { return f(x); }, {x}, options).max_rel_error;
}

}  // namespace gaitgcn
