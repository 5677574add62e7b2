#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gaitgcn/tensor.hpp"

namespace gaitgcn {

/// Raised when a function gives different values for identical inputs.
class NondeterministicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradCheckOptions {
  double epsilon = 1e-6;
  // 0 checks every coordinate; otherwise at most this many per tensor,
  // chosen deterministically from `seed`.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_tensor;  // same order as the `wrt` argument
  std::size_t coords_checked = 0;
};

/// Compares the reverse-mode gradient of the scalar `loss_fn()` with respect
/// to each tensor in `wrt` against central differences
/// (f(x+e) - f(x-e)) / 2e. The error per coordinate is
/// |analytic - numeric| / max(1, |analytic|).
GradCheckResult gradient_check(const std::function<Tensor()>& loss_fn, std::vector<Tensor> wrt,
                               const GradCheckOptions& options = {});

/// Single-argument form: the max relative error of d f(x) / dx.
double finite_difference_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                               double epsilon);

}  // namespace gaitgcn
