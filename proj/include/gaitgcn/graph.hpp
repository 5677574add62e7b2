#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "gaitgcn/skeleton.hpp"
#include "gaitgcn/tensor.hpp"

namespace gaitgcn {

/// Small dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows(rows), cols(cols), values(rows * cols, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  static Matrix identity(std::size_t n);
  Tensor to_tensor() const { return Tensor({rows, cols}, values); }
  bool operator==(const Matrix&) const = default;
};

enum class AdjacencyKind { natural, k_hop, full, st_tiled };

struct AdjacencyMatrix {
  Matrix values;
  AdjacencyKind kind = AdjacencyKind::natural;
  int k = 0;             // k_hop only
  std::size_t tau = 1;   // st_tiled only
  std::size_t dilation = 1;
  AdjacencyKind base_kind = AdjacencyKind::natural;

  std::size_t size() const { return values.rows; }
};

/// Λ^{-1/2}(A+M)Λ^{-1/2} with Λ the row sums of A alone.
struct NormalizedAggregator {
  Matrix values;
  std::vector<double> degree;
};

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

/// All-pairs hop distances by BFS from every node; kUnreachable when disconnected.
std::vector<std::vector<std::size_t>> hop_distances(const SkeletonTopology& topo);

AdjacencyMatrix build_natural_adjacency(const SkeletonTopology& topo);
AdjacencyMatrix build_k_adjacency(const SkeletonTopology& topo, int k);
AdjacencyMatrix build_full_adjacency(std::size_t V);
AdjacencyMatrix tile_st_adjacency(const AdjacencyMatrix& A, std::size_t tau, std::size_t dilation);

NormalizedAggregator normalize_aggregator(const AdjacencyMatrix& A, const Matrix& M);
NormalizedAggregator normalize_aggregator(const AdjacencyMatrix& A);

/// Differentiable form used inside layers: (A + M) ⊙ (d_i^{-1/2} d_j^{-1/2}).
/// M is a (size, size) tensor, typically a learnable parameter.
Tensor aggregator_tensor(const AdjacencyMatrix& A, const Tensor& M);

/// Adjacency choice as written in model configs: "natural", "k_hop:K"
/// (scales k = 0..K), or "full".
struct AdjacencySpec {
  enum class Kind { natural, multiscale, full };
  Kind kind = Kind::full;
  int scales = 0;

  static AdjacencySpec parse(std::string_view text);
  std::string str() const;
  /// The per-scale adjacencies a spatial layer sums over.
  std::vector<AdjacencyMatrix> build(const SkeletonTopology& topo) const;
  /// The single base adjacency tiled by a windowed spatio-temporal layer.
  AdjacencyMatrix base(const SkeletonTopology& topo) const;
};

}  // namespace gaitgcn
