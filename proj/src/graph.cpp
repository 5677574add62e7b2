#include "gaitgcn/graph.hpp"

#include <charconv>
#include <cmath>
#include <queue>
#include <stdexcept>

#include "gaitgcn/ops.hpp"

namespace gaitgcn {

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<std::vector<std::size_t>> hop_distances(const SkeletonTopology& topo) {
  const std::size_t n = topo.num_joints();
  const auto adj = topo.neighbors();
  std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, kUnreachable));
  for (std::size_t s = 0; s < n; ++s) {
    std::queue<std::size_t> frontier;
    dist[s][s] = 0;
    frontier.push(s);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop();
      for (std::size_t w : adj[u]) {
        if (dist[s][w] == kUnreachable) {
          dist[s][w] = dist[s][u] + 1;
          frontier.push(w);
        }
      }
    }
  }
  return dist;
}

AdjacencyMatrix build_natural_adjacency(const SkeletonTopology& topo) {
  const std::size_t n = topo.num_joints();
  AdjacencyMatrix A;
  A.values = Matrix::identity(n);
  A.kind = AdjacencyKind::natural;
  for (auto [a, b] : topo.edges) {
    A.values(a, b) = 1.0;
    A.values(b, a) = 1.0;
  }
  return A;
}

AdjacencyMatrix build_k_adjacency(const SkeletonTopology& topo, int k) {
  if (k < 0) throw std::invalid_argument("build_k_adjacency: k must be >= 0");
  const std::size_t n = topo.num_joints();
  const auto dist = hop_distances(topo);
  AdjacencyMatrix A;
  A.values = Matrix(n, n);
  A.kind = AdjacencyKind::k_hop;
  A.k = k;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || dist[i][j] == static_cast<std::size_t>(k)) A.values(i, j) = 1.0;
    }
  }
  return A;
}

AdjacencyMatrix build_full_adjacency(std::size_t V) {
  if (V < 1) throw std::invalid_argument("build_full_adjacency: V must be >= 1");
  AdjacencyMatrix A;
  A.values = Matrix(V, V, 1.0);
  A.kind = AdjacencyKind::full;
  return A;
}

AdjacencyMatrix tile_st_adjacency(const AdjacencyMatrix& A, std::size_t tau, std::size_t dilation) {
  if (tau < 1) throw std::invalid_argument("tile_st_adjacency: tau must be >= 1");
  if (dilation < 1) throw std::invalid_argument("tile_st_adjacency: dilation must be >= 1");
  const std::size_t V = A.size();
  AdjacencyMatrix out;
  out.values = Matrix(tau * V, tau * V);
  out.kind = AdjacencyKind::st_tiled;
  out.tau = tau;
  out.dilation = dilation;
  out.base_kind = A.kind;
  out.k = A.k;
  for (std::size_t a = 0; a < tau; ++a) {
    for (std::size_t b = 0; b < tau; ++b) {
      for (std::size_t i = 0; i < V; ++i) {
        for (std::size_t j = 0; j < V; ++j) out.values(a * V + i, b * V + j) = A.values(i, j);
      }
    }
  }
  return out;
}

namespace {

std::vector<double> row_degrees(const AdjacencyMatrix& A) {
  const std::size_t n = A.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (A.values(i, j) < 0.0) throw std::invalid_argument("normalize_aggregator: negative adjacency entry");
      s += A.values(i, j);
    }
    if (!(s > 0.0)) {
      throw std::invalid_argument("normalize_aggregator: node " + std::to_string(i) +
                                  " has zero degree");
    }
    d[i] = s;
  }
  return d;
}

}  // namespace

NormalizedAggregator normalize_aggregator(const AdjacencyMatrix& A, const Matrix& M) {
  const std::size_t n = A.size();
  if (M.rows != n || M.cols != n) {
    throw ShapeError("normalize_aggregator: correction is " + std::to_string(M.rows) + "x" +
                     std::to_string(M.cols) + ", adjacency is " + std::to_string(n) + "x" +
                     std::to_string(n));
  }
  NormalizedAggregator out;
  out.degree = row_degrees(A);
  out.values = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.values(i, j) = (A.values(i, j) + M(i, j)) / std::sqrt(out.degree[i] * out.degree[j]);
    }
  }
  return out;
}

NormalizedAggregator normalize_aggregator(const AdjacencyMatrix& A) {
  return normalize_aggregator(A, Matrix(A.size(), A.size()));
}

Tensor aggregator_tensor(const AdjacencyMatrix& A, const Tensor& M) {
  const std::size_t n = A.size();
  if (M.shape() != Shape{n, n}) {
    throw ShapeError("aggregator_tensor: correction " + shape_str(M.shape()) +
                     " does not match adjacency of size " + std::to_string(n));
  }
  const auto degree = row_degrees(A);
  std::vector<double> norm(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) norm[i * n + j] = 1.0 / std::sqrt(degree[i] * degree[j]);
  }
  return multiply(add(A.values.to_tensor(), M), Tensor({n, n}, std::move(norm)));
}

AdjacencySpec AdjacencySpec::parse(std::string_view text) {
  AdjacencySpec spec;
  if (text == "natural") {
    spec.kind = Kind::natural;
  } else if (text == "full") {
    spec.kind = Kind::full;
  } else if (text.starts_with("k_hop:")) {
    spec.kind = Kind::multiscale;
    const auto digits = text.substr(6);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), spec.scales);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || spec.scales < 0) {
      throw std::invalid_argument("adjacency: bad scale count in '" + std::string(text) + "'");
    }
  } else {
    throw std::invalid_argument("adjacency: unknown kind '" + std::string(text) +
                                "' (expected natural, k_hop:K or full)");
  }
  return spec;
}

std::string AdjacencySpec::str() const {
  switch (kind) {
    case Kind::natural: return "natural";
    case Kind::full: return "full";
    case Kind::multiscale: return "k_hop:" + std::to_string(scales);
  }
  return "?";
}

std::vector<AdjacencyMatrix> AdjacencySpec::build(const SkeletonTopology& topo) const {
  switch (kind) {
    case Kind::natural: return {build_natural_adjacency(topo)};
    case Kind::full: return {build_full_adjacency(topo.num_joints())};
    case Kind::multiscale: {
      std::vector<AdjacencyMatrix> out;
      for (int k = 0; k <= scales; ++k) out.push_back(build_k_adjacency(topo, k));
      return out;
    }
  }
  return {};
}

AdjacencyMatrix AdjacencySpec::base(const SkeletonTopology& topo) const {
  if (kind == Kind::full) return build_full_adjacency(topo.num_joints());
  return build_natural_adjacency(topo);
}

}  // namespace gaitgcn
