#include <Eigen/Dense>

#include "doctest.h"
#include "gaitgcn/graph.hpp"
#include "gaitgcn/verify.hpp"

using namespace gaitgcn;

namespace {

SkeletonTopology path_graph(std::size_t n) {
  std::vector<std::size_t> parent(n);
  parent[0] = 0;
  for (std::size_t i = 1; i < n; ++i) parent[i] = i - 1;
  return SkeletonTopology::from_parents(parent);
}

}  // namespace

TEST_CASE("natural adjacency of gait15") {
  const auto A = build_natural_adjacency(SkeletonTopology::gait15());
  CHECK(A.size() == 15);
  CHECK(A.values(kRWrist, kRElbow) == 1.0);
  CHECK(A.values(kRElbow, kRWrist) == 1.0);
  CHECK(A.values(kRWrist, kLAnkle) == 0.0);
}

TEST_CASE("k-hop adjacency on a path") {
  const auto topo = path_graph(5);
  const auto A2 = build_k_adjacency(topo, 2);
  CHECK(A2.values(0, 2) == 1.0);
  CHECK(A2.values(1, 3) == 1.0);
  CHECK(A2.values(0, 1) == 0.0);
  CHECK(A2.values(0, 3) == 0.0);
  for (std::size_t i = 0; i < 5; ++i) CHECK(A2.values(i, i) == 1.0);
  const auto A0 = build_k_adjacency(topo, 0);
  CHECK(A0.values == Matrix::identity(5));
  CHECK_THROWS(build_k_adjacency(topo, -1));
}

TEST_CASE("hop distances on gait15") {
  const auto d = hop_distances(SkeletonTopology::gait15());
  CHECK(d[kRWrist][kLAnkle] == 7);
  CHECK(d[kNose][kNeck] == 1);
  CHECK(d[kLWrist][kRWrist] == 6);
}

TEST_CASE("full adjacency and its aggregator") {
  const auto A = build_full_adjacency(4);
  for (double v : A.values.values) CHECK(v == 1.0);
  const auto agg = normalize_aggregator(A);
  for (double v : agg.values.values) CHECK(v == doctest::Approx(0.25));
  for (double d : agg.degree) CHECK(d == 4.0);
}

TEST_CASE("aggregator degree comes from A alone") {
  const auto A = build_natural_adjacency(path_graph(3));
  Matrix M(3, 3, 0.0);
  M(0, 2) = 5.0;
  const auto agg = normalize_aggregator(A, M);
  const auto plain = normalize_aggregator(A);
  CHECK(agg.degree == plain.degree);
  CHECK(agg.values(0, 2) == doctest::Approx(5.0 / std::sqrt(plain.degree[0] * plain.degree[2])));
}

TEST_CASE("spatio-temporal tiling") {
  const auto A = build_natural_adjacency(SkeletonTopology::gait15());
  const auto T = tile_st_adjacency(A, 3, 1);
  REQUIRE(T.size() == 45);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t u = 0; u < 15; ++u)
        for (std::size_t v = 0; v < 15; ++v) CHECK(T.values(i * 15 + u, j * 15 + v) == A.values(u, v));

  Eigen::MatrixXd a(15, 15), t(45, 45);
  for (std::size_t i = 0; i < 15; ++i)
    for (std::size_t j = 0; j < 15; ++j) a(i, j) = A.values(i, j);
  for (std::size_t i = 0; i < 45; ++i)
    for (std::size_t j = 0; j < 45; ++j) t(i, j) = T.values(i, j);
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(t).rank() == Eigen::FullPivLU<Eigen::MatrixXd>(a).rank());
  CHECK_THROWS(tile_st_adjacency(A, 0, 1));
}

TEST_CASE("adjacency spec parsing") {
  CHECK(AdjacencySpec::parse("natural").kind == AdjacencySpec::Kind::natural);
  CHECK(AdjacencySpec::parse("full").kind == AdjacencySpec::Kind::full);
  const auto ms = AdjacencySpec::parse("k_hop:4");
  CHECK(ms.kind == AdjacencySpec::Kind::multiscale);
  CHECK(ms.scales == 4);
  CHECK(ms.str() == "k_hop:4");
  CHECK(ms.build(SkeletonTopology::gait15()).size() == 5);
  CHECK_THROWS(AdjacencySpec::parse("k_hop:x"));
  CHECK_THROWS(AdjacencySpec::parse("ring"));
}

TEST_CASE("graph properties") {
  CHECK(check_k_adjacency_oracle(3).pass);
  CHECK(check_wrist_ankle_distance().pass);
  CHECK(check_k_adjacency_partition().pass);
  CHECK(check_full_aggregator_mean(3).pass);
}
