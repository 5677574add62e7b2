#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gaitgcn/config.hpp"
#include "gaitgcn/evaluate.hpp"
#include "gaitgcn/random.hpp"
#include "gaitgcn/skeleton.hpp"

// Verification suites shared by the `gradcheck`/`selftest` subcommands and
// the acceptance tests: finite-difference checks over every layer and
// independent oracles for the graph and evaluation code.

namespace gaitgcn {

struct GradcheckSuiteOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  double epsilon = 1e-6;
  // Coordinates sampled per tensor for the whole-model case; 0 checks all.
  std::size_t model_coords_per_tensor = 0;
};

struct GradcheckCase {
  std::string name;
  double max_rel_error = 0.0;  // max over seeds
  std::size_t coords = 0;      // summed over seeds
  double seconds = 0.0;
};

std::vector<std::string> gradcheck_case_names();
/// One case at one seed; throws std::invalid_argument for unknown names.
GradcheckCase run_gradcheck_case(const std::string& name, std::uint64_t seed,
                                 const GradcheckSuiteOptions& options = {});
std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckSuiteOptions& options = {});

// Oracles -----------------------------------------------------------------

/// Random labelled tree on V nodes.
SkeletonTopology random_tree(std::size_t V, Rng& rng);
/// Hop distances by a queue walk over an explicit edge list (independent of
/// hop_distances); kUnreachable is never produced for trees.
std::vector<std::vector<std::size_t>> oracle_hop_distances(const std::vector<std::size_t>& parent);

/// Rank-1 table by full pairwise enumeration: the distance matrix is filled
/// first, then each probe's candidates at a view are sorted by
/// (distance, subject, sequence) and the first is taken.
AccuracyTable oracle_rank1(const std::vector<EmbeddingRecord>& gallery,
                           const std::vector<EmbeddingRecord>& probe, const EvalProtocol& protocol);

bool tables_equal(const AccuracyTable& a, const AccuracyTable& b);

/// Random small protocol instance: up to 5 subjects and 4 views, integer-valued
/// embeddings so that distance ties occur.
struct ProtocolInstance {
  EvalProtocol protocol;
  std::vector<EmbeddingRecord> gallery;
  std::vector<EmbeddingRecord> probe;
};
ProtocolInstance random_protocol_instance(Rng& rng);

// Property suite ------------------------------------------------------------

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

PropertyResult check_k_adjacency_oracle(std::uint64_t seed, std::size_t trees = 20);
PropertyResult check_wrist_ankle_distance();
PropertyResult check_k_adjacency_partition();
PropertyResult check_full_aggregator_mean(std::uint64_t seed);
PropertyResult check_attention_structure(std::uint64_t seed, std::size_t configs = 10);
PropertyResult check_protocol_oracle(std::uint64_t seed, std::size_t instances = 50);
PropertyResult check_ten_gallery_views(std::uint64_t seed);
PropertyResult check_rank1_invariances(std::uint64_t seed);
PropertyResult check_fusion_small_lambda(std::uint64_t seed, std::size_t instances = 20);
PropertyResult check_unified_tau1_matches_spatial(std::uint64_t seed);
PropertyResult check_full_graph_permutation_equivariance(std::uint64_t seed);

/// Every property above with default sizes.
std::vector<PropertyResult> run_selftest(std::uint64_t seed);

}  // namespace gaitgcn
