#include "doctest.h"
#include "gaitgcn/evaluate.hpp"
#include "gaitgcn/verify.hpp"

using namespace gaitgcn;

namespace {

EmbeddingRecord rec(std::string id, Condition c, int seq, int view, std::vector<double> v,
                    EmbeddingSource src = EmbeddingSource::model) {
  return {std::move(id), c, seq, view, src, std::move(v)};
}

EvalProtocol two_view_protocol() {
  EvalProtocol p;
  p.views = {0, 90};
  return p;
}

}  // namespace

TEST_CASE("hand-built two-subject example") {
  const auto p = two_view_protocol();
  std::vector<EmbeddingRecord> gallery{
      rec("A", Condition::NM, 1, 0, {0, 0}), rec("B", Condition::NM, 1, 0, {10, 0}),
      rec("A", Condition::NM, 1, 90, {0, 1}), rec("B", Condition::NM, 1, 90, {10, 1}),
  };
  std::vector<EmbeddingRecord> probe{
      rec("A", Condition::NM, 5, 0, {1, 0}),   // nearest at 90: A
      rec("B", Condition::NM, 5, 90, {1, 0}),  // nearest at 0: A (wrong)
      rec("A", Condition::BG, 1, 0, {9, 1}),   // nearest at 90: B (wrong)
  };
  Diagnostics diag;
  auto t = evaluate_rank1(gallery, probe, p, &diag);
  REQUIRE(t.row(Condition::NM, 0));
  CHECK(*t.row(Condition::NM, 0)->accuracy == 1.0);
  CHECK(*t.row(Condition::NM, 90)->accuracy == 0.0);
  CHECK(*t.mean_of(Condition::NM) == doctest::Approx(0.5));
  CHECK(*t.mean_of(Condition::BG) == 0.0);
  CHECK_FALSE(t.mean_of(Condition::CL).has_value());
  CHECK_FALSE(t.row(Condition::NM, 0)->cells[0].accuracy.has_value());
  CHECK(t.row(Condition::NM, 0)->gallery_views_used == 1);
  CHECK(tables_equal(t, oracle_rank1(gallery, probe, p)));
  CHECK_FALSE(diag.empty());
}

TEST_CASE("ties go to the lower subject id then sequence") {
  const auto p = two_view_protocol();
  std::vector<EmbeddingRecord> gallery{
      rec("B", Condition::NM, 1, 90, {1, 0}), rec("A", Condition::NM, 2, 90, {-1, 0}),
  };
  std::vector<EmbeddingRecord> probe{rec("A", Condition::NM, 5, 0, {0, 0})};
  auto t = evaluate_rank1(gallery, probe, p);
  CHECK(*t.row(Condition::NM, 0)->accuracy == 1.0);
  gallery[1].subject_id = "C";
  t = evaluate_rank1(gallery, probe, p);
  CHECK(*t.row(Condition::NM, 0)->accuracy == 0.0);
}

TEST_CASE("gallery queried with itself scores 1") {
  EvalProtocol p = two_view_protocol();
  p.probes = {{Condition::NM, 1, 4}};
  std::vector<EmbeddingRecord> g;
  for (int s = 0; s < 4; ++s)
    for (int v : {0, 90}) g.push_back(rec("S" + std::to_string(s), Condition::NM, 1, v, {double(s), double(s * s)}));
  auto t = evaluate_rank1(g, g, p);
  CHECK(*t.mean_of(Condition::NM) == 1.0);
}

TEST_CASE("report formats") {
  const auto p = two_view_protocol();
  std::vector<EmbeddingRecord> g{rec("A", Condition::NM, 1, 90, {0}), rec("B", Condition::NM, 1, 90, {5})};
  std::vector<EmbeddingRecord> pr{rec("A", Condition::NM, 5, 0, {1})};
  const auto csv = format_accuracy_report(evaluate_rank1(g, pr, p));
  CHECK(csv.rfind("condition,probe_view,accuracy,gallery_views,0,90\n", 0) == 0);
  CHECK(csv.find("NM,0,100.000,1,") != std::string::npos);
  CHECK(csv.find("NM,mean,100.000") != std::string::npos);
}

TEST_CASE("split by protocol") {
  std::vector<EmbeddingRecord> all{
      rec("A", Condition::NM, 1, 0, {0}), rec("A", Condition::NM, 5, 0, {0}),
      rec("A", Condition::CL, 2, 0, {0}), rec("A", Condition::CL, 3, 0, {0}),
  };
  auto [g, pr] = split_by_protocol(all, EvalProtocol{});
  CHECK(g.size() == 1);
  CHECK(pr.size() == 2);
}

TEST_CASE("lambda sweep") {
  Rng rng(21);
  auto inst = random_protocol_instance(rng);
  std::vector<EmbeddingRecord> fm = inst.gallery;
  fm.insert(fm.end(), inst.probe.begin(), inst.probe.end());

  SUBCASE("identical appearance features change nothing") {
    std::vector<EmbeddingRecord> fa = fm;
    for (auto& r : fa) {
      r.source = EmbeddingSource::appearance;
      r.vector = {1.0, 2.0};
    }
    auto rows = lambda_sweep(fm, fa, {300, 400, 500}, inst.protocol);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].condition_means == rows[1].condition_means);
    CHECK(rows[1].condition_means == rows[2].condition_means);
  }
  SUBCASE("one row equals rank-1 on the fused records") {
    std::vector<EmbeddingRecord> fa = fm;
    for (auto& r : fa) {
      r.source = EmbeddingSource::appearance;
      r.vector = {uniform(rng, -1, 1)};
    }
    auto rows = lambda_sweep(fm, fa, {0.7}, inst.protocol);
    auto fused = fuse_records(fm, fa, 0.7);
    auto [g, pr] = split_by_protocol(fused, inst.protocol);
    auto t = evaluate_rank1(g, pr, inst.protocol);
    for (std::size_t i = 0; i < inst.protocol.probes.size(); ++i)
      CHECK(rows[0].condition_means[i] == t.mean_of(inst.protocol.probes[i].condition));
    const auto csv = format_lambda_report(rows, inst.protocol);
    CHECK(csv.rfind("lambda,", 0) == 0);
  }
  SUBCASE("fusing needs matching records") {
    std::vector<EmbeddingRecord> fa(fm.begin(), fm.end() - 1);
    CHECK_THROWS(fuse_records(fm, fa, 1.0));
  }
}

TEST_CASE("evaluation properties") {
  CHECK(check_protocol_oracle(4, 10).pass);
  CHECK(check_ten_gallery_views(4).pass);
  CHECK(check_rank1_invariances(4).pass);
  CHECK(check_fusion_small_lambda(4, 5).pass);
}
