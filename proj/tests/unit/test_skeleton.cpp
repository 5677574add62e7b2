#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "gaitgcn/skeleton.hpp"

using namespace gaitgcn;
namespace fs = std::filesystem;

namespace {

SkeletonSequence ramp_sequence(std::size_t frames) {
  SkeletonSequence s;
  s.subject_id = "007";
  s.coords = CoordArray(2, frames, kNumJoints);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t v = 0; v < kNumJoints; ++v) {
      s.coords.at(0, t, v) = 10.0 * t + v;
      s.coords.at(1, t, v) = -3.0 * v + 0.5 * t;
    }
  }
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gaitgcn_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("select_joints keeps the first fifteen pose joints") {
  CoordArray full(2, 3, kNumPoseJoints);
  for (std::size_t i = 0; i < full.values.size(); ++i) full.values[i] = static_cast<double>(i);
  CoordArray sel = select_joints(full);
  CHECK(sel.joints == kNumJoints);
  CHECK(sel.at(1, 2, 14) == full.at(1, 2, 14));
  CHECK(sel.at(0, 1, kLAnkle) == full.at(0, 1, 14));
  CHECK_THROWS_AS(select_joints(CoordArray(2, 3, 15)), std::invalid_argument);
}

TEST_CASE("normalize_coords maps each axis to [0,1]") {
  SkeletonSequence s = ramp_sequence(6);
  SkeletonSequence n = normalize_coords(s);
  for (std::size_t c = 0; c < 2; ++c) {
    double lo = 1e9, hi = -1e9;
    for (std::size_t t = 0; t < 6; ++t) {
      for (std::size_t v = 0; v < kNumJoints; ++v) {
        lo = std::min(lo, n.coords.at(c, t, v));
        hi = std::max(hi, n.coords.at(c, t, v));
      }
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
  }
  CHECK(n.coords.at(0, 0, 0) == 0.0);
  CHECK(n.coords.at(0, 5, 14) == 1.0);
}

TEST_CASE("normalize_coords warns on a constant axis") {
  SkeletonSequence s = ramp_sequence(4);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t v = 0; v < kNumJoints; ++v) s.coords.at(1, t, v) = 2.5;
  Diagnostics diag;
  SkeletonSequence n = normalize_coords(s, &diag);
  CHECK(diag.warnings.size() == 1);
  CHECK(n.coords.at(1, 3, 7) == 0.5);
}

TEST_CASE("resampling picks rounded indices or loops") {
  CHECK(resample_indices(240, 120)[1] == 2);
  CHECK(resample_indices(240, 120)[119] == 238);
  const auto up = resample_indices(50, 120);
  CHECK(up[49] == 49);
  CHECK(up[50] == 0);
  CHECK(up[119] == 19);
  CHECK(resample_indices(120, 120)[77] == 77);
  CHECK_THROWS_AS(resample_indices(0, 10), std::invalid_argument);

  SkeletonSequence s = ramp_sequence(50);
  SkeletonSequence r = resample_to_length(s, 120);
  CHECK(r.frames() == 120);
  CHECK(r.coords.at(0, 50, 3) == s.coords.at(0, 0, 3));
}

TEST_CASE("bone and motion streams") {
  SkeletonSequence s = ramp_sequence(5);
  const auto topo = SkeletonTopology::gait15();
  CoordArray bone = derive_bone(s.coords, topo);
  CHECK(bone.at(0, 2, kNeck) == 0.0);
  CHECK(bone.at(0, 2, kRWrist) == s.coords.at(0, 2, kRWrist) - s.coords.at(0, 2, kRElbow));
  CHECK(bone.at(1, 4, kLAnkle) == s.coords.at(1, 4, kLAnkle) - s.coords.at(1, 4, kLKnee));

  CoordArray motion = derive_motion(s.coords);
  CHECK(motion.at(0, 0, 3) == doctest::Approx(10.0));
  CHECK(motion.at(1, 3, 3) == doctest::Approx(0.5));
  CHECK(motion.at(0, 4, 3) == 0.0);
}

TEST_CASE("gait15 topology") {
  const auto topo = SkeletonTopology::gait15();
  CHECK(topo.num_joints() == 15);
  CHECK(topo.root == kNeck);
  CHECK(topo.edges.size() == 14);
  CHECK(topo.parent[kRWrist] == kRElbow);
  CHECK(topo.parent[kLAnkle] == kLKnee);
  CHECK(kJointNames[kRWrist] == "RWrist");
}

TEST_CASE("sequence documents round-trip and report bad input") {
  SkeletonSequence s = ramp_sequence(3);
  s.condition = Condition::BG;
  s.seq_index = 2;
  s.view_deg = 126;
  const std::string text = serialize_sequence(s);
  SkeletonSequence back = parse_sequence(text);
  CHECK(back.subject_id == "007");
  CHECK(back.condition == Condition::BG);
  CHECK(back.seq_index == 2);
  CHECK(back.view_deg == 126);
  CHECK(back.coords == s.coords);

  CHECK_THROWS_AS(parse_sequence("{not json", "x.json"), FormatError);
  CHECK_THROWS_AS(parse_sequence(R"({"subject_id":"1","condition":"XX","seq_index":1,"view_deg":0,"frames":[]})"),
                  std::exception);
  try {
    load_sequence("/nonexistent/dir/seq.json");
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("/nonexistent/dir/seq.json") != std::string::npos);
  }
}

TEST_CASE("datasets round-trip through the manifest") {
  SyntheticOptions opt;
  opt.n_subjects = 2;
  opt.seqs_per_subject = 2;
  opt.views = {0, 90};
  opt.frames = 12;
  auto seqs = generate_synthetic_dataset(opt);
  REQUIRE(seqs.size() == 8);
  std::vector<DatasetItem> items;
  for (auto& s : seqs) items.push_back({s, s.subject_id == seqs.front().subject_id ? Split::train : Split::probe});
  const fs::path dir = temp_dir("dataset");
  save_dataset(dir, items);
  auto back = load_dataset(dir);
  REQUIRE(back.size() == items.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].split == items[i].split);
    CHECK(back[i].sequence.subject_id == items[i].sequence.subject_id);
    CHECK(back[i].sequence.coords == items[i].sequence.coords);
  }
  fs::remove_all(dir);
}

TEST_CASE("synthetic generator is deterministic and seed dependent") {
  SyntheticOptions opt;
  opt.n_subjects = 3;
  opt.seqs_per_subject = 3;
  opt.frames = 20;
  opt.seed = 7;
  auto a = generate_synthetic_dataset(opt);
  auto b = generate_synthetic_dataset(opt);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(serialize_sequence(a[i]) == serialize_sequence(b[i]));
  opt.seed = 8;
  auto c = generate_synthetic_dataset(opt);
  CHECK(serialize_sequence(a[0]) != serialize_sequence(c[0]));

  CHECK(synthetic_sequence_label(0) == std::pair{Condition::NM, 1});
  CHECK(synthetic_sequence_label(6) == std::pair{Condition::BG, 1});
  CHECK(synthetic_sequence_label(9) == std::pair{Condition::CL, 2});
  CHECK(synthetic_sequence_label(10) == std::pair{Condition::NM, 7});
}
