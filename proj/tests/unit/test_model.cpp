#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gaitgcn/model.hpp"

using namespace gaitgcn;
namespace fs = std::filesystem;

namespace {

ModelConfig small_config(std::size_t frames = 8) {
  ModelConfig c;
  c.frames = frames;
  c.channels = {4, 8, 8};
  c.num_classes = 3;
  return c;
}

SkeletonSequence synthetic_one(std::size_t frames, std::uint64_t seed = 0) {
  SyntheticOptions opt;
  opt.n_subjects = 1;
  opt.seqs_per_subject = 1;
  opt.views = {0};
  opt.frames = frames;
  opt.seed = seed;
  return normalize_coords(generate_synthetic_dataset(opt).front());
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("gaitgcn_unit_" + name);
}

}  // namespace

TEST_CASE("stream shapes for frame counts divisible by four") {
  for (std::size_t T : {8, 12, 20}) {
    ModelConfig cfg = small_config(T);
    Rng rng(0);
    StreamModel s(cfg, cfg.streams[0], SkeletonTopology::gait15(), rng);
    auto out = s.forward(Tensor({2, 2, T, 15}, 0.1), false);
    CHECK(out.block_outputs[0].shape() == Shape{2, 4, T, 15});
    CHECK(out.block_outputs[1].shape() == Shape{2, 8, T / 2, 15});
    CHECK(out.block_outputs[2].shape() == Shape{2, 8, T / 4, 15});
    CHECK(out.embedding.shape() == Shape{2, 8});
    CHECK(out.logits.shape() == Shape{2, 3});
    CHECK_THROWS_AS(s.forward(Tensor({2, 2, T + 1, 15}), false), ShapeError);
    CHECK_THROWS_AS(s.forward(Tensor({3, T, 15}), false), ShapeError);
  }
}

TEST_CASE("zero input gives an all-equal embedding at init") {
  MultiStreamModel m(small_config(), 3);
  StreamBundle b{Tensor({2, 8, 15}), Tensor({2, 8, 15}), Tensor({2, 8, 15})};
  Tensor e = m.embed({b, b});
  REQUIRE(e.shape() == Shape{2, 24});
  for (std::size_t i = 0; i < 24; ++i) CHECK(e.data()[i] == e.data()[24 + i]);
}

TEST_CASE("embedding is the concatenation of stream embeddings") {
  MultiStreamModel m(small_config(), 5);
  const auto seq = synthetic_one(8);
  const auto bundle = make_stream_bundle(seq, m.topology());
  Tensor e = m.embed({bundle});
  CHECK(m.embedding_dim() == 24);
  for (std::size_t s = 0; s < 3; ++s) {
    auto out = m.stream(s).forward(bundle_stream(bundle, m.config().streams[s].kind), false);
    for (std::size_t i = 0; i < 8; ++i) CHECK(e.data()[s * 8 + i] == out.embedding.data()[i]);
  }
}

TEST_CASE("changing motion weights only changes the motion slice") {
  MultiStreamModel m(small_config(), 5);
  const auto bundle = make_stream_bundle(synthetic_one(8), m.topology());
  const std::vector<double> before(m.embed({bundle}).data().begin(), m.embed({bundle}).data().end());
  for (auto& nt : m.stream_tensors(2)) {
    if (!nt.trainable) continue;
    Tensor t = nt.tensor;
    for (double& v : t.mutable_data()) v = 0.0;
  }
  Tensor after = m.embed({bundle});
  for (std::size_t i = 0; i < 16; ++i) CHECK(after.data()[i] == before[i]);
  bool changed = false;
  for (std::size_t i = 16; i < 24; ++i) changed |= after.data()[i] != before[i];
  CHECK(changed);
}

TEST_CASE("full-size shape contract") {
  ModelConfig cfg;
  Rng rng(0);
  StreamModel s(cfg, cfg.streams[1], SkeletonTopology::gait15(), rng);
  auto out = s.forward(Tensor({1, 2, 120, 15}, 0.3), false);
  CHECK(out.block_outputs[0].shape() == Shape{1, 96, 120, 15});
  CHECK(out.block_outputs[1].shape() == Shape{1, 192, 60, 15});
  CHECK(out.block_outputs[2].shape() == Shape{1, 384, 30, 15});
  CHECK(out.embedding.shape() == Shape{1, 384});
}

TEST_CASE("tensor names are prefixed by stream") {
  MultiStreamModel m(small_config(), 0);
  const auto all = m.tensors();
  CHECK(all.front().name.rfind("stream0.", 0) == 0);
  CHECK(all.back().name.rfind("stream2.", 0) == 0);
  std::size_t running = 0;
  for (const auto& nt : all) running += nt.trainable ? 0 : 1;
  CHECK(running > 0);
}

TEST_CASE("fuse_two_branch is exact concatenation") {
  EmbeddingRecord fm{"001", Condition::BG, 2, 90, EmbeddingSource::model, {1.0, -2.0}};
  EmbeddingRecord fa{"001", Condition::BG, 2, 90, EmbeddingSource::appearance, {0.5, 0.25, 3.0}};
  auto f = fuse_two_branch(fm, fa, 400.0);
  CHECK(f.source == EmbeddingSource::fused);
  CHECK(f.vector == std::vector<double>{1.0, -2.0, 200.0, 100.0, 1200.0});
  CHECK_THROWS(fuse_two_branch(fm, fa, 0.0));
  CHECK_THROWS(fuse_two_branch(fm, fa, -1.0));
  fa.view_deg = 0;
  CHECK_THROWS(fuse_two_branch(fm, fa, 1.0));
}

TEST_CASE("embedding files round-trip metadata") {
  std::vector<EmbeddingRecord> recs{
      {"001", Condition::NM, 5, 18, EmbeddingSource::model, {0.1, 1.0 / 3.0, -7e-300}},
      {"abc", Condition::CL, 2, 180, EmbeddingSource::fused, {2.0, 3.0, 4.0}},
  };
  const auto text = format_embeddings(recs);
  CHECK(parse_embeddings(text) == recs);
  const auto path = temp_file("emb.txt");
  write_embeddings(path, recs);
  CHECK(read_embeddings(path) == recs);
  fs::remove(path);

  CHECK_THROWS_AS(parse_embeddings("001 NM 1 0 model 1.0\n002 NM 1 0 model 1.0 2.0\n"), FormatError);
  CHECK_THROWS_AS(parse_embeddings("001 NM 1 0 model nan\n"), FormatError);
  CHECK_THROWS_AS(parse_embeddings("001 XX 1 0 model 1\n"), std::exception);
  CHECK_THROWS_AS(parse_embeddings("001 NM 1 0 model\n"), FormatError);
}

TEST_CASE("checkpoint round trip is bit identical") {
  MultiStreamModel m(small_config(), 9);
  const std::string bytes = serialize_checkpoint(m);
  MultiStreamModel back = deserialize_checkpoint(bytes);
  CHECK(back.config() == m.config());
  CHECK(serialize_checkpoint(back) == bytes);
  const auto a = m.tensors();
  const auto b = back.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
  }

  const auto path = temp_file("model.ckpt");
  save_checkpoint(m, path);
  MultiStreamModel other(small_config(), 10);
  load_checkpoint_into(other, path);
  CHECK(serialize_checkpoint(other) == bytes);
  fs::remove(path);
}

TEST_CASE("checkpoint corruption and mismatch are explicit errors") {
  MultiStreamModel m(small_config(), 9);
  const std::string bytes = serialize_checkpoint(m);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() / 2)), CheckpointError);
  CHECK_THROWS_AS(deserialize_checkpoint("NOTACKPT"), CheckpointError);
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x01;
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), CheckpointError);

  const auto path = temp_file("mismatch.ckpt");
  save_checkpoint(m, path);
  ModelConfig bigger = small_config();
  bigger.channels = {4, 8, 16};
  MultiStreamModel other(bigger, 0);
  CHECK_THROWS_AS(load_checkpoint_into(other, path), CheckpointError);
  fs::remove(path);
  CHECK_THROWS(load_checkpoint(temp_file("missing.ckpt")));
}
