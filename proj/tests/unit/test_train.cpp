#include <cmath>

#include "doctest.h"
#include "gaitgcn/train.hpp"

using namespace gaitgcn;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.frames = 8;
  c.channels = {4, 8, 8};
  c.num_classes = 3;
  return c;
}

std::vector<SkeletonSequence> tiny_set(std::size_t subjects = 3) {
  SyntheticOptions opt;
  opt.n_subjects = subjects;
  opt.seqs_per_subject = 2;
  opt.views = {0};
  opt.frames = 8;
  auto seqs = generate_synthetic_dataset(opt);
  for (auto& s : seqs) s = normalize_coords(s);
  return seqs;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.batch_size = 6;
  t.epochs = 3;
  t.lr_milestones = {2};
  return t;
}

}  // namespace

TEST_CASE("sgd update with momentum and weight decay") {
  Tensor p({1}, {1.0}, true);
  Sgd opt({p}, 0.9, 0.1);
  p.mutable_grad()[0] = 2.0;
  opt.step(0.5);
  CHECK(p.data()[0] == doctest::Approx(1.0 - 0.5 * 2.1));
  p.mutable_grad()[0] = 2.0;
  opt.step(0.5);
  const double v2 = 0.9 * 2.1 + 2.0 + 0.1 * (1.0 - 0.5 * 2.1);
  CHECK(p.data()[0] == doctest::Approx(1.0 - 0.5 * 2.1 - 0.5 * v2));
}

TEST_CASE("milestone scaling and class labels") {
  CHECK(scaled_milestones({45, 55}, 65, 200) == std::vector<std::size_t>{138, 169});
  CHECK(scaled_milestones({45, 55}, 65, 65) == std::vector<std::size_t>{45, 55});
  auto labels = class_labels(tiny_set());
  CHECK(labels.size() == 3);
  CHECK(std::is_sorted(labels.begin(), labels.end()));
}

TEST_CASE("training rejects bad setups") {
  MultiStreamModel m(tiny_model(), 0);
  auto set = tiny_set();
  TrainConfig t = tiny_train();
  t.batch_size = 7;
  CHECK_THROWS_AS(train(m, set, t), std::invalid_argument);
  t.batch_size = 0;
  CHECK_THROWS_AS(train(m, set, t), std::invalid_argument);
  CHECK_THROWS_AS(train(m, tiny_set(4), tiny_train()), std::invalid_argument);
}

TEST_CASE("training is deterministic and logs every epoch") {
  auto set = tiny_set();
  MultiStreamModel a(tiny_model(), 1);
  MultiStreamModel b(tiny_model(), 1);
  TrainOptions opt;
  std::size_t callbacks = 0;
  opt.on_epoch = [&](const EpochMetrics&) { ++callbacks; };
  auto ra = train(a, set, tiny_train(), opt);
  auto rb = train(b, set, tiny_train());
  CHECK(ra.log.size() == 9);
  CHECK(callbacks == 9);
  CHECK(ra.log == rb.log);
  CHECK(serialize_checkpoint(a) == serialize_checkpoint(b));
  CHECK(ra.log[0].stream == "joint");
  CHECK(ra.log[2].lr == doctest::Approx(0.01));
  for (const auto& e : ra.log) CHECK(std::isfinite(e.loss));
  CHECK(format_metrics_line(ra.log[0]).rfind("{\"stream\":\"joint\",\"epoch\":0", 0) == 0);
}

TEST_CASE("selected streams only change their own tensors") {
  auto set = tiny_set();
  MultiStreamModel m(tiny_model(), 2);
  MultiStreamModel ref(tiny_model(), 2);
  TrainOptions opt;
  opt.streams = {1};
  auto r = train(m, set, tiny_train(), opt);
  CHECK(r.log.size() == 3);
  CHECK(r.log[0].stream == "bone");
  const auto a = m.stream_tensors(0);
  const auto b = ref.stream_tensors(0);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
}

TEST_CASE("single precision keeps parameters on the float grid") {
  auto set = tiny_set();
  MultiStreamModel m(tiny_model(), 3);
  TrainConfig t = tiny_train();
  t.epochs = 1;
  t.precision = Precision::single;
  TrainOptions opt;
  opt.streams = {0};
  train(m, set, t, opt);
  for (const auto& nt : m.stream_tensors(0)) {
    if (!nt.trainable) continue;
    for (double v : nt.tensor.data()) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
  std::vector<double> v{0.1, 1.0 / 3.0};
  round_to_single(v);
  CHECK(v[0] == static_cast<double>(0.1f));
}

TEST_CASE("extract_embeddings matches embed") {
  auto set = tiny_set();
  MultiStreamModel m(tiny_model(), 4);
  auto recs = extract_embeddings(m, set, 4);
  REQUIRE(recs.size() == set.size());
  auto single = forward_multistream(m, set[5]);
  CHECK(recs[5].vector == single.vector);
  CHECK(recs[5].subject_id == set[5].subject_id);
}
