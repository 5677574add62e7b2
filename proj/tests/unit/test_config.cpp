#include "doctest.h"
#include "gaitgcn/config.hpp"

using namespace gaitgcn;

TEST_CASE("learning-rate schedule steps at the milestones") {
  TrainConfig t;
  CHECK(t.learning_rate(0) == doctest::Approx(0.1));
  CHECK(t.learning_rate(44) == doctest::Approx(0.1));
  CHECK(t.learning_rate(45) == doctest::Approx(0.01));
  CHECK(t.learning_rate(54) == doctest::Approx(0.01));
  CHECK(t.learning_rate(55) == doctest::Approx(0.001));
  CHECK(t.learning_rate(64) == doctest::Approx(0.001));
}

TEST_CASE("experiment config round-trips through json") {
  ExperimentConfig c;
  c.model.frames = 30;
  c.model.streams[0].adjacency = AdjacencySpec::parse("full");
  c.train.precision = Precision::single;
  c.protocol.views = {0, 90};
  CHECK(experiment_config_from_json(experiment_config_to_json(c)) == c);
  CHECK(model_config_from_json(model_config_to_json(c.model)) == c.model);
}

TEST_CASE("overrides") {
  ExperimentConfig c;
  apply_override(c, "train.lr=0.05");
  CHECK(c.train.lr == 0.05);
  apply_override(c, "model.channels=[8,16,32]");
  CHECK(c.model.channels == std::vector<std::size_t>{8, 16, 32});
  apply_override(c, "train.precision=single");
  CHECK(c.train.precision == Precision::single);
  CHECK_THROWS_AS(apply_override(c, "train.learning_rate=1"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(c, "train.lr"), std::invalid_argument);
  CHECK_THROWS(apply_override(c, "train.precision=half"));
}

TEST_CASE("config validation") {
  ModelConfig m;
  CHECK_NOTHROW(m.validate());
  m.tau = 2;
  CHECK_THROWS(m.validate());
  m = ModelConfig{};
  m.channels = {6, 12, 24};
  m.reduction = 4;
  CHECK_THROWS(m.validate());
  CHECK_THROWS(experiment_config_from_json(R"({"model":{"colour":"red"}})"));
}

TEST_CASE("default protocol") {
  EvalProtocol p;
  CHECK(p.views.size() == 11);
  CHECK(p.gallery.matches(Condition::NM, 4));
  CHECK_FALSE(p.gallery.matches(Condition::NM, 5));
  CHECK(p.probes[2].matches(Condition::CL, 2));
}
