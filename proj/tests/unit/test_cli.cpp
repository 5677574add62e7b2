#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gaitgcn/cli.hpp"
#include "gaitgcn/model.hpp"

using namespace gaitgcn;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gaitgcn");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gaitgcn_cli_" + name);
  fs::remove_all(p);
  return p;
}

const std::vector<std::string> kTiny{
    "--set", "model.frames=8", "--set", "model.channels=[4,8,8]", "--set", "model.num_classes=2",
    "--set", "train.batch_size=20", "--set", "train.epochs=2"};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
  args.insert(args.end(), kTiny.begin(), kTiny.end());
  return args;
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  auto r = cli({"gen-data", "--no-such-flag"});
  CHECK(r.code == 2);
  CHECK(cli({"train"}).code == 2);
}

TEST_CASE("missing input names the path") {
  const auto out = fresh_dir("missing");
  auto r = cli({"train", "--data", "/no/such/dataset", "--out", out.string()});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error[", 0) == 0);
  CHECK(r.err.find("/no/such/dataset") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("bad overrides are reported") {
  const auto out = fresh_dir("badset");
  auto r = cli({"gen-data", "--out", out.string(), "--set", "model.colour=1"});
  CHECK(r.code != 0);
  CHECK(r.err.find("colour") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("gen-data is byte-identical for equal seeds") {
  const auto a = fresh_dir("gen_a");
  const auto b = fresh_dir("gen_b");
  for (const auto& d : {a, b}) {
    REQUIRE(cli({"gen-data", "--subjects", "3", "--seqs", "2", "--frames", "10", "--seed", "7",
                 "--out", d.string()}).code == 0);
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a / "dataset")) {
    if (!e.is_regular_file()) continue;
    ++files;
    CHECK(slurp(e.path()) == slurp(b / fs::relative(e.path(), a)));
  }
  CHECK(files == 3 * 2 * 2 + 1);
  CHECK(fs::exists(a / "config.json"));
  CHECK(fs::exists(a / "run.json"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("pipeline from synthetic data to a lambda sweep") {
  const auto root = fresh_dir("pipeline");
  const auto data = root / "gen" / "dataset";
  REQUIRE(cli(with_tiny({"gen-data", "--subjects", "4", "--seqs", "10", "--views", "0,90", "--frames",
                         "8", "--train-subjects", "2", "--out", (root / "gen").string()})).code == 0);

  auto tr = cli(with_tiny({"train", "--data", data.string(), "--streams", "joint,motion", "--out",
                           (root / "train").string()}));
  REQUIRE_MESSAGE(tr.code == 0, tr.err);
  const auto metrics = slurp(root / "train" / "metrics.jsonl");
  CHECK(std::count(metrics.begin(), metrics.end(), '\n') == 4);
  CHECK(fs::exists(root / "train" / "classes.txt"));

  auto em = cli({"embed", "--data", data.string(), "--checkpoint", (root / "train" / "model.ckpt").string(),
                 "--out", (root / "embed").string()});
  REQUIRE_MESSAGE(em.code == 0, em.err);
  const auto fm = read_embeddings(root / "embed" / "embeddings.txt");
  CHECK(fm.size() == 2 * 10 * 2);
  CHECK(fm.front().vector.size() == 24);

  auto ev = cli({"eval", "--embeddings", (root / "embed" / "embeddings.txt").string(), "--set",
                 "protocol.views=[0,90]", "--out", (root / "eval").string()});
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  CHECK(slurp(root / "eval" / "accuracy.csv").rfind("condition,probe_view,accuracy,gallery_views,0,90", 0) == 0);

  std::vector<EmbeddingRecord> fa = fm;
  for (auto& r : fa) {
    r.source = EmbeddingSource::appearance;
    r.vector = {r.vector[0] * 0.01};
  }
  write_embeddings(root / "fa.txt", fa);
  auto sw = cli({"fuse-sweep", "--model-embeddings", (root / "embed" / "embeddings.txt").string(),
                 "--appearance-embeddings", (root / "fa.txt").string(), "--set", "protocol.views=[0,90]",
                 "--out", (root / "sweep").string()});
  REQUIRE_MESSAGE(sw.code == 0, sw.err);
  const auto report = slurp(root / "sweep" / "lambda_sweep.csv");
  CHECK(report.rfind("lambda,NM,BG,CL,Mean\n300,", 0) == 0);
  CHECK(std::count(report.begin(), report.end(), '\n') == 6);
  fs::remove_all(root);
}
