// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gaitgcn/cli.hpp"
#include "gaitgcn/evaluate.hpp"
#include "gaitgcn/model.hpp"
#include "gaitgcn/train.hpp"
#include "gaitgcn/verify.hpp"

#ifndef GAITGCN_CONFIG_DIR
#define GAITGCN_CONFIG_DIR "configs"
#endif

using namespace gaitgcn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void fail(const std::string& why) {
    if (pass) detail.clear();
    pass = false;
    detail += (detail.empty() ? "" : "; ") + why;
  }
  void note(const std::string& what) {
    if (pass) detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void absorb(Outcome& o, const PropertyResult& r) {
  if (r.pass) o.note(r.name + " (" + r.detail + ")");
  else o.fail(r.name + ": " + r.detail);
}

int cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "gaitgcn");
  std::ostringstream out, e;
  const int code = run_cli(args, out, e);
  if (err) *err = e.str();
  return code;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gaitgcn_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::vector<SkeletonSequence> desk_dataset(std::size_t frames) {
  SyntheticOptions opt;
  opt.n_subjects = 8;
  opt.seqs_per_subject = 4;
  opt.views = {0, 90};
  opt.frames = frames;
  auto seqs = generate_synthetic_dataset(opt);
  for (auto& s : seqs) s = normalize_coords(s);
  return seqs;
}

// --- 1 ---------------------------------------------------------------------

Outcome gradients() {
  Outcome o;
  const auto t0 = Clock::now();
  GradcheckSuiteOptions opt;
  auto cases = run_gradcheck_suite(opt);
  const double elapsed = seconds_since(t0);
  double worst = 0.0;
  for (const auto& c : cases) {
    std::printf("  %-24s max rel err %.3e over %zu coords (%.1fs)\n", c.name.c_str(), c.max_rel_error,
                c.coords, c.seconds);
    worst = std::max(worst, c.max_rel_error);
    if (!(c.max_rel_error < 1e-5)) o.fail(c.name + " error " + fmt("%.3e", c.max_rel_error));
  }
  if (opt.seeds.size() != 5) o.fail("expected 5 seeds");
  if (elapsed >= 300.0) o.fail("suite took " + fmt("%.1f", elapsed) + "s");
  o.note(std::to_string(cases.size()) + " layers x 5 seeds, worst " + fmt("%.2e", worst) + ", " +
         fmt("%.1f", elapsed) + "s");
  return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome adjacency() {
  Outcome o;
  absorb(o, check_k_adjacency_oracle(2024, 20));
  absorb(o, check_wrist_ankle_distance());
  return o;
}

// --- 3 ---------------------------------------------------------------------

Outcome full_graph() {
  Outcome o;
  absorb(o, check_full_aggregator_mean(2024));
  return o;
}

// --- 4 ---------------------------------------------------------------------

Outcome attention() {
  Outcome o;
  absorb(o, check_attention_structure(2024, 10));
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome shapes() {
  Outcome o;
  MultiStreamModel model(ModelConfig{}, 0);
  SyntheticOptions so;
  so.n_subjects = 1;
  so.seqs_per_subject = 1;
  so.views = {90};
  so.frames = 120;
  const auto seq = normalize_coords(generate_synthetic_dataset(so).front());
  const auto bundle = make_stream_bundle(seq, model.topology());

  const std::vector<Shape> want{{1, 96, 120, 15}, {1, 192, 60, 15}, {1, 384, 30, 15}};
  NoGradGuard guard;
  for (std::size_t s = 0; s < model.streams().size(); ++s) {
    Tensor x = bundle_stream(bundle, model.config().streams[s].kind);
    if (x.shape() != Shape{2, 120, 15}) o.fail("input " + shape_str(x.shape()));
    auto out = model.stream(s).forward(x, false);
    for (std::size_t b = 0; b < want.size(); ++b)
      if (out.block_outputs[b].shape() != want[b])
        o.fail("stream " + std::to_string(s) + " block " + std::to_string(b) + " " +
               shape_str(out.block_outputs[b].shape()));
    if (out.embedding.shape() != Shape{1, 384}) o.fail("embedding " + shape_str(out.embedding.shape()));
  }
  auto fm = forward_multistream(model, seq);
  if (fm.vector.size() != 1152) o.fail("f_m has " + std::to_string(fm.vector.size()));
  EmbeddingRecord fa = fm;
  fa.source = EmbeddingSource::appearance;
  fa.vector.assign(256, 0.5);
  auto fused = fuse_two_branch(fm, fa, 400.0);
  if (fused.vector.size() != 1152 + 256) o.fail("fused has " + std::to_string(fused.vector.size()));
  o.note("(2,120,15)->(96,120,15)->(192,60,15)->(384,30,15)->384 per stream, f_m 1152, fused 1408");
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome protocol() {
  Outcome o;
  absorb(o, check_protocol_oracle(2024, 50));
  absorb(o, check_ten_gallery_views(2024));
  return o;
}

// --- 7 ---------------------------------------------------------------------

bool monotone_after_decay(const std::vector<EpochMetrics>& log, std::size_t first_milestone,
                          std::string& why) {
  for (std::size_t e = first_milestone + 1; e < log.size(); ++e) {
    if (log[e].loss > 1.05 * log[e - 1].loss) {
      why = "loss rose from " + fmt("%.4g", log[e - 1].loss) + " to " + fmt("%.4g", log[e].loss) +
            " at epoch " + std::to_string(e);
      return false;
    }
  }
  return true;
}

Outcome desk_learning() {
  Outcome o;
  ExperimentConfig cfg = load_experiment_config(fs::path(GAITGCN_CONFIG_DIR) / "desk.json");
  if (cfg.model.channels != std::vector<std::size_t>{8, 16, 32} || cfg.model.frames != 30)
    o.fail("desk config is not 8/16/32 at T=30");
  const auto milestones = scaled_milestones({45, 55}, 65, cfg.train.epochs);
  if (cfg.train.lr_milestones != milestones) o.fail("desk milestones are not the scaled schedule");
  const auto data = desk_dataset(cfg.model.frames);

  for (const char* adjacency : {"k_hop:4", "full"}) {
    ExperimentConfig run = cfg;
    run.model.streams[0].adjacency = AdjacencySpec::parse(adjacency);
    MultiStreamModel model(run.model, run.train.seed);
    TrainOptions opt;
    opt.streams = {0};
    const auto t0 = Clock::now();
    TrainResult result;
    try {
      result = train(model, data, run.train, opt);
    } catch (const TrainingDivergedError& e) {
      o.fail(std::string(adjacency) + " diverged: " + e.what());
      continue;
    }
    const double elapsed = seconds_since(t0);
    double best = 0.0;
    std::size_t reached = 0;
    for (const auto& m : result.log) {
      if (!std::isfinite(m.loss)) o.fail(std::string(adjacency) + " non-finite loss");
      if (m.acc >= 0.95 && best < 0.95) reached = m.epoch;
      best = std::max(best, m.acc);
    }
    std::string why;
    if (!monotone_after_decay(result.log, milestones.front(), why)) o.fail(std::string(adjacency) + " " + why);
    if (elapsed >= 600.0) o.fail(std::string(adjacency) + " took " + fmt("%.1f", elapsed) + "s");
    if (std::string(adjacency) == "k_hop:4" && best < 0.95)
      o.fail("joint stream peaked at " + fmt("%.3f", best) + " train accuracy");
    o.note(std::string(adjacency) + ": " + std::to_string(data.size()) + " samples, best acc " +
           fmt("%.3f", best) + (best >= 0.95 ? " (>=0.95 at epoch " + std::to_string(reached) + ")" : "") +
           ", final loss " + fmt("%.4g", result.log.back().loss) + ", " + fmt("%.1f", elapsed) + "s");
  }
  return o;
}

// --- 8 ---------------------------------------------------------------------

Outcome fusion() {
  Outcome o;
  Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    EmbeddingRecord fm{"001", Condition::CL, 1, 36, EmbeddingSource::model, {}};
    EmbeddingRecord fa{"001", Condition::CL, 1, 36, EmbeddingSource::appearance, {}};
    for (std::size_t k = 1 + uniform_index(rng, 20); k > 0; --k) fm.vector.push_back(standard_normal(rng));
    for (std::size_t k = 1 + uniform_index(rng, 20); k > 0; --k) fa.vector.push_back(standard_normal(rng));
    const double lambda = uniform(rng, 1e-3, 1e3);
    auto f = fuse_two_branch(fm, fa, lambda);
    std::vector<double> want = fm.vector;
    for (double v : fa.vector) want.push_back(lambda * v);
    if (f.vector != want) o.fail("fuse_two_branch is not concat(f_m, lambda*f_a)");
  }
  absorb(o, check_fusion_small_lambda(2024, 20));

  const fs::path dir = scratch("fusion");
  EvalProtocol p;
  std::vector<EmbeddingRecord> fm, fa;
  for (int s = 0; s < 4; ++s) {
    const std::string id = "00" + std::to_string(s + 1);
    for (int view : p.views) {
      auto add = [&](Condition c, int q) {
        EmbeddingRecord r{id, c, q, view, EmbeddingSource::model, {s + 0.3 * standard_normal(rng), standard_normal(rng)}};
        fm.push_back(r);
        r.source = EmbeddingSource::appearance;
        r.vector = {0.01 * s + 0.002 * standard_normal(rng)};
        fa.push_back(r);
      };
      for (int q = 1; q <= 4; ++q) add(Condition::NM, q);
      for (const auto& f : p.probes) add(f.condition, f.first);
    }
  }
  write_embeddings(dir / "fm.txt", fm);
  write_embeddings(dir / "fa.txt", fa);
  std::string err;
  const int code = cli({"fuse-sweep", "--model-embeddings", (dir / "fm.txt").string(), "--appearance-embeddings",
                        (dir / "fa.txt").string(), "--lambdas", "300,350,400,450,500", "--out",
                        (dir / "sweep").string()},
                       &err);
  if (code != 0) {
    o.fail("fuse-sweep exited " + std::to_string(code) + ": " + err);
  } else {
    std::istringstream report(slurp(dir / "sweep" / "lambda_sweep.csv"));
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(report, line)) lines.push_back(line);
    const std::vector<std::string> lambdas{"300", "350", "400", "450", "500"};
    bool shaped = lines.size() == 6 && lines[0] == "lambda,NM,BG,CL,Mean";
    for (std::size_t i = 0; shaped && i < 5; ++i)
      shaped = lines[i + 1].rfind(lambdas[i] + ",", 0) == 0 &&
               std::count(lines[i + 1].begin(), lines[i + 1].end(), ',') == 4;
    if (!shaped) o.fail("lambda report is not 5 rows of lambda,NM,BG,CL,Mean");
    else o.note("sweep report: 5 rows x (NM,BG,CL,Mean)");
  }
  fs::remove_all(dir);
  return o;
}

// --- 9 ---------------------------------------------------------------------

Outcome determinism() {
  Outcome o;
  const std::string desk = (fs::path(GAITGCN_CONFIG_DIR) / "desk.json").string();
  const std::vector<std::string> common{"--config", desk, "--seed", "7", "--set", "train.epochs=4"};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  std::vector<fs::path> roots;
  for (const char* tag : {"a", "b"}) {
    const fs::path root = scratch(std::string("determinism_") + tag);
    roots.push_back(root);
    const auto data = (root / "gen" / "dataset").string();
    std::string err;
    bool ok = cli(with({"gen-data", "--subjects", "8", "--seqs", "10", "--frames", "30", "--train-subjects", "4",
                        "--out", (root / "gen").string()}), &err) == 0;
    ok = ok && cli(with({"train", "--data", data, "--out", (root / "train").string()}), &err) == 0;
    ok = ok && cli(with({"embed", "--data", data, "--checkpoint", (root / "train" / "model.ckpt").string(),
                         "--out", (root / "embed").string()}), &err) == 0;
    ok = ok && cli(with({"eval", "--embeddings", (root / "embed" / "embeddings.txt").string(), "--set",
                         "protocol.views=[0,90]", "--out", (root / "eval").string()}), &err) == 0;
    if (!ok) o.fail(std::string("run ") + tag + " failed: " + err);
  }
  if (!o.pass) return o;
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(roots[0])) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), roots[0]);
    ++files;
    if (slurp(e.path()) != slurp(roots[1] / rel)) o.fail(rel.string() + " differs");
  }
  for (const char* must : {"gen/dataset/manifest.tsv", "train/metrics.jsonl", "train/model.ckpt",
                           "embed/embeddings.txt", "eval/accuracy.csv"})
    if (!fs::exists(roots[0] / must)) o.fail(std::string(must) + " missing");
  o.note(std::to_string(files) + " files byte-identical across two runs (datasets, loss logs, checkpoints, "
         "embeddings, reports)");
  for (const auto& r : roots) fs::remove_all(r);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 gradient correctness", gradients},
      {"2 adjacency oracles", adjacency},
      {"3 fully-connected closed form", full_graph},
      {"4 attention structure", attention},
      {"5 architecture shape contract", shapes},
      {"6 protocol oracle", protocol},
      {"7 desk-scale learning", desk_learning},
      {"8 fusion algebra", fusion},
      {"9 determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    std::printf("%s %s [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
