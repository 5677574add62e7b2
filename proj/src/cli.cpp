#include "gaitgcn/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gaitgcn/config.hpp"
#include "gaitgcn/evaluate.hpp"
#include "gaitgcn/model.hpp"
#include "gaitgcn/train.hpp"
#include "gaitgcn/verify.hpp"

namespace fs = std::filesystem;

namespace gaitgcn {

namespace {

struct Common {
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string precision;
  int verbosity = 0;
};

class CliFailure : public std::runtime_error {
 public:
  CliFailure(std::string cls, const std::string& msg) : std::runtime_error(msg), cls_(std::move(cls)) {}
  const std::string& error_class() const { return cls_; }

 private:
  std::string cls_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliFailure("io", "cannot write " + path.string());
  out << text;
}

void require_exists(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw CliFailure("io", std::string(what) + " not found: " + path.string());
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    char* end = nullptr;
    double v = std::strtod(item.c_str(), &end);
    if (item.empty() || *end != '\0') throw CliFailure("usage", "bad number '" + item + "' in list");
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_ints(const std::string& list) {
  std::vector<int> out;
  for (double v : parse_doubles(list)) {
    if (v != static_cast<int>(v)) throw CliFailure("usage", "expected integers in '" + list + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

/// Loads the config file (if any), then --set overrides, then the flag
/// shortcuts; echoes the result and the seed into the output directory.
ExperimentConfig resolve(const Common& c, const std::string& subcommand) {
  ExperimentConfig config;
  if (!c.config_path.empty()) {
    require_exists(c.config_path, "config file");
    config = load_experiment_config(c.config_path);
  }
  for (const auto& o : c.overrides) apply_override(config, o);
  if (c.seed) config.train.seed = *c.seed;
  if (!c.precision.empty()) config.train.precision = parse_precision(c.precision);

  fs::create_directories(c.out_dir);
  write_text(fs::path(c.out_dir) / "config.json", experiment_config_to_json(config) + "\n");
  write_text(fs::path(c.out_dir) / "run.json",
             "{\"subcommand\":\"" + subcommand + "\",\"seed\":" + std::to_string(config.train.seed) + "}\n");
  return config;
}

std::vector<SkeletonSequence> split_sequences(const std::vector<DatasetItem>& items,
                                              std::vector<Split> splits) {
  std::vector<SkeletonSequence> out;
  for (const auto& item : items)
    if (std::find(splits.begin(), splits.end(), item.split) != splits.end()) out.push_back(item.sequence);
  return out;
}

Split assign_split(const SkeletonSequence& s, bool train_subject, const EvalProtocol& protocol) {
  if (train_subject) return Split::train;
  return protocol.gallery.matches(s.condition, s.seq_index) ? Split::gallery : Split::probe;
}

int cmd_gen_data(const Common& c, std::size_t subjects, std::size_t seqs, const std::string& views,
                 std::size_t frames, double noise, std::optional<std::size_t> train_subjects,
                 std::ostream& out) {
  ExperimentConfig config = resolve(c, "gen-data");
  SyntheticOptions o;
  o.n_subjects = subjects;
  o.seqs_per_subject = seqs;
  o.views = parse_ints(views);
  o.frames = frames;
  o.noise = noise;
  o.seed = config.train.seed;
  const std::size_t n_train = train_subjects.value_or((subjects + 1) / 2);
  if (n_train > subjects) throw CliFailure("usage", "--train-subjects exceeds --subjects");

  auto sequences = generate_synthetic_dataset(o);
  auto train_ids = class_labels(sequences);
  train_ids.resize(n_train);
  std::vector<DatasetItem> items;
  for (auto& s : sequences) {
    bool is_train = std::binary_search(train_ids.begin(), train_ids.end(), s.subject_id);
    Split split = assign_split(s, is_train, config.protocol);
    items.push_back({std::move(s), split});
  }
  const fs::path dir = fs::path(c.out_dir) / "dataset";
  save_dataset(dir, items);
  out << "wrote " << items.size() << " sequences to " << dir.string() << "\n";
  return 0;
}

int cmd_preprocess(const Common& c, const std::string& input, std::ostream& out) {
  ExperimentConfig config = resolve(c, "preprocess");
  require_exists(fs::path(input) / kManifestName, "manifest");
  std::vector<DatasetItem> items;
  Diagnostics diag;
  for (const auto& entry : read_manifest(input)) {
    const fs::path path = fs::path(input) / entry.path;
    require_exists(path, "sequence file");
    SkeletonSequence s = load_raw_sequence(path);
    if (s.coords.joints == kNumPoseJoints) {
      s.coords = select_joints(s.coords);
      s.confidence.reset();
    }
    s = resample_to_length(s, config.model.frames);
    s = normalize_coords(s, &diag);
    items.push_back({std::move(s), entry.split});
  }
  const fs::path dir = fs::path(c.out_dir) / "dataset";
  save_dataset(dir, items);
  for (const auto& w : diag.warnings) out << "warning: " << w << "\n";
  out << "preprocessed " << items.size() << " sequences into " << dir.string() << "\n";
  return 0;
}

std::vector<std::size_t> select_streams(const ModelConfig& model, const std::string& list) {
  std::vector<std::size_t> out;
  if (list.empty()) return out;
  std::stringstream ss(list);
  std::string name;
  while (std::getline(ss, name, ',')) {
    StreamKind kind = parse_stream_kind(name);
    bool found = false;
    for (std::size_t i = 0; i < model.streams.size(); ++i) {
      if (model.streams[i].kind == kind) {
        out.push_back(i);
        found = true;
      }
    }
    if (!found) throw CliFailure("config", "stream '" + name + "' is not in model.streams");
  }
  return out;
}

int cmd_train(const Common& c, const std::string& data, const std::string& streams, std::ostream& out) {
  ExperimentConfig config = resolve(c, "train");
  require_exists(fs::path(data) / kManifestName, "manifest");
  auto items = load_dataset(data);
  auto train_set = split_sequences(items, {Split::train});
  if (train_set.empty()) throw CliFailure("data", "dataset " + data + " has no train split");

  MultiStreamModel model(config.model, config.train.seed);
  const fs::path metrics_path = fs::path(c.out_dir) / "metrics.jsonl";
  std::ofstream metrics(metrics_path, std::ios::binary);
  if (!metrics) throw CliFailure("io", "cannot write " + metrics_path.string());
  TrainOptions options;
  options.streams = select_streams(config.model, streams);
  options.on_epoch = [&](const EpochMetrics& m) {
    metrics << format_metrics_line(m) << "\n";
    metrics.flush();
    if (c.verbosity > 0) out << format_metrics_line(m) << "\n";
  };
  TrainResult result = train(model, train_set, config.train, options);

  std::string classes;
  for (const auto& id : result.classes) classes += id + "\n";
  write_text(fs::path(c.out_dir) / "classes.txt", classes);
  save_checkpoint(model, fs::path(c.out_dir) / "model.ckpt");
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    out << "trained " << train_set.size() << " sequences; final " << last.stream << " loss "
        << last.loss << " acc " << last.acc << "\n";
  }
  return 0;
}

int cmd_embed(const Common& c, const std::string& data, const std::string& checkpoint,
              const std::string& splits, std::ostream& out) {
  resolve(c, "embed");
  require_exists(fs::path(data) / kManifestName, "manifest");
  require_exists(checkpoint, "checkpoint");
  MultiStreamModel model = load_checkpoint(checkpoint);
  std::vector<Split> wanted;
  std::stringstream ss(splits);
  std::string s;
  while (std::getline(ss, s, ',')) wanted.push_back(parse_split(s));
  auto sequences = split_sequences(load_dataset(data), wanted);
  if (sequences.empty()) throw CliFailure("data", "no sequences in splits '" + splits + "'");
  auto records = extract_embeddings(model, sequences);
  const fs::path path = fs::path(c.out_dir) / "embeddings.txt";
  write_embeddings(path, records);
  out << "wrote " << records.size() << " embeddings of dimension " << records.front().vector.size()
      << " to " << path.string() << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& embeddings, const std::string& gallery_file,
             const std::string& probe_file, std::ostream& out) {
  ExperimentConfig config = resolve(c, "eval");
  std::vector<EmbeddingRecord> gallery, probe;
  if (!gallery_file.empty() || !probe_file.empty()) {
    if (gallery_file.empty() || probe_file.empty())
      throw CliFailure("usage", "--gallery and --probe must be given together");
    require_exists(gallery_file, "gallery embeddings");
    require_exists(probe_file, "probe embeddings");
    gallery = read_embeddings(gallery_file);
    probe = read_embeddings(probe_file);
  } else {
    if (embeddings.empty()) throw CliFailure("usage", "eval needs --embeddings or --gallery/--probe");
    require_exists(embeddings, "embeddings");
    std::tie(gallery, probe) = split_by_protocol(read_embeddings(embeddings), config.protocol);
  }
  Diagnostics diag;
  AccuracyTable table = evaluate_rank1(gallery, probe, config.protocol, &diag);
  const std::string report = format_accuracy_report(table);
  write_text(fs::path(c.out_dir) / "accuracy.csv", report);
  for (const auto& w : diag.warnings) out << "warning: " << w << "\n";
  out << report;
  return 0;
}

int cmd_fuse_sweep(const Common& c, const std::string& model_file, const std::string& appearance_file,
                   const std::string& lambdas, std::ostream& out) {
  ExperimentConfig config = resolve(c, "fuse-sweep");
  require_exists(model_file, "model embeddings");
  require_exists(appearance_file, "appearance embeddings");
  auto f_m = read_embeddings(model_file);
  auto f_a = read_embeddings(appearance_file);
  std::vector<double> values =
      lambdas.empty() ? std::vector<double>{300, 350, 400, 450, 500} : parse_doubles(lambdas);
  Diagnostics diag;
  auto rows = lambda_sweep(f_m, f_a, values, config.protocol, &diag);
  const std::string report = format_lambda_report(rows, config.protocol);
  write_text(fs::path(c.out_dir) / "lambda_sweep.csv", report);
  for (const auto& w : diag.warnings) out << "warning: " << w << "\n";
  out << report;
  return 0;
}

int cmd_gradcheck(const Common& c, std::size_t n_seeds, std::ostream& out) {
  ExperimentConfig config = resolve(c, "gradcheck");
  GradcheckSuiteOptions o;
  o.seeds.clear();
  for (std::size_t i = 0; i < n_seeds; ++i) o.seeds.push_back(config.train.seed + i + 1);
  bool ok = true;
  std::string report = "layer,max_rel_error,coords,seconds\n";
  for (const auto& name : gradcheck_case_names()) {
    GradcheckCase total{name, 0.0, 0, 0.0};
    for (auto seed : o.seeds) {
      auto one = run_gradcheck_case(name, seed, o);
      total.max_rel_error = std::max(total.max_rel_error, one.max_rel_error);
      total.coords += one.coords;
      total.seconds += one.seconds;
    }
    const bool pass = total.max_rel_error < 1e-4;
    ok = ok && pass;
    char line[160];
    std::snprintf(line, sizeof line, "%-24s max_rel_error %.3e  coords %6zu  %s\n", name.c_str(),
                  total.max_rel_error, total.coords, pass ? "ok" : "FAIL");
    out << line;
    std::snprintf(line, sizeof line, "%s,%.6e,%zu,%.3f\n", name.c_str(), total.max_rel_error,
                  total.coords, total.seconds);
    report += line;
  }
  write_text(fs::path(c.out_dir) / "gradcheck.csv", report);
  return ok ? 0 : 1;
}

int cmd_selftest(const Common& c, std::ostream& out) {
  ExperimentConfig config = resolve(c, "selftest");
  bool ok = true;
  std::string report;
  for (const auto& r : run_selftest(config.train.seed)) {
    ok = ok && r.pass;
    std::string line = std::string(r.pass ? "PASS " : "FAIL ") + r.name + ": " + r.detail + "\n";
    out << line;
    report += line;
  }
  write_text(fs::path(c.out_dir) / "selftest.txt", report);
  return ok ? 0 : 1;
}

void add_common(CLI::App* app, Common& c, const std::string& default_out) {
  c.out_dir = default_out;
  app->add_option("--config", c.config_path, "Experiment config (JSON)");
  app->add_option("--out", c.out_dir, "Output directory")->capture_default_str();
  app->add_option("--set", c.overrides, "Override a config value, section.key=value (repeatable)");
  app->add_option("--seed", c.seed, "Random seed (overrides train.seed)");
  app->add_option("--precision", c.precision, "single or double")
      ->check(CLI::IsMember({"single", "double"}));
  app->add_flag("-v,--verbose", c.verbosity, "More output");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skeleton gait recognition with spatio-temporal graph convolutions", "gaitgcn"};
  app.require_subcommand(1);

  Common c;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic skeleton dataset");
  add_common(gen, c, "runs/gen-data");
  std::size_t subjects = 8, seqs = 4, frames = 120;
  std::string views = "0,90";
  double noise = 0.003;
  std::optional<std::size_t> train_subjects;
  gen->add_option("--subjects", subjects)->check(CLI::PositiveNumber);
  gen->add_option("--seqs", seqs)->check(CLI::PositiveNumber);
  gen->add_option("--views", views, "Comma-separated view angles in degrees");
  gen->add_option("--frames", frames)->check(CLI::PositiveNumber);
  gen->add_option("--noise", noise);
  gen->add_option("--train-subjects", train_subjects, "Subjects assigned to the train split");

  auto* pre = app.add_subcommand("preprocess", "Select joints, resample and normalize a dataset");
  add_common(pre, c, "runs/preprocess");
  std::string input;
  pre->add_option("--input", input, "Raw dataset directory")->required();

  auto* tr = app.add_subcommand("train", "Train the skeleton streams");
  add_common(tr, c, "runs/train");
  std::string data, streams;
  tr->add_option("--data", data, "Dataset directory")->required();
  tr->add_option("--streams", streams, "Comma-separated subset of joint,bone,motion");

  auto* emb = app.add_subcommand("embed", "Extract f_m embeddings");
  add_common(emb, c, "runs/embed");
  std::string checkpoint, splits = "gallery,probe";
  emb->add_option("--data", data, "Dataset directory")->required();
  emb->add_option("--checkpoint", checkpoint)->required();
  emb->add_option("--splits", splits, "Comma-separated splits")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Cross-view rank-1 evaluation");
  add_common(ev, c, "runs/eval");
  std::string embeddings, gallery_file, probe_file;
  ev->add_option("--embeddings", embeddings, "Embedding file; roles taken from the protocol");
  ev->add_option("--gallery", gallery_file, "Gallery embedding file");
  ev->add_option("--probe", probe_file, "Probe embedding file");

  auto* fs_cmd = app.add_subcommand("fuse-sweep", "Fuse with appearance embeddings over lambda values");
  add_common(fs_cmd, c, "runs/fuse-sweep");
  std::string model_file, appearance_file, lambdas;
  fs_cmd->add_option("--model-embeddings", model_file)->required();
  fs_cmd->add_option("--appearance-embeddings", appearance_file)->required();
  fs_cmd->add_option("--lambdas", lambdas, "Comma-separated lambda values (default 300,350,400,450,500)");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  add_common(gc, c, "runs/gradcheck");
  std::size_t n_seeds = 5;
  gc->add_option("--seeds", n_seeds, "Number of random seeds")->check(CLI::PositiveNumber);

  auto* st = app.add_subcommand("selftest", "Run the property suite");
  add_common(st, c, "runs/selftest");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    err << app.help();
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(c, subjects, seqs, views, frames, noise, train_subjects, out);
    if (pre->parsed()) return cmd_preprocess(c, input, out);
    if (tr->parsed()) return cmd_train(c, data, streams, out);
    if (emb->parsed()) return cmd_embed(c, data, checkpoint, splits, out);
    if (ev->parsed()) return cmd_eval(c, embeddings, gallery_file, probe_file, out);
    if (fs_cmd->parsed()) return cmd_fuse_sweep(c, model_file, appearance_file, lambdas, out);
    if (gc->parsed()) return cmd_gradcheck(c, n_seeds, out);
    if (st->parsed()) return cmd_selftest(c, out);
  } catch (const CliFailure& e) {
    err << "error[" << e.error_class() << "]: " << e.what() << "\n";
    return e.error_class() == "usage" ? 2 : 1;
  } catch (const CheckpointError& e) {
    err << "error[checkpoint]: " << e.what() << "\n";
    return 1;
  } catch (const TrainingDivergedError& e) {
    err << "error[diverged]: " << e.what() << "\n";
    return 1;
  } catch (const FormatError& e) {
    err << "error[format]: " << e.what() << "\n";
    return 1;
  } catch (const ShapeError& e) {
    err << "error[shape]: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error[invalid]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace gaitgcn
