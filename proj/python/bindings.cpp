#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "gaitgcn/cli.hpp"
#include "gaitgcn/config.hpp"
#include "gaitgcn/evaluate.hpp"
#include "gaitgcn/graph.hpp"
#include "gaitgcn/model.hpp"
#include "gaitgcn/skeleton.hpp"
#include "gaitgcn/train.hpp"
#include "gaitgcn/verify.hpp"

namespace py = pybind11;
using namespace gaitgcn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(const std::vector<double>& values, std::vector<py::ssize_t> shape) {
  Array out(shape);
  std::copy(values.begin(), values.end(), out.mutable_data());
  return out;
}

Array matrix_array(const Matrix& m) {
  return to_array(m.values, {static_cast<py::ssize_t>(m.rows), static_cast<py::ssize_t>(m.cols)});
}

Array coords_array(const CoordArray& c) {
  return to_array(c.values, {static_cast<py::ssize_t>(c.channels), static_cast<py::ssize_t>(c.frames),
                             static_cast<py::ssize_t>(c.joints)});
}

CoordArray array_coords(const Array& a) {
  if (a.ndim() != 3) throw std::invalid_argument("expected a (C, T, V) array");
  CoordArray c(a.shape(0), a.shape(1), a.shape(2));
  std::copy(a.data(), a.data() + a.size(), c.values.begin());
  return c;
}

Array tensor_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  return to_array(std::vector<double>(t.data().begin(), t.data().end()), shape);
}

EvalProtocol protocol_from(const std::optional<std::string>& config_json) {
  if (!config_json) return EvalProtocol{};
  return experiment_config_from_json(*config_json).protocol;
}

py::dict table_dict(const AccuracyTable& t) {
  py::list rows;
  for (const auto& r : t.rows) {
    py::dict row;
    row["condition"] = std::string(to_string(r.condition));
    row["probe_view"] = r.probe_view;
    row["accuracy"] = r.accuracy;
    row["gallery_views_used"] = r.gallery_views_used;
    py::list cells;
    for (const auto& c : r.cells) cells.append(c.accuracy);
    row["cells"] = cells;
    rows.append(row);
  }
  py::dict means;
  for (const auto& m : t.means) means[py::str(std::string(to_string(m.condition)))] = m.mean;
  py::dict out;
  out["views"] = t.views;
  out["rows"] = rows;
  out["means"] = means;
  out["report"] = format_accuracy_report(t);
  return out;
}

}  // namespace

PYBIND11_MODULE(_gaitgcn, m) {
  m.doc() = "Skeleton gait recognition with spatio-temporal graph convolutions";

  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<TrainingDivergedError>(m, "TrainingDivergedError", PyExc_RuntimeError);

  // Sequences -------------------------------------------------------------
  py::class_<SkeletonSequence>(m, "Sequence")
      .def(py::init([](std::string subject_id, std::string condition, int seq_index, int view_deg,
                       const Array& coords) {
             SkeletonSequence s;
             s.subject_id = std::move(subject_id);
             s.condition = parse_condition(condition);
             s.seq_index = seq_index;
             s.view_deg = view_deg;
             s.coords = array_coords(coords);
             return s;
           }),
           py::arg("subject_id"), py::arg("condition"), py::arg("seq_index"), py::arg("view_deg"),
           py::arg("coords"))
      .def_readwrite("subject_id", &SkeletonSequence::subject_id)
      .def_property("condition", [](const SkeletonSequence& s) { return std::string(to_string(s.condition)); },
                    [](SkeletonSequence& s, const std::string& c) { s.condition = parse_condition(c); })
      .def_readwrite("seq_index", &SkeletonSequence::seq_index)
      .def_readwrite("view_deg", &SkeletonSequence::view_deg)
      .def_property("coords", [](const SkeletonSequence& s) { return coords_array(s.coords); },
                    [](SkeletonSequence& s, const Array& a) { s.coords = array_coords(a); })
      .def_property_readonly("frames", &SkeletonSequence::frames)
      .def("__repr__", [](const SkeletonSequence& s) {
        return "<Sequence " + s.subject_id + " " + std::string(to_string(s.condition)) + "-" +
               std::to_string(s.seq_index) + " view " + std::to_string(s.view_deg) + " frames " +
               std::to_string(s.frames()) + ">";
      });

  m.def("generate_synthetic",
        [](std::size_t subjects, std::size_t seqs, std::vector<int> views, std::size_t frames,
           std::uint64_t seed, double noise) {
          SyntheticOptions o;
          o.n_subjects = subjects;
          o.seqs_per_subject = seqs;
          o.views = std::move(views);
          o.frames = frames;
          o.seed = seed;
          o.noise = noise;
          return generate_synthetic_dataset(o);
        },
        py::arg("subjects") = 8, py::arg("seqs") = 4, py::arg("views") = std::vector<int>{0, 90},
        py::arg("frames") = 120, py::arg("seed") = 0, py::arg("noise") = 0.003);
  m.def("load_sequence", &load_sequence, py::arg("path"));
  m.def("save_sequence", &save_sequence, py::arg("sequence"), py::arg("path"));
  m.def("normalize_coords",
        [](const SkeletonSequence& s) {
          Diagnostics d;
          auto out = normalize_coords(s, &d);
          return py::make_tuple(out, d.warnings);
        },
        py::arg("sequence"), "Returns (normalized sequence, warnings).");
  m.def("resample_to_length", &resample_to_length, py::arg("sequence"), py::arg("frames"));
  m.def("select_joints", [](const Array& a) { return coords_array(select_joints(array_coords(a))); });
  m.def("derive_bone", [](const Array& a) {
    return coords_array(derive_bone(array_coords(a), SkeletonTopology::gait15()));
  });
  m.def("derive_motion", [](const Array& a) { return coords_array(derive_motion(array_coords(a))); });
  m.attr("JOINT_NAMES") = [] {
    std::vector<std::string> names;
    for (auto n : kJointNames) names.emplace_back(n);
    return names;
  }();

  // Graphs ----------------------------------------------------------------
  m.def("natural_adjacency", [] { return matrix_array(build_natural_adjacency(SkeletonTopology::gait15()).values); });
  m.def("k_adjacency", [](int k) {
    return matrix_array(build_k_adjacency(SkeletonTopology::gait15(), k).values);
  }, py::arg("k"));
  m.def("full_adjacency", [](std::size_t V) { return matrix_array(build_full_adjacency(V).values); },
        py::arg("V"));
  m.def("hop_distances", [] {
    auto d = hop_distances(SkeletonTopology::gait15());
    std::vector<double> flat;
    for (const auto& row : d)
      for (std::size_t v : row) flat.push_back(static_cast<double>(v));
    return to_array(flat, {static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.size())});
  });
  m.def("normalize_aggregator", [](const Array& A, std::optional<Array> M) {
    if (A.ndim() != 2 || A.shape(0) != A.shape(1)) throw std::invalid_argument("A must be square");
    const std::size_t n = A.shape(0);
    AdjacencyMatrix adj;
    adj.values = Matrix(n, n);
    std::copy(A.data(), A.data() + A.size(), adj.values.values.begin());
    Matrix corr(n, n);
    if (M) {
      if (M->ndim() != 2 || M->shape(0) != A.shape(0) || M->shape(1) != A.shape(1))
        throw std::invalid_argument("M must match A");
      std::copy(M->data(), M->data() + M->size(), corr.values.begin());
    }
    return matrix_array(normalize_aggregator(adj, corr).values);
  }, py::arg("A"), py::arg("M") = py::none());

  // Configs and models ----------------------------------------------------
  m.def("default_config_json", [] { return experiment_config_to_json(ExperimentConfig{}); });
  m.def("resolve_config", [](std::optional<std::string> json, std::vector<std::string> overrides) {
    ExperimentConfig c = json ? experiment_config_from_json(*json) : ExperimentConfig{};
    for (const auto& o : overrides) apply_override(c, o);
    return experiment_config_to_json(c);
  }, py::arg("config_json") = py::none(), py::arg("overrides") = std::vector<std::string>{});

  py::class_<MultiStreamModel>(m, "Model")
      .def(py::init([](std::optional<std::string> config_json, std::uint64_t seed) {
             ModelConfig mc = config_json ? experiment_config_from_json(*config_json).model : ModelConfig{};
             return MultiStreamModel(mc, seed);
           }),
           py::arg("config_json") = py::none(), py::arg("seed") = 0)
      .def_property_readonly("embedding_dim", &MultiStreamModel::embedding_dim)
      .def_property_readonly("config_json", [](const MultiStreamModel& mdl) { return model_config_to_json(mdl.config()); })
      .def("embed", [](const MultiStreamModel& mdl, const std::vector<SkeletonSequence>& seqs) {
        auto records = extract_embeddings(mdl, seqs);
        std::vector<double> flat;
        for (const auto& r : records) flat.insert(flat.end(), r.vector.begin(), r.vector.end());
        return to_array(flat, {static_cast<py::ssize_t>(records.size()),
                               static_cast<py::ssize_t>(mdl.embedding_dim())});
      }, py::arg("sequences"))
      .def("embeddings", &extract_embeddings, py::arg("sequences"), py::arg("batch_size") = 32)
      .def("stream_forward", [](const MultiStreamModel& mdl, std::size_t stream, const Array& x) {
        std::vector<double> v(x.data(), x.data() + x.size());
        Tensor t(Shape(x.shape(), x.shape() + x.ndim()), std::move(v));
        NoGradGuard g;
        StreamOutput out = mdl.stream(stream).forward(t, false);
        py::list blocks;
        for (const auto& b : out.block_outputs) blocks.append(tensor_array(b));
        return py::make_tuple(tensor_array(out.embedding), tensor_array(out.logits), blocks);
      }, py::arg("stream"), py::arg("x"), "Returns (embedding, logits, block outputs).")
      .def("train", [](MultiStreamModel& mdl, const std::vector<SkeletonSequence>& seqs,
                       std::optional<std::string> config_json, std::vector<std::string> streams) {
        TrainConfig tc = config_json ? experiment_config_from_json(*config_json).train : TrainConfig{};
        TrainOptions o;
        for (const auto& s : streams) {
          StreamKind kind = parse_stream_kind(s);
          for (std::size_t i = 0; i < mdl.config().streams.size(); ++i)
            if (mdl.config().streams[i].kind == kind) o.streams.push_back(i);
        }
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(mdl, seqs, tc, o);
        }
        py::list log;
        for (const auto& e : r.log) {
          py::dict d;
          d["stream"] = e.stream;
          d["epoch"] = e.epoch;
          d["lr"] = e.lr;
          d["loss"] = e.loss;
          d["acc"] = e.acc;
          log.append(d);
        }
        return log;
      }, py::arg("sequences"), py::arg("config_json") = py::none(),
         py::arg("streams") = std::vector<std::string>{})
      .def("save", [](const MultiStreamModel& mdl, const std::filesystem::path& p) { save_checkpoint(mdl, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); });

  // Embeddings and evaluation ---------------------------------------------
  py::class_<EmbeddingRecord>(m, "EmbeddingRecord")
      .def(py::init([](std::string subject_id, std::string condition, int seq_index, int view_deg,
                       std::string source, std::vector<double> vector) {
             return EmbeddingRecord{std::move(subject_id), parse_condition(condition), seq_index, view_deg,
                                    parse_embedding_source(source), std::move(vector)};
           }),
           py::arg("subject_id"), py::arg("condition"), py::arg("seq_index"), py::arg("view_deg"),
           py::arg("source") = "model", py::arg("vector"))
      .def_readwrite("subject_id", &EmbeddingRecord::subject_id)
      .def_property_readonly("condition", [](const EmbeddingRecord& r) { return std::string(to_string(r.condition)); })
      .def_readwrite("seq_index", &EmbeddingRecord::seq_index)
      .def_readwrite("view_deg", &EmbeddingRecord::view_deg)
      .def_property_readonly("source", [](const EmbeddingRecord& r) { return std::string(to_string(r.source)); })
      .def_readwrite("vector", &EmbeddingRecord::vector)
      .def(py::self == py::self);

  m.def("fuse_two_branch", &fuse_two_branch, py::arg("f_m"), py::arg("f_a"), py::arg("lam"));
  m.def("read_embeddings", &read_embeddings, py::arg("path"));
  m.def("write_embeddings", &write_embeddings, py::arg("path"), py::arg("records"));
  m.def("evaluate_rank1", [](const std::vector<EmbeddingRecord>& gallery, const std::vector<EmbeddingRecord>& probe,
                             std::optional<std::string> config_json) {
    Diagnostics d;
    auto table = evaluate_rank1(gallery, probe, protocol_from(config_json), &d);
    py::dict out = table_dict(table);
    out["warnings"] = d.warnings;
    return out;
  }, py::arg("gallery"), py::arg("probe"), py::arg("config_json") = py::none());
  m.def("split_by_protocol", [](const std::vector<EmbeddingRecord>& records, std::optional<std::string> config_json) {
    return split_by_protocol(records, protocol_from(config_json));
  }, py::arg("records"), py::arg("config_json") = py::none());
  m.def("lambda_sweep", [](const std::vector<EmbeddingRecord>& f_m, const std::vector<EmbeddingRecord>& f_a,
                           std::vector<double> lambdas, std::optional<std::string> config_json) {
    EvalProtocol p = protocol_from(config_json);
    return format_lambda_report(lambda_sweep(f_m, f_a, lambdas, p), p);
  }, py::arg("f_m"), py::arg("f_a"), py::arg("lambdas"), py::arg("config_json") = py::none(),
     "Returns the CSV report.");

  // Verification ----------------------------------------------------------
  m.def("gradcheck", [](std::vector<std::uint64_t> seeds) {
    GradcheckSuiteOptions o;
    o.seeds = std::move(seeds);
    py::dict out;
    for (const auto& c : run_gradcheck_suite(o)) out[py::str(c.name)] = c.max_rel_error;
    return out;
  }, py::arg("seeds") = std::vector<std::uint64_t>{1});
  m.def("selftest", [](std::uint64_t seed) {
    py::dict out;
    for (const auto& r : run_selftest(seed)) out[py::str(r.name)] = r.pass;
    return out;
  }, py::arg("seed") = 0);

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "gaitgcn");
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs a command line; returns (exit code, stdout, stderr).");
}
