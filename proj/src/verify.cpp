#include "gaitgcn/verify.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "gaitgcn/gradcheck.hpp"
#include "gaitgcn/graph.hpp"
#include "gaitgcn/layers.hpp"
#include "gaitgcn/model.hpp"
#include "gaitgcn/ops.hpp"

namespace gaitgcn {

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = uniform(rng, lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

void randomize(Tensor t, Rng& rng, double scale) {
  for (double& v : t.mutable_data()) v = uniform(rng, -scale, scale);
}

std::vector<Tensor> trainable(const TensorList& list) {
  std::vector<Tensor> out;
  for (const auto& nt : list)
    if (nt.trainable) out.push_back(nt.tensor);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Weighted sum against a fixed random tensor, so that batchnorm outputs do
// not collapse to a constant loss.
Tensor projection_loss(const Tensor& out, const Tensor& weights) {
  return sum(multiply(out, weights));
}

struct LayerCase {
  std::function<Tensor()> loss;
  std::vector<Tensor> wrt;
  std::size_t coords_per_tensor = 0;
};

LayerCase make_case(const std::string& name, std::uint64_t seed,
                    const GradcheckSuiteOptions& options) {
  Rng rng(seed * 7919 + 17);
  const auto topo = SkeletonTopology::gait15();
  LayerCase c;

  auto layer_case = [&](auto layer_ptr, Shape in_shape, auto run) {
    Tensor x = random_tensor(in_shape, rng, -1.0, 1.0, true);
    Tensor probe = run(*layer_ptr, x.detach());
    Tensor weights = random_tensor(probe.shape(), rng);
    TensorList params;
    layer_ptr->collect("", params);
    c.wrt = trainable(params);
    c.wrt.insert(c.wrt.begin(), x);
    c.loss = [layer_ptr, x, weights, run]() { return projection_loss(run(*layer_ptr, x), weights); };
  };

  if (name == "spatial_gcn_P" || name == "spatial_gcn_F") {
    AdjacencySpec spec = name == "spatial_gcn_P" ? AdjacencySpec{AdjacencySpec::Kind::multiscale, 2}
                                                 : AdjacencySpec{AdjacencySpec::Kind::full, 0};
    auto layer = std::make_shared<SpatialGcn>(spec.build(topo), 3, 4, rng);
    for (std::size_t k = 0; k < layer->scales(); ++k) randomize(layer->correction(k), rng, 0.1);
    layer_case(layer, Shape{2, 3, 4, 15},
               [](const SpatialGcn& l, const Tensor& x) { return l.forward(x, true); });
  } else if (name == "temporal_conv") {
    TemporalConvOptions o;
    o.stride = 2;
    auto layer = std::make_shared<TemporalConv>(4, 6, rng, o);
    layer_case(layer, Shape{2, 4, 8, 5},
               [](const TemporalConv& l, const Tensor& x) { return l.forward(x, true); });
  } else if (name == "temporal_conv_identity") {
    auto layer = std::make_shared<TemporalConv>(6, 6, rng);
    layer_case(layer, Shape{2, 6, 7, 4},
               [](const TemporalConv& l, const Tensor& x) { return l.forward(x, true); });
  } else if (name == "unified_stgc") {
    UnifiedStgcOptions o;
    o.tau = 3;
    o.dilation = 2;
    auto layer = std::make_shared<UnifiedStgc>(build_natural_adjacency(topo), 3, 4, rng, o);
    randomize(layer->correction(), rng, 0.05);
    layer_case(layer, Shape{2, 3, 5, 15},
               [](const UnifiedStgc& l, const Tensor& x) { return l.forward(x, true); });
  } else if (name.rfind("stc_att_", 0) == 0) {
    AttentionMode mode = parse_attention_mode(name.substr(8));
    auto layer = std::make_shared<StcAtt>(8, 4, mode, rng);
    layer_case(layer, Shape{2, 8, 5, 6},
               [](const StcAtt& l, const Tensor& x) { return l.forward(x); });
  } else if (name == "stgc_block_P" || name == "stgc_block_F") {
    StgcBlockConfig bc;
    bc.in_channels = 3;
    bc.out_channels = 8;
    bc.stride = 2;
    bc.adjacency = name == "stgc_block_P" ? AdjacencySpec{AdjacencySpec::Kind::multiscale, 2}
                                          : AdjacencySpec{AdjacencySpec::Kind::full, 0};
    auto layer = std::make_shared<StgcBlock>(bc, topo, rng);
    layer_case(layer, Shape{2, 3, 6, 15},
               [](const StgcBlock& l, const Tensor& x) { return l.forward(x, true); });
  } else if (name == "stream_model") {
    ModelConfig mc;
    mc.channels = {4, 8, 8};
    mc.strides = {1, 2, 2};
    mc.frames = 8;
    mc.num_classes = 3;
    StreamConfig sc{StreamKind::joint, AdjacencySpec{AdjacencySpec::Kind::multiscale, 2},
                    AttentionMode::stc};
    auto model = std::make_shared<StreamModel>(mc, sc, topo, rng);
    Tensor x = random_tensor({3, 2, 8, 15}, rng, 0.0, 1.0, true);
    std::vector<std::size_t> labels{0, 1, 2};
    TensorList params;
    model->collect("", params);
    c.wrt = trainable(params);
    c.wrt.insert(c.wrt.begin(), x);
    c.coords_per_tensor = options.model_coords_per_tensor;
    c.loss = [model, x, labels]() {
      return softmax_cross_entropy(model->forward(x, true).logits, labels);
    };
  } else {
    throw std::invalid_argument("unknown gradcheck case '" + name + "'");
  }
  return c;
}

}  // namespace

std::vector<std::string> gradcheck_case_names() {
  return {"spatial_gcn_P", "spatial_gcn_F", "temporal_conv", "temporal_conv_identity",
          "unified_stgc",  "stc_att_stc",   "stc_att_st",    "stc_att_c",
          "stc_att_none",  "stgc_block_P",  "stgc_block_F",  "stream_model"};
}

GradcheckCase run_gradcheck_case(const std::string& name, std::uint64_t seed,
                                 const GradcheckSuiteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  LayerCase c = make_case(name, seed, options);
  GradCheckOptions o;
  o.epsilon = options.epsilon;
  o.max_coords_per_tensor = c.coords_per_tensor;
  o.seed = seed;
  GradCheckResult r = gradient_check(c.loss, c.wrt, o);
  GradcheckCase out;
  out.name = name;
  out.max_rel_error = r.max_rel_error;
  out.coords = r.coords_checked;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

std::vector<GradcheckCase> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  std::vector<GradcheckCase> out;
  for (const auto& name : gradcheck_case_names()) {
    GradcheckCase total;
    total.name = name;
    for (std::uint64_t seed : options.seeds) {
      GradcheckCase one = run_gradcheck_case(name, seed, options);
      total.max_rel_error = std::max(total.max_rel_error, one.max_rel_error);
      total.coords += one.coords;
      total.seconds += one.seconds;
    }
    out.push_back(total);
  }
  return out;
}

// --- oracles -----------------------------------------------------------------

SkeletonTopology random_tree(std::size_t V, Rng& rng) {
  if (V == 0) throw std::invalid_argument("random_tree: V must be positive");
  std::vector<std::size_t> label(V);
  std::iota(label.begin(), label.end(), 0);
  shuffle(label, rng);
  std::vector<std::size_t> parent(V);
  parent[label[0]] = label[0];
  for (std::size_t i = 1; i < V; ++i) parent[label[i]] = label[uniform_index(rng, i)];
  return SkeletonTopology::from_parents(parent);
}

std::vector<std::vector<std::size_t>> oracle_hop_distances(const std::vector<std::size_t>& parent) {
  const std::size_t n = parent.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (parent[i] != i) {
      adj[i].push_back(parent[i]);
      adj[parent[i]].push_back(i);
    }
  }
  std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, kUnreachable));
  for (std::size_t s = 0; s < n; ++s) {
    std::deque<std::size_t> queue{s};
    dist[s][s] = 0;
    while (!queue.empty()) {
      std::size_t u = queue.front();
      queue.pop_front();
      for (std::size_t w : adj[u]) {
        if (dist[s][w] == kUnreachable) {
          dist[s][w] = dist[s][u] + 1;
          queue.push_back(w);
        }
      }
    }
  }
  return dist;
}

AccuracyTable oracle_rank1(const std::vector<EmbeddingRecord>& gallery,
                           const std::vector<EmbeddingRecord>& probe, const EvalProtocol& protocol) {
  // Full distance matrix first.
  std::vector<std::vector<double>> dist(probe.size(), std::vector<double>(gallery.size()));
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      double d = 0.0;
      for (std::size_t i = 0; i < probe[p].vector.size(); ++i) {
        const double diff = probe[p].vector[i] - gallery[g].vector[i];
        d += diff * diff;
      }
      dist[p][g] = d;
    }
  }

  std::vector<Condition> conditions;
  for (const auto& f : protocol.probes)
    if (std::find(conditions.begin(), conditions.end(), f.condition) == conditions.end())
      conditions.push_back(f.condition);

  AccuracyTable table;
  table.views = protocol.views;
  for (Condition cond : conditions) {
    double cond_sum = 0.0;
    std::size_t cond_n = 0;
    for (int pv : protocol.views) {
      AccuracyRow row;
      row.condition = cond;
      row.probe_view = pv;
      double row_sum = 0.0;
      for (int gv : protocol.views) {
        AccuracyCell cell;
        cell.gallery_view = gv;
        for (std::size_t p = 0; p < probe.size(); ++p) {
          if (probe[p].condition == cond && probe[p].view_deg == pv) ++cell.probes;
        }
        bool any_gallery = false;
        for (const auto& g : gallery) any_gallery = any_gallery || g.view_deg == gv;
        if (gv != pv && cell.probes > 0 && any_gallery) {
          for (std::size_t p = 0; p < probe.size(); ++p) {
            if (probe[p].condition != cond || probe[p].view_deg != pv) continue;
            std::vector<std::size_t> cand;
            for (std::size_t g = 0; g < gallery.size(); ++g)
              if (gallery[g].view_deg == gv) cand.push_back(g);
            std::sort(cand.begin(), cand.end(), [&](std::size_t a, std::size_t b) {
              return std::tie(dist[p][a], gallery[a].subject_id, gallery[a].seq_index) <
                     std::tie(dist[p][b], gallery[b].subject_id, gallery[b].seq_index);
            });
            if (gallery[cand.front()].subject_id == probe[p].subject_id) ++cell.correct;
          }
          cell.accuracy = static_cast<double>(cell.correct) / static_cast<double>(cell.probes);
          row_sum += *cell.accuracy;
          ++row.gallery_views_used;
        }
        row.cells.push_back(cell);
      }
      if (row.gallery_views_used > 0) {
        row.accuracy = row_sum / static_cast<double>(row.gallery_views_used);
        cond_sum += *row.accuracy;
        ++cond_n;
      }
      table.rows.push_back(row);
    }
    ConditionMean m{cond, std::nullopt};
    if (cond_n > 0) m.mean = cond_sum / static_cast<double>(cond_n);
    table.means.push_back(m);
  }
  return table;
}

bool tables_equal(const AccuracyTable& a, const AccuracyTable& b) {
  if (a.views != b.views || a.rows.size() != b.rows.size() || a.means.size() != b.means.size())
    return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& ra = a.rows[i];
    const auto& rb = b.rows[i];
    if (ra.condition != rb.condition || ra.probe_view != rb.probe_view ||
        ra.accuracy != rb.accuracy || ra.gallery_views_used != rb.gallery_views_used ||
        ra.cells.size() != rb.cells.size())
      return false;
    for (std::size_t j = 0; j < ra.cells.size(); ++j) {
      const auto& ca = ra.cells[j];
      const auto& cb = rb.cells[j];
      if (ca.gallery_view != cb.gallery_view || ca.probes != cb.probes ||
          ca.correct != cb.correct || ca.accuracy != cb.accuracy)
        return false;
    }
  }
  for (std::size_t i = 0; i < a.means.size(); ++i) {
    if (a.means[i].condition != b.means[i].condition || a.means[i].mean != b.means[i].mean)
      return false;
  }
  return true;
}

ProtocolInstance random_protocol_instance(Rng& rng) {
  ProtocolInstance inst;
  const std::size_t n_subjects = 2 + uniform_index(rng, 4);  // 2..5
  const std::size_t n_views = 2 + uniform_index(rng, 3);     // 2..4
  const std::size_t dim = 1 + uniform_index(rng, 4);
  inst.protocol.views.resize(n_views);

  auto embedding = [&] {
    std::vector<double> v(dim);
    for (double& x : v) x = static_cast<double>(uniform_index(rng, 4));
    return v;
  };
  for (std::size_t s = 0; s < n_subjects; ++s) {
    char id[16];
    std::snprintf(id, sizeof id, "%03zu", s + 1);
    for (int view : inst.protocol.views) {
      // Occasionally leave a gallery view empty to exercise undefined cells.
      const std::size_t n_gallery = uniform01(rng) < 0.1 ? 0 : 1 + uniform_index(rng, 2);
      for (std::size_t q = 0; q < n_gallery; ++q) {
        inst.gallery.push_back({id, Condition::NM, static_cast<int>(q + 1), view,
                                EmbeddingSource::model, embedding()});
      }
      for (const auto& f : inst.protocol.probes) {
        if (uniform01(rng) < 0.7) {
          inst.probe.push_back({id, f.condition, f.first, view, EmbeddingSource::model, embedding()});
        }
      }
    }
  }
  if (inst.gallery.empty()) {
    inst.gallery.push_back({"001", Condition::NM, 1, inst.protocol.views[0], EmbeddingSource::model,
                            embedding()});
  }
  if (inst.probe.empty()) {
    inst.probe.push_back({"001", Condition::NM, 5, inst.protocol.views[1], EmbeddingSource::model,
                          embedding()});
  }
  return inst;
}

// --- properties --------------------------------------------------------------

PropertyResult check_k_adjacency_oracle(std::uint64_t seed, std::size_t trees) {
  PropertyResult r{"k_adjacency_matches_bfs_oracle", true, ""};
  Rng rng(seed);
  std::size_t matrices = 0;
  for (std::size_t t = 0; t < trees && r.pass; ++t) {
    const std::size_t V = 1 + uniform_index(rng, 15);
    SkeletonTopology topo = random_tree(V, rng);
    auto dist = oracle_hop_distances(topo.parent);
    std::size_t diameter = 0;
    for (const auto& row : dist)
      for (std::size_t d : row) diameter = std::max(diameter, d);
    for (std::size_t k = 0; k <= diameter + 1 && r.pass; ++k) {
      AdjacencyMatrix A = build_k_adjacency(topo, static_cast<int>(k));
      ++matrices;
      for (std::size_t i = 0; i < V; ++i) {
        for (std::size_t j = 0; j < V; ++j) {
          const double expected = (i == j || dist[i][j] == k) ? 1.0 : 0.0;
          if (A.values(i, j) != expected) {
            r.pass = false;
            r.detail = "tree " + std::to_string(t) + " (V=" + std::to_string(V) + "), k=" +
                       std::to_string(k) + ": entry (" + std::to_string(i) + "," +
                       std::to_string(j) + ") differs";
          }
        }
      }
    }
  }
  if (r.pass) r.detail = std::to_string(trees) + " trees, " + std::to_string(matrices) + " matrices";
  return r;
}

PropertyResult check_wrist_ankle_distance() {
  PropertyResult r{"rwrist_lankle_hop_distance_is_7", false, ""};
  auto topo = SkeletonTopology::gait15();
  auto dist = hop_distances(topo);
  const std::size_t w = kRWrist, a = kLAnkle;
  const std::size_t d = dist[w][a];
  AdjacencyMatrix A7 = build_k_adjacency(topo, 7);
  AdjacencyMatrix A6 = build_k_adjacency(topo, 6);
  r.pass = d == 7 && A7.values(w, a) == 1.0 && A6.values(w, a) == 0.0;
  r.detail = "d = " + std::to_string(d);
  return r;
}

PropertyResult check_k_adjacency_partition() {
  PropertyResult r{"k_adjacency_scales_partition_pairs", true, ""};
  auto topo = SkeletonTopology::gait15();
  const std::size_t V = topo.num_joints();
  Matrix total(V, V);
  for (int k = 0; k <= 7; ++k) {
    AdjacencyMatrix A = build_k_adjacency(topo, k);
    for (std::size_t i = 0; i < V * V; ++i) total.values[i] += A.values.values[i];
  }
  for (std::size_t i = 0; i < V; ++i)
    for (std::size_t j = 0; j < V; ++j)
      if (i != j && total(i, j) != 1.0) r.pass = false;
  r.detail = r.pass ? "every off-diagonal pair covered once over k = 0..7" : "a pair is covered twice or never";
  return r;
}

PropertyResult check_full_aggregator_mean(std::uint64_t seed) {
  PropertyResult r{"full_aggregator_is_joint_mean", true, ""};
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t V : {1, 5, 15}) {
    NormalizedAggregator agg = normalize_aggregator(build_full_adjacency(V));
    const std::size_t T = 7, C = 3;
    Tensor x = random_tensor({1, C, T, V}, rng);
    Tensor y = aggregate_joints(x, agg.values.to_tensor());
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t t = 0; t < T; ++t) {
        double m = 0.0;
        for (std::size_t v = 0; v < V; ++v) m += x.data()[(c * T + t) * V + v];
        m /= static_cast<double>(V);
        for (std::size_t v = 0; v < V; ++v)
          worst = std::max(worst, std::abs(y.data()[(c * T + t) * V + v] - m));
      }
    }
  }
  r.pass = worst < 1e-12;
  r.detail = "max abs error " + fmt("%.3g", worst) + " over V in {1,5,15}";
  return r;
}

PropertyResult check_attention_structure(std::uint64_t seed, std::size_t configs) {
  PropertyResult r{"attention_rank1_bounded_contractive", true, ""};
  Rng rng(seed);
  double worst_ratio = 0.0;
  for (std::size_t cfg = 0; cfg < configs && r.pass; ++cfg) {
    const std::size_t reduction = 1 + uniform_index(rng, 4);
    const std::size_t C = reduction * (1 + uniform_index(rng, 4));
    const std::size_t N = 1 + uniform_index(rng, 3);
    const std::size_t T = 2 + uniform_index(rng, 10);
    const std::size_t V = 2 + uniform_index(rng, 14);
    StcAtt att(C, reduction, AttentionMode::stc, rng);
    Tensor x = random_tensor({N, C, T, V}, rng, -2.0, 2.0);
    NoGradGuard guard;
    AttentionMaps m = att.maps(x);
    Tensor y = att.forward(x);

    for (std::size_t s = 0; s < N * C; ++s) {
      Eigen::MatrixXd slice(T, V);
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t v = 0; v < V; ++v) slice(t, v) = m.st.data()[(s * T + t) * V + v];
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(slice);
      const auto& sv = svd.singularValues();
      const double ratio = sv.size() > 1 ? sv(1) / sv(0) : 0.0;
      worst_ratio = std::max(worst_ratio, ratio);
      if (!(ratio < 1e-10)) {
        r.pass = false;
        r.detail = "config " + std::to_string(cfg) + ": sigma2/sigma1 = " + fmt("%.3g", ratio);
      }
    }
    for (const Tensor* map : {&m.channel, &m.st}) {
      for (double a : map->data()) {
        if (!(a > 0.0 && a < 1.0)) {
          r.pass = false;
          r.detail = "config " + std::to_string(cfg) + ": attention entry " + fmt("%.17g", a);
        }
      }
    }
    for (std::size_t i = 0; i < x.numel(); ++i) {
      if (std::abs(y.data()[i]) > std::abs(x.data()[i])) {
        r.pass = false;
        r.detail = "config " + std::to_string(cfg) + ": |output| exceeds |input|";
      }
    }
  }
  if (r.pass) r.detail = std::to_string(configs) + " configurations, worst sigma2/sigma1 = " + fmt("%.3g", worst_ratio);
  return r;
}

PropertyResult check_protocol_oracle(std::uint64_t seed, std::size_t instances) {
  PropertyResult r{"rank1_matches_pairwise_oracle", true, ""};
  Rng rng(seed);
  for (std::size_t i = 0; i < instances && r.pass; ++i) {
    ProtocolInstance inst = random_protocol_instance(rng);
    AccuracyTable got = evaluate_rank1(inst.gallery, inst.probe, inst.protocol);
    AccuracyTable want = oracle_rank1(inst.gallery, inst.probe, inst.protocol);
    if (!tables_equal(got, want)) {
      r.pass = false;
      r.detail = "instance " + std::to_string(i) + " differs";
    }
  }
  if (r.pass) r.detail = std::to_string(instances) + " random instances agree exactly";
  return r;
}

PropertyResult check_ten_gallery_views(std::uint64_t seed) {
  PropertyResult r{"probe_view_averages_ten_gallery_views", true, ""};
  Rng rng(seed);
  EvalProtocol protocol;
  std::vector<EmbeddingRecord> gallery, probe;
  for (int s = 0; s < 3; ++s) {
    std::string id = "00" + std::to_string(s + 1);
    for (int view : protocol.views) {
      for (int q = 1; q <= 4; ++q)
        gallery.push_back({id, Condition::NM, q, view, EmbeddingSource::model,
                           {uniform01(rng), uniform01(rng)}});
      for (const auto& f : protocol.probes)
        probe.push_back({id, f.condition, f.first, view, EmbeddingSource::model,
                         {uniform01(rng), uniform01(rng)}});
    }
  }
  AccuracyTable t = evaluate_rank1(gallery, probe, protocol);
  for (const auto& row : t.rows) {
    if (row.gallery_views_used != 10) {
      r.pass = false;
      r.detail = "probe view " + std::to_string(row.probe_view) + " used " +
                 std::to_string(row.gallery_views_used) + " gallery views";
    }
    for (const auto& cell : row.cells)
      if (cell.gallery_view == row.probe_view && cell.accuracy) r.pass = false;
  }
  if (t.rows.size() != 33) r.pass = false;
  if (r.pass) r.detail = "33 rows, each averaged over 10 gallery views";
  return r;
}

PropertyResult check_rank1_invariances(std::uint64_t seed) {
  PropertyResult r{"rank1_invariant_to_rotation_and_scale", true, ""};
  Rng rng(seed);
  for (int trial = 0; trial < 10 && r.pass; ++trial) {
    ProtocolInstance inst = random_protocol_instance(rng);
    // Continuous embeddings so that the transforms cannot break exact ties.
    for (auto* list : {&inst.gallery, &inst.probe})
      for (auto& rec : *list)
        for (double& v : rec.vector) v += uniform(rng, -0.3, 0.3);
    const std::size_t dim = inst.gallery.front().vector.size();
    Eigen::MatrixXd random = Eigen::MatrixXd::Zero(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) random(i, j) = standard_normal(rng);
    Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(random).householderQ();
    const double factor = uniform(rng, 0.1, 10.0);

    auto transform = [&](std::vector<EmbeddingRecord> list, bool rotate) {
      for (auto& rec : list) {
        Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(rec.vector.data(), static_cast<Eigen::Index>(dim));
        Eigen::VectorXd w = rotate ? Eigen::VectorXd(Q * v) : Eigen::VectorXd(factor * v);
        rec.vector.assign(w.data(), w.data() + dim);
      }
      return list;
    };
    AccuracyTable base = evaluate_rank1(inst.gallery, inst.probe, inst.protocol);
    AccuracyTable rotated = evaluate_rank1(transform(inst.gallery, true), transform(inst.probe, true), inst.protocol);
    AccuracyTable scaled = evaluate_rank1(transform(inst.gallery, false), transform(inst.probe, false), inst.protocol);
    if (!tables_equal(base, rotated) || !tables_equal(base, scaled)) {
      r.pass = false;
      r.detail = "trial " + std::to_string(trial) + " changed accuracy";
    }
  }
  if (r.pass) r.detail = "10 random orthogonal maps and positive scalings";
  return r;
}

PropertyResult check_fusion_small_lambda(std::uint64_t seed, std::size_t instances) {
  PropertyResult r{"fusion_small_lambda_keeps_model_ranking", true, ""};
  Rng rng(seed);
  for (std::size_t inst = 0; inst < instances && r.pass; ++inst) {
    const std::size_t dm = 2 + uniform_index(rng, 8), da = 1 + uniform_index(rng, 8);
    const std::size_t n = 3 + uniform_index(rng, 10);
    std::vector<EmbeddingRecord> fm, fa;
    for (std::size_t i = 0; i < n; ++i) {
      EmbeddingRecord m{std::to_string(i), Condition::NM, 1, 0, EmbeddingSource::model, {}};
      EmbeddingRecord a = m;
      a.source = EmbeddingSource::appearance;
      for (std::size_t k = 0; k < dm; ++k) m.vector.push_back(standard_normal(rng));
      for (std::size_t k = 0; k < da; ++k) a.vector.push_back(standard_normal(rng));
      fm.push_back(m);
      fa.push_back(a);
    }
    std::vector<EmbeddingRecord> fused;
    for (std::size_t i = 0; i < n; ++i) fused.push_back(fuse_two_branch(fm[i], fa[i], 1e-9));

    auto ranking = [&](const std::vector<EmbeddingRecord>& recs, std::size_t q) {
      std::vector<std::pair<double, std::size_t>> d;
      for (std::size_t i = 0; i < recs.size(); ++i) {
        if (i == q) continue;
        double s = 0.0;
        for (std::size_t k = 0; k < recs[i].vector.size(); ++k) {
          const double diff = recs[i].vector[k] - recs[q].vector[k];
          s += diff * diff;
        }
        d.emplace_back(s, i);
      }
      std::sort(d.begin(), d.end());
      std::vector<std::size_t> order;
      for (const auto& [s, i] : d) order.push_back(i);
      return order;
    };
    for (std::size_t q = 0; q < n; ++q) {
      if (ranking(fused, q) != ranking(fm, q)) {
        r.pass = false;
        r.detail = "instance " + std::to_string(inst) + ", query " + std::to_string(q);
      }
    }
  }
  if (r.pass) r.detail = std::to_string(instances) + " instances, full rankings identical at lambda 1e-9";
  return r;
}

PropertyResult check_unified_tau1_matches_spatial(std::uint64_t seed) {
  PropertyResult r{"unified_tau1_equals_spatial", true, ""};
  Rng rng(seed);
  auto topo = SkeletonTopology::gait15();
  AdjacencyMatrix A = build_natural_adjacency(topo);
  SpatialGcn spatial({A}, 3, 5, rng);
  UnifiedStgcOptions o;
  o.tau = 1;
  UnifiedStgc unified(A, 3, 5, rng, o);
  auto copy = [](Tensor dst, const Tensor& src) {
    std::copy(src.data().begin(), src.data().end(), dst.mutable_data().begin());
  };
  copy(unified.weight(), spatial.weight(0));
  randomize(spatial.correction(0), rng, 0.1);
  copy(unified.correction(), spatial.correction(0));
  Tensor x = random_tensor({2, 3, 6, 15}, rng);
  NoGradGuard guard;
  Tensor a = spatial.forward(x, false);
  Tensor b = unified.forward(x, false);
  r.pass = std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
  r.detail = r.pass ? "bit-identical outputs" : "outputs differ";
  return r;
}

PropertyResult check_full_graph_permutation_equivariance(std::uint64_t seed) {
  PropertyResult r{"full_graph_permutation_equivariant", true, ""};
  Rng rng(seed);
  auto topo = SkeletonTopology::gait15();
  const std::size_t V = topo.num_joints(), C = 3, T = 6;
  SpatialGcn spatial({build_full_adjacency(V)}, C, 4, rng);
  TemporalConv temporal(4, 4, rng);
  std::vector<std::size_t> perm(V);
  std::iota(perm.begin(), perm.end(), 0);
  shuffle(perm, rng);
  Tensor x = random_tensor({1, C, T, V}, rng);
  std::vector<double> px(x.numel());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t v = 0; v < V; ++v) px[(c * T + t) * V + v] = x.data()[(c * T + t) * V + perm[v]];
  Tensor xp({1, C, T, V}, px);
  NoGradGuard guard;
  Tensor y = temporal.forward(spatial.forward(x, false), false);
  Tensor yp = temporal.forward(spatial.forward(xp, false), false);
  const std::size_t Co = y.dim(1), To = y.dim(2);
  double worst = 0.0;
  for (std::size_t c = 0; c < Co; ++c)
    for (std::size_t t = 0; t < To; ++t)
      for (std::size_t v = 0; v < V; ++v)
        worst = std::max(worst, std::abs(yp.data()[(c * To + t) * V + v] -
                                         y.data()[(c * To + t) * V + perm[v]]));
  r.pass = worst < 1e-12;
  r.detail = "max abs deviation " + fmt("%.3g", worst);
  return r;
}

std::vector<PropertyResult> run_selftest(std::uint64_t seed) {
  return {check_k_adjacency_oracle(seed),
          check_wrist_ankle_distance(),
          check_k_adjacency_partition(),
          check_full_aggregator_mean(seed),
          check_attention_structure(seed),
          check_protocol_oracle(seed),
          check_ten_gallery_views(seed),
          check_rank1_invariances(seed),
          check_fusion_small_lambda(seed),
          check_unified_tau1_matches_spatial(seed),
          check_full_graph_permutation_equivariance(seed)};
}

}  // namespace gaitgcn
