#include "gaitgcn/evaluate.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <tuple>

namespace gaitgcn {

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("evaluate_rank1: embedding dimensions differ (" +
                                std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

std::vector<Condition> probe_conditions(const EvalProtocol& protocol) {
  std::vector<Condition> out;
  for (const auto& f : protocol.probes)
    if (std::find(out.begin(), out.end(), f.condition) == out.end()) out.push_back(f.condition);
  return out;
}

std::optional<double> mean_of_defined(const std::vector<std::optional<double>>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++n;
    }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", 100.0 * *v);
  return buf;
}

}  // namespace

std::optional<double> AccuracyTable::mean_of(Condition c) const {
  for (const auto& m : means)
    if (m.condition == c) return m.mean;
  return std::nullopt;
}

const AccuracyRow* AccuracyTable::row(Condition c, int probe_view) const {
  for (const auto& r : rows)
    if (r.condition == c && r.probe_view == probe_view) return &r;
  return nullptr;
}

std::pair<std::vector<EmbeddingRecord>, std::vector<EmbeddingRecord>> split_by_protocol(
    const std::vector<EmbeddingRecord>& records, const EvalProtocol& protocol) {
  std::vector<EmbeddingRecord> gallery, probe;
  for (const auto& r : records) {
    if (protocol.gallery.matches(r.condition, r.seq_index)) {
      gallery.push_back(r);
      continue;
    }
    for (const auto& f : protocol.probes) {
      if (f.matches(r.condition, r.seq_index)) {
        probe.push_back(r);
        break;
      }
    }
  }
  return {std::move(gallery), std::move(probe)};
}

AccuracyTable evaluate_rank1(const std::vector<EmbeddingRecord>& gallery,
                             const std::vector<EmbeddingRecord>& probe,
                             const EvalProtocol& protocol, Diagnostics* diag) {
  if (gallery.empty()) throw std::invalid_argument("evaluate_rank1: gallery is empty");
  if (probe.empty()) throw std::invalid_argument("evaluate_rank1: probe set is empty");
  auto warn = [&](std::string msg) {
    if (diag) diag->warn(std::move(msg));
  };

  const std::vector<int>& views = protocol.views;
  const std::vector<Condition> conditions = probe_conditions(protocol);
  auto view_slot = [&](int v) -> std::optional<std::size_t> {
    auto it = std::find(views.begin(), views.end(), v);
    if (it == views.end()) return std::nullopt;
    return static_cast<std::size_t>(it - views.begin());
  };

  std::vector<std::vector<const EmbeddingRecord*>> gallery_at(views.size());
  for (const auto& g : gallery) {
    if (auto slot = view_slot(g.view_deg)) gallery_at[*slot].push_back(&g);
    else warn("gallery item of subject " + g.subject_id + " at view " + std::to_string(g.view_deg) +
              " is outside the protocol views and was ignored");
  }

  AccuracyTable table;
  table.views = views;
  for (Condition cond : conditions) {
    std::vector<std::vector<const EmbeddingRecord*>> probes_at(views.size());
    for (const auto& p : probe) {
      if (p.condition != cond) continue;
      if (auto slot = view_slot(p.view_deg)) probes_at[*slot].push_back(&p);
    }

    std::vector<std::optional<double>> row_values;
    for (std::size_t pv = 0; pv < views.size(); ++pv) {
      AccuracyRow row;
      row.condition = cond;
      row.probe_view = views[pv];
      std::vector<std::optional<double>> cell_values;
      for (std::size_t gv = 0; gv < views.size(); ++gv) {
        AccuracyCell cell;
        cell.gallery_view = views[gv];
        cell.probes = probes_at[pv].size();
        if (gv != pv && !probes_at[pv].empty()) {
          if (gallery_at[gv].empty()) {
            warn(std::string(to_string(cond)) + " probe view " + std::to_string(views[pv]) +
                 ": no gallery items at view " + std::to_string(views[gv]) + ", cell excluded");
          } else {
            for (const EmbeddingRecord* p : probes_at[pv]) {
              const EmbeddingRecord* best = nullptr;
              double best_d = 0.0;
              for (const EmbeddingRecord* g : gallery_at[gv]) {
                const double d = squared_distance(p->vector, g->vector);
                if (!best || std::tie(d, g->subject_id, g->seq_index) <
                                 std::tie(best_d, best->subject_id, best->seq_index)) {
                  best = g;
                  best_d = d;
                }
              }
              if (best->subject_id == p->subject_id) ++cell.correct;
            }
            cell.accuracy = static_cast<double>(cell.correct) / static_cast<double>(cell.probes);
            ++row.gallery_views_used;
          }
        }
        cell_values.push_back(cell.accuracy);
        row.cells.push_back(cell);
      }
      row.accuracy = mean_of_defined(cell_values);
      if (probes_at[pv].empty()) {
        warn(std::string(to_string(cond)) + " probe view " + std::to_string(views[pv]) +
             ": no probe items");
      }
      row_values.push_back(row.accuracy);
      table.rows.push_back(std::move(row));
    }
    table.means.push_back({cond, mean_of_defined(row_values)});
  }
  return table;
}

std::string format_accuracy_report(const AccuracyTable& table) {
  std::string out = "condition,probe_view,accuracy,gallery_views";
  for (int v : table.views) out += "," + std::to_string(v);
  out += '\n';
  for (const auto& row : table.rows) {
    out += std::string(to_string(row.condition)) + "," + std::to_string(row.probe_view) + "," +
           percent(row.accuracy) + "," + std::to_string(row.gallery_views_used);
    for (const auto& cell : row.cells) out += "," + percent(cell.accuracy);
    out += '\n';
  }
  for (const auto& m : table.means) {
    out += std::string(to_string(m.condition)) + ",mean," + percent(m.mean) + ",";
    for (std::size_t i = 0; i < table.views.size(); ++i) out += ",";
    out += '\n';
  }
  return out;
}

std::vector<EmbeddingRecord> fuse_records(const std::vector<EmbeddingRecord>& f_m,
                                          const std::vector<EmbeddingRecord>& f_a, double lambda) {
  using Key = std::tuple<std::string, Condition, int, int>;
  auto key = [](const EmbeddingRecord& r) { return Key{r.subject_id, r.condition, r.seq_index, r.view_deg}; };
  auto describe = [](const EmbeddingRecord& r) {
    return r.subject_id + "/" + std::string(to_string(r.condition)) + "-" +
           std::to_string(r.seq_index) + "/" + std::to_string(r.view_deg);
  };

  std::map<Key, const EmbeddingRecord*> appearance;
  for (const auto& a : f_a) {
    if (!appearance.emplace(key(a), &a).second)
      throw std::invalid_argument("fuse: duplicate appearance record " + describe(a));
  }
  if (f_m.size() != f_a.size()) {
    throw std::invalid_argument("fuse: " + std::to_string(f_m.size()) + " model records vs " +
                                std::to_string(f_a.size()) + " appearance records");
  }
  std::vector<EmbeddingRecord> out;
  out.reserve(f_m.size());
  std::map<Key, bool> seen;
  for (const auto& m : f_m) {
    if (!seen.emplace(key(m), true).second)
      throw std::invalid_argument("fuse: duplicate model record " + describe(m));
    auto it = appearance.find(key(m));
    if (it == appearance.end())
      throw std::invalid_argument("fuse: no appearance record for " + describe(m));
    out.push_back(fuse_two_branch(m, *it->second, lambda));
  }
  return out;
}

std::vector<LambdaRow> lambda_sweep(const std::vector<EmbeddingRecord>& f_m,
                                    const std::vector<EmbeddingRecord>& f_a,
                                    const std::vector<double>& lambdas,
                                    const EvalProtocol& protocol, Diagnostics* diag) {
  if (lambdas.empty()) throw std::invalid_argument("lambda_sweep: no lambda values");
  std::vector<LambdaRow> rows;
  for (double lambda : lambdas) {
    auto fused = fuse_records(f_m, f_a, lambda);
    auto [gallery, probe] = split_by_protocol(fused, protocol);
    // Warnings are identical for every lambda; keep only the first pass.
    AccuracyTable table = evaluate_rank1(gallery, probe, protocol, rows.empty() ? diag : nullptr);
    LambdaRow row;
    row.lambda = lambda;
    for (const auto& m : table.means) row.condition_means.push_back(m.mean);
    row.mean = mean_of_defined(row.condition_means);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_lambda_report(const std::vector<LambdaRow>& rows, const EvalProtocol& protocol) {
  std::string out = "lambda";
  for (Condition c : probe_conditions(protocol)) out += "," + std::string(to_string(c));
  out += ",Mean\n";
  char buf[32];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%g", row.lambda);
    out += buf;
    for (const auto& m : row.condition_means) out += "," + percent(m);
    out += "," + percent(row.mean) + "\n";
  }
  return out;
}

}  // namespace gaitgcn
