#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gaitgcn/config.hpp"
#include "gaitgcn/diagnostics.hpp"
#include "gaitgcn/model.hpp"

namespace gaitgcn {

struct AccuracyCell {
  int gallery_view = 0;
  std::size_t probes = 0;
  std::size_t correct = 0;
  std::optional<double> accuracy;  // undefined: identical view, no probes or no gallery
};

struct AccuracyRow {
  Condition condition = Condition::NM;
  int probe_view = 0;
  std::vector<AccuracyCell> cells;  // one per protocol view, in protocol order
  std::optional<double> accuracy;   // mean over defined non-identical cells
  std::size_t gallery_views_used = 0;
};

struct ConditionMean {
  Condition condition = Condition::NM;
  std::optional<double> mean;  // mean over defined probe-view rows
};

struct AccuracyTable {
  std::vector<int> views;
  std::vector<AccuracyRow> rows;     // condition-major, protocol view order
  std::vector<ConditionMean> means;  // protocol probe-set order

  std::optional<double> mean_of(Condition c) const;
  const AccuracyRow* row(Condition c, int probe_view) const;
};

/// Gallery items matching the gallery filter and probe items matching any
/// probe filter, in input order.
std::pair<std::vector<EmbeddingRecord>, std::vector<EmbeddingRecord>> split_by_protocol(
    const std::vector<EmbeddingRecord>& records, const EvalProtocol& protocol);

/// Cross-view rank-1 accuracy. For each probe and each gallery view other
/// than its own, the prediction is the subject of the nearest gallery item
/// at that view under squared Euclidean distance, ties going to the lowest
/// subject id and then the lowest sequence index. Probes are grouped by the
/// condition of the protocol's probe sets. Cells without gallery items are
/// undefined and reported through `diag`.
AccuracyTable evaluate_rank1(const std::vector<EmbeddingRecord>& gallery,
                             const std::vector<EmbeddingRecord>& probe,
                             const EvalProtocol& protocol, Diagnostics* diag = nullptr);

/// CSV: condition,probe_view,accuracy,gallery_views,<one column per view>;
/// accuracies in percent, then one "<condition>,mean,..." row per condition.
std::string format_accuracy_report(const AccuracyTable& table);

/// Pairs each f_m record with the f_a record of the same sequence and fuses them.
std::vector<EmbeddingRecord> fuse_records(const std::vector<EmbeddingRecord>& f_m,
                                          const std::vector<EmbeddingRecord>& f_a, double lambda);

struct LambdaRow {
  double lambda = 0.0;
  std::vector<std::optional<double>> condition_means;  // protocol probe-set order
  std::optional<double> mean;
};

std::vector<LambdaRow> lambda_sweep(const std::vector<EmbeddingRecord>& f_m,
                                    const std::vector<EmbeddingRecord>& f_a,
                                    const std::vector<double>& lambdas,
                                    const EvalProtocol& protocol, Diagnostics* diag = nullptr);

/// CSV: lambda,<conditions...>,Mean with accuracies in percent.
std::string format_lambda_report(const std::vector<LambdaRow>& rows, const EvalProtocol& protocol);

}  // namespace gaitgcn
