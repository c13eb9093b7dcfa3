#pragma once

#include "routeseq/astar.hpp"
#include "routeseq/graph.hpp"
#include "routeseq/seq2seq.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace routeseq {

// Shortest routes are also counted as successful.
enum class PathClass { Shortest, Successful, Failed };

std::string to_string(PathClass c);

// Failed unless `predicted` is a valid path between truth's endpoints;
// Shortest when its cost matches truth within 1e-9 * max(1, truth.cost).
PathClass classify(const Graph& g, const std::optional<RoutePath>& predicted, const RoutePath& truth);

struct PairRecord {
  NodeId src;
  NodeId dst;
  PathClass cls;
  std::optional<double> predicted_cost;
  double astar_cost;
  bool exact_sequence;  // predicted node list equals the A* node list
};

struct EvalReport {
  std::size_t n_test = 0;
  double shortest_rate = 0.0;
  double successful_rate = 0.0;
  double exact_sequence_rate = 0.0;
  std::vector<PairRecord> records;
};

// Bidirectional prediction for every test route; `jobs` worker threads share
// the model read-only. Results do not depend on `jobs`.
EvalReport evaluate(const Seq2SeqModel& m, std::span<const RoutePath> test, const Graph& g,
                    std::size_t max_len, unsigned jobs = 1);
EvalReport evaluate(const Seq2SeqModel& m, const RouteDataset& ds, const Graph& g, unsigned jobs = 1);

// Rates recomputed from the records.
EvalReport summarize(std::vector<PairRecord> records);

// CSV `src,dst,class,pred_cost,astar_cost` (pred_cost empty when failed).
void write_report_csv(std::ostream& out, const EvalReport& r);
// CSV `n,shortest_rate,successful_rate` with one data row.
void write_summary_csv(std::ostream& out, const EvalReport& r);

// Number of singular values above rel_tol * sigma_max.
int numerical_rank(const Eigen::MatrixXd& a, double rel_tol);

struct RankReport {
  int rank_gru = 0;
  int rank_lstm = 0;
  int rank_stacked = 0;
  double tol = 0.0;
};

// Rows are per-route dual contexts [gru ; lstm]; the halves and the full
// stack are ranked separately. tol defaults to 1e-10 * max(rows, cols).
RankReport rank_analysis(const Eigen::MatrixXd& contexts, std::optional<double> tol = std::nullopt);

// One context row per route.
Eigen::MatrixXd context_matrix(const Seq2SeqModel& m, std::span<const RoutePath> routes);

// Text `rank_gru rank_lstm rank_stacked tol`.
void write_rank(std::ostream& out, const RankReport& r);

}  // namespace routeseq
