#include "routeseq/eval.hpp"

#include "routeseq/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

namespace routeseq {

std::string to_string(PathClass c) {
  switch (c) {
    case PathClass::Shortest: return "shortest";
    case PathClass::Successful: return "successful";
    case PathClass::Failed: return "failed";
  }
  return "?";
}

PathClass classify(const Graph& g, const std::optional<RoutePath>& predicted, const RoutePath& truth) {
  if (!predicted || predicted->nodes.empty()) return PathClass::Failed;
  const auto& p = predicted->nodes;
  if (p.front() != truth.source() || p.back() != truth.target()) return PathClass::Failed;
  const auto cost = path_cost(g, p);
  if (!cost) return PathClass::Failed;
  if (std::abs(*cost - truth.cost) <= 1e-9 * std::max(1.0, truth.cost)) return PathClass::Shortest;
  return PathClass::Successful;
}

EvalReport summarize(std::vector<PairRecord> records) {
  EvalReport r;
  r.n_test = records.size();
  std::size_t shortest = 0, successful = 0, exact = 0;
  for (const auto& rec : records) {
    if (rec.cls == PathClass::Shortest) ++shortest;
    if (rec.cls != PathClass::Failed) ++successful;
    if (rec.exact_sequence) ++exact;
  }
  if (r.n_test > 0) {
    const double n = static_cast<double>(r.n_test);
    r.shortest_rate = static_cast<double>(shortest) / n;
    r.successful_rate = static_cast<double>(successful) / n;
    r.exact_sequence_rate = static_cast<double>(exact) / n;
  }
  r.records = std::move(records);
  return r;
}

EvalReport evaluate(const Seq2SeqModel& m, std::span<const RoutePath> test, const Graph& g, std::size_t max_len,
                    unsigned jobs) {
  if (test.empty()) throw DomainError("evaluate: empty test split");
  std::vector<PairRecord> records(test.size());
  auto score = [&](std::size_t k) {
    const auto& truth = test[k];
    const auto predicted = bidirectional_predict(m, g, truth.source(), truth.target(), max_len);
    const auto cls = classify(g, predicted, truth);
    records[k] = {truth.source(),
                  truth.target(),
                  cls,
                  cls == PathClass::Failed ? std::nullopt : std::optional<double>(predicted->cost),
                  truth.cost,
                  predicted && predicted->nodes == truth.nodes};
  };

  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(test.size())));
  if (jobs == 1) {
    for (std::size_t k = 0; k < test.size(); ++k) score(k);
    return summarize(std::move(records));
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (unsigned w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      try {
        for (std::size_t k = next++; k < test.size(); k = next++) score(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
  return summarize(std::move(records));
}

EvalReport evaluate(const Seq2SeqModel& m, const RouteDataset& ds, const Graph& g, unsigned jobs) {
  return evaluate(m, ds.test, g, default_max_len(ds.train.empty() ? ds.test : ds.train), jobs);
}

void write_report_csv(std::ostream& out, const EvalReport& r) {
  out << "src,dst,class,pred_cost,astar_cost\n" << std::setprecision(17);
  for (const auto& rec : r.records) {
    out << rec.src << ',' << rec.dst << ',' << to_string(rec.cls) << ',';
    if (rec.predicted_cost) out << *rec.predicted_cost;
    out << ',' << rec.astar_cost << '\n';
  }
}

void write_summary_csv(std::ostream& out, const EvalReport& r) {
  out << "n,shortest_rate,successful_rate\n"
      << std::setprecision(17) << r.n_test << ',' << r.shortest_rate << ',' << r.successful_rate << '\n';
}

// ---------------------------------------------------------------------------

int numerical_rank(const Eigen::MatrixXd& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  const double cutoff = rel_tol * s[0];
  return static_cast<int>((s.array() > cutoff).count());
}

RankReport rank_analysis(const Eigen::MatrixXd& contexts, std::optional<double> tol) {
  if (contexts.rows() < 1) throw DomainError("rank_analysis: need at least one context row");
  if (contexts.cols() < 2 || contexts.cols() % 2 != 0) {
    throw DomainError("rank_analysis: stacked contexts must have an even, nonzero width");
  }
  if (tol && !(*tol > 0.0)) throw DomainError("rank_analysis: tolerance must be positive");
  RankReport r;
  r.tol = tol.value_or(1e-10 * static_cast<double>(std::max(contexts.rows(), contexts.cols())));
  const Eigen::Index half = contexts.cols() / 2;
  r.rank_gru = numerical_rank(contexts.leftCols(half), r.tol);
  r.rank_lstm = numerical_rank(contexts.rightCols(half), r.tol);
  r.rank_stacked = numerical_rank(contexts, r.tol);
  return r;
}

Eigen::MatrixXd context_matrix(const Seq2SeqModel& m, std::span<const RoutePath> routes) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(routes.size()), m.context_dim());
  for (std::size_t k = 0; k < routes.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = encode(m, routes[k].source(), routes[k].target()).w.transpose();
  }
  return out;
}

void write_rank(std::ostream& out, const RankReport& r) {
  out << r.rank_gru << ' ' << r.rank_lstm << ' ' << r.rank_stacked << ' ' << std::setprecision(17) << r.tol
      << '\n';
}

}  // namespace routeseq
