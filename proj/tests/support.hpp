#pragma once

// Shared fixtures and independent oracles for the unit and acceptance suites.

#include "routeseq/astar.hpp"
#include "routeseq/graph.hpp"
#include "routeseq/ndmath.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

namespace routeseq::testing {

inline std::string data_path(const std::string& name) { return std::string(ROUTESEQ_DATA_DIR) + "/" + name; }

inline Graph make_graph(std::vector<std::pair<double, double>> coords, std::vector<std::pair<NodeId, NodeId>> edges) {
  std::vector<GeoNode> nodes;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    nodes.push_back({static_cast<NodeId>(k), coords[k].first, coords[k].second});
  }
  return Graph(std::move(nodes), edges);
}

// 0 -- 1
// |    |
// 3 -- 2     unit square, sides only
inline Graph unit_square() {
  return make_graph({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1}, {1, 2}, {2, 3}, {3, 0}});
}

// The bundled 5-node fixture (data/toy5.mtx, data/toy5.xy), built in code:
//   0 (0,0) - 1 (1,0) - 2 (2,0)
//   0 - 3 (0,1) ; 1 - 3
//   4 (5,5) isolated
inline Graph toy5() {
  return make_graph({{0, 0}, {1, 0}, {2, 0}, {0, 1}, {5, 5}}, {{0, 1}, {1, 2}, {0, 3}, {1, 3}});
}

// Six nodes on a 2x3 lattice with one diagonal, connected.
//   3 - 4 - 5
//   |   | / |
//   0 - 1 - 2
inline Graph toy6() {
  return make_graph({{0, 0}, {1, 0}, {2, 0}, {0, 1}, {1, 1}, {2, 1}},
                    {{0, 1}, {1, 2}, {3, 4}, {4, 5}, {0, 3}, {1, 4}, {2, 5}, {1, 5}});
}

// Exhaustive DFS over simple paths; minimum cost or nullopt.
inline std::optional<double> brute_force_shortest(const Graph& g, NodeId src, NodeId dst,
                                                  std::vector<std::vector<NodeId>>* all_optimal = nullptr) {
  std::optional<double> best;
  std::vector<std::vector<NodeId>> paths;
  std::vector<NodeId> stack{src};
  std::vector<char> on_path(g.node_count(), 0);
  on_path[src] = 1;
  std::function<void(NodeId, double)> dfs = [&](NodeId u, double cost) {
    if (u == dst) {
      if (!best || cost < *best - 1e-12) {
        best = cost;
        paths.assign(1, stack);
      } else if (std::abs(cost - *best) <= 1e-12) {
        paths.push_back(stack);
      }
      return;
    }
    for (const auto& nb : g.neighbors(u)) {
      if (on_path[nb.node]) continue;
      on_path[nb.node] = 1;
      stack.push_back(nb.node);
      dfs(nb.node, cost + nb.weight);
      stack.pop_back();
      on_path[nb.node] = 0;
    }
  };
  dfs(src, 0.0);
  if (all_optimal) *all_optimal = paths;
  return best;
}

// Textbook Dijkstra over an explicit distance array; no heuristic, no heap
// tie-breaking beyond what std::priority_queue does.
inline std::vector<double> dijkstra_all(const Graph& g, NodeId src) {
  std::vector<double> dist(g.node_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[src] = 0.0;
  pq.push({0.0, src});
  while (!pq.empty()) {
    auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    for (const auto& nb : g.neighbors(u)) {
      if (d + nb.weight < dist[nb.node]) {
        dist[nb.node] = d + nb.weight;
        pq.push({dist[nb.node], nb.node});
      }
    }
  }
  return dist;
}

// Sum of edge weights looked up by scanning neighbor lists; nullopt when a
// consecutive pair is not adjacent.
inline std::optional<double> brute_force_valid_cost(const Graph& g, const std::vector<NodeId>& nodes) {
  if (nodes.empty()) return std::nullopt;
  double total = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    if (!g.valid(nodes[k - 1]) || !g.valid(nodes[k])) return std::nullopt;
    bool found = false;
    for (const auto& nb : g.neighbors(nodes[k - 1])) {
      if (nb.node == nodes[k]) {
        total += nb.weight;
        found = true;
      }
    }
    if (!found) return std::nullopt;
  }
  return total;
}

// Triple-loop reference for w x.
inline Vector scalar_matvec(const Matrix& w, const Vector& x) {
  Vector out(w.rows());
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < w.cols(); ++j) acc += w(i, j) * x[j];
    out[i] = acc;
  }
  return out;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  fill_uniform({m.data(), static_cast<std::size_t>(m.size())}, scale, rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, double scale, Rng& rng) {
  Vector v(n);
  fill_uniform({v.data(), static_cast<std::size_t>(v.size())}, scale, rng);
  return v;
}

struct BlockError {
  std::string name;
  double worst = 0.0;  // largest per-entry relative error
  double block = 0.0;  // |analytic - numeric| / max(|analytic|, |numeric|, 1e-8), whole block
};

// Central-difference check of every entry of every tensor visited by `visit`.
// `visit(f)` must call f(name, tensor&) on the live parameters that `loss()`
// reads; `analytic(name)` returns the flattened analytic gradient for a block.
template <typename Visit, typename Loss, typename Analytic>
std::vector<BlockError> gradient_check(Visit&& visit, Loss&& loss, Analytic&& analytic, double h = 1e-5) {
  std::vector<BlockError> out;
  visit([&](const std::string& name, auto& t) {
    const std::vector<double> grad = analytic(name);
    BlockError err{name, 0.0, 0.0};
    double diff_sq = 0.0, a_sq = 0.0, fd_sq = 0.0;
    for (Eigen::Index k = 0; k < t.size(); ++k) {
      const double saved = t.data()[k];
      t.data()[k] = saved + h;
      const double up = loss();
      t.data()[k] = saved - h;
      const double down = loss();
      t.data()[k] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double a = grad[static_cast<std::size_t>(k)];
      err.worst = std::max(err.worst, relative_error(a, fd));
      diff_sq += (a - fd) * (a - fd);
      a_sq += a * a;
      fd_sq += fd * fd;
    }
    err.block = std::sqrt(diff_sq) / std::max({std::sqrt(a_sq), std::sqrt(fd_sq), 1e-8});
    out.push_back(err);
  });
  return out;
}

template <typename T>
std::vector<double> flatten(const T& t) {
  return {t.data(), t.data() + t.size()};
}

}  // namespace routeseq::testing
