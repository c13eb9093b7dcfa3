#include "routeseq/astar.hpp"

#include "routeseq/errors.hpp"
#include "routeseq/ndmath.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <queue>
#include <sstream>

namespace routeseq {

namespace {

struct FrontierEntry {
  double f;
  NodeId node;
  // std::priority_queue is a max-heap; invert to pop the smallest (f, id).
  bool operator<(const FrontierEntry& other) const {
    if (f != other.f) return f > other.f;
    return node > other.node;
  }
};

std::string shortest_repr(double x) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, end);
}

}  // namespace

std::optional<RoutePath> astar_search(const Graph& g, NodeId src, NodeId dst, double heuristic_scale) {
  if (!g.valid(src) || !g.valid(dst)) {
    throw DomainError("astar_search: invalid node id " + std::to_string(g.valid(src) ? dst : src));
  }
  if (src == dst) return RoutePath{{src}, 0.0};

  const std::size_t n = g.node_count();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<NodeId> parent(n, -1);
  std::vector<char> closed(n, 0);
  auto h = [&](NodeId u) { return heuristic_scale == 0.0 ? 0.0 : heuristic_scale * g.euclid(u, dst); };

  std::priority_queue<FrontierEntry> frontier;
  dist[src] = 0.0;
  frontier.push({h(src), src});
  while (!frontier.empty()) {
    const NodeId u = frontier.top().node;
    frontier.pop();
    if (closed[u]) continue;
    closed[u] = 1;
    if (u == dst) break;
    for (const auto& [v, w] : g.neighbors(u)) {
      if (closed[v]) continue;
      const double candidate = dist[u] + w;
      if (candidate < dist[v]) {
        dist[v] = candidate;
        parent[v] = u;
        frontier.push({candidate + h(v), v});
      }
    }
  }
  if (!closed[dst]) return std::nullopt;

  RoutePath path;
  for (NodeId u = dst; u != -1; u = parent[u]) path.nodes.push_back(u);
  std::reverse(path.nodes.begin(), path.nodes.end());
  path.cost = *path_cost(g, path.nodes);
  return path;
}

std::optional<double> path_cost(const Graph& g, std::span<const NodeId> nodes) {
  if (nodes.empty() || !g.valid(nodes.front())) return std::nullopt;
  double total = 0.0;
  for (std::size_t k = 1; k < nodes.size(); ++k) {
    const auto w = g.weight(nodes[k - 1], nodes[k]);
    if (!w) return std::nullopt;
    total += *w;
  }
  return total;
}

// ---------------------------------------------------------------------------

RouteDataset generate_dataset(const Graph& g, std::size_t n_routes, double split_fraction,
                              std::uint64_t seed) {
  if (g.node_count() < 2) throw DomainError("generate_dataset: graph needs at least 2 nodes");
  if (n_routes < 1) throw DomainError("generate_dataset: n_routes must be >= 1");
  if (!(split_fraction >= 0.0 && split_fraction <= 1.0)) {
    throw DomainError("generate_dataset: split fraction must lie in [0, 1]");
  }

  Rng rng(seed);
  const auto n = static_cast<std::uint64_t>(g.node_count());
  const std::size_t budget = 100 * n_routes;
  std::vector<RoutePath> corpus;
  corpus.reserve(n_routes);
  std::size_t draws = 0;
  while (corpus.size() < n_routes) {
    if (draws++ == budget) {
      throw GenerationError("generate_dataset: accepted " + std::to_string(corpus.size()) + " of " +
                            std::to_string(n_routes) + " routes within " + std::to_string(budget) +
                            " draws; graph too fragmented");
    }
    const auto src = static_cast<NodeId>(rng.below(n));
    auto dst = static_cast<NodeId>(rng.below(n - 1));
    if (dst >= src) ++dst;
    auto path = astar_search(g, src, dst, 1.0);
    if (!path || path->hops() < 2) continue;
    corpus.push_back(std::move(*path));
  }

  std::vector<std::size_t> order(n_routes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(std::span<std::size_t>(order), rng);
  // The epsilon keeps 0.67 * 3000 at 2010 despite binary rounding.
  const auto n_train = std::min<std::size_t>(
      n_routes, static_cast<std::size_t>(std::ceil(split_fraction * static_cast<double>(n_routes) - 1e-9)));
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  RouteDataset ds;
  ds.seed = seed;
  ds.split_fraction = split_fraction;
  for (std::size_t k = 0; k < n_routes; ++k) {
    (k < n_train ? ds.train : ds.test).push_back(corpus[order[k]]);
  }
  return ds;
}

std::map<std::size_t, std::size_t> hop_histogram(const RouteDataset& ds) {
  std::map<std::size_t, std::size_t> hist;
  for (const auto* split : {&ds.train, &ds.test}) {
    for (const auto& r : *split) ++hist[r.hops()];
  }
  return hist;
}

double mean_hops(std::span<const RoutePath> routes) {
  if (routes.empty()) return 0.0;
  double total = 0.0;
  for (const auto& r : routes) total += static_cast<double>(r.hops());
  return total / static_cast<double>(routes.size());
}

// ---------------------------------------------------------------------------

void write_dataset(std::ostream& out, const RouteDataset& ds) {
  out << "# seed=" << ds.seed << " split=" << shortest_repr(ds.split_fraction) << " n=" << ds.size()
      << '\n';
  out << std::setprecision(17);
  auto emit = [&](const char* tag, const std::vector<RoutePath>& routes) {
    for (const auto& r : routes) {
      out << tag << ' ' << r.cost;
      for (NodeId u : r.nodes) out << ' ' << u;
      out << '\n';
    }
  };
  emit("TRAIN", ds.train);
  emit("TEST", ds.test);
}

RouteDataset read_dataset(std::istream& in) {
  RouteDataset ds;
  std::string line;
  std::size_t lineno = 0;
  long declared = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line[0] == '#') {
      std::istringstream header(line.substr(1));
      std::string field;
      while (header >> field) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) throw ParseError(lineno, "malformed header field `" + field + "`");
        const auto key = field.substr(0, eq);
        const auto value = field.substr(eq + 1);
        try {
          if (key == "seed") ds.seed = std::stoull(value);
          else if (key == "split") ds.split_fraction = std::stod(value);
          else if (key == "n") declared = std::stol(value);
        } catch (const std::exception&) {
          throw ParseError(lineno, "bad value for `" + key + "`");
        }
      }
      continue;
    }
    std::istringstream row(line);
    std::string tag;
    RoutePath r;
    if (!(row >> tag >> r.cost)) throw ParseError(lineno, "expected `TRAIN|TEST <cost> <ids...>`");
    if (tag != "TRAIN" && tag != "TEST") throw ParseError(lineno, "unknown split tag `" + tag + "`");
    NodeId u;
    while (row >> u) r.nodes.push_back(u);
    if (!row.eof()) throw ParseError(lineno, "non-integer node id");
    if (r.nodes.empty()) throw ParseError(lineno, "route has no nodes");
    (tag == "TRAIN" ? ds.train : ds.test).push_back(std::move(r));
  }
  if (declared >= 0 && static_cast<std::size_t>(declared) != ds.size()) {
    throw ParseError(lineno, "header declares n=" + std::to_string(declared) + " but file holds " +
                                 std::to_string(ds.size()) + " routes");
  }
  return ds;
}

void save_dataset(const std::string& path, const RouteDataset& ds) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(out, ds);
}

RouteDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_dataset(in);
}

void write_histogram_csv(std::ostream& out, const std::map<std::size_t, std::size_t>& hist) {
  out << "hops,count\n";
  for (auto [hops, count] : hist) out << hops << ',' << count << '\n';
}

}  // namespace routeseq
