#include "routeseq/graph.hpp"

#include "routeseq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace routeseq {

Graph::Graph(std::vector<GeoNode> nodes, std::span<const std::pair<NodeId, NodeId>> edges)
    : nodes_(std::move(nodes)) {
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const auto& n = nodes_[k];
    if (n.id != static_cast<NodeId>(k)) throw StructuralError("node ids must be dense and ordered");
    if (!std::isfinite(n.lon) || !std::isfinite(n.lat)) {
      throw StructuralError("node " + std::to_string(k) + " has non-finite coordinates");
    }
  }

  edges_.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (!valid(u) || !valid(v)) {
      throw StructuralError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") references a node outside 0.." +
                            std::to_string(static_cast<long>(nodes_.size()) - 1));
    }
    if (u == v) {
      ++self_loops_dropped_;
      continue;
    }
    edges_.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(edges_.begin(), edges_.end());
  const auto last = std::unique(edges_.begin(), edges_.end());
  duplicates_merged_ = static_cast<std::size_t>(edges_.end() - last);
  edges_.erase(last, edges_.end());

  // Coordinates in the source are rounded, so distinct intersections can
  // coincide. A zero-length segment carries no routing information.
  std::erase_if(edges_, [&](const std::pair<NodeId, NodeId>& e) {
    if (euclid(e.first, e.second) > 0.0) return false;
    ++zero_length_dropped_;
    return true;
  });

  adjacency_.assign(nodes_.size(), {});
  for (auto [u, v] : edges_) {
    const double w = euclid(u, v);
    adjacency_[u].push_back({v, w});
    adjacency_[v].push_back({u, w});
  }
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const Neighbor& a, const Neighbor& b) { return a.node < b.node; });
  }
}

const GeoNode& Graph::node(NodeId u) const {
  if (!valid(u)) throw DomainError("invalid node id " + std::to_string(u));
  return nodes_[u];
}

std::span<const Neighbor> Graph::neighbors(NodeId u) const {
  if (!valid(u)) throw DomainError("invalid node id " + std::to_string(u));
  return adjacency_[u];
}

std::optional<double> Graph::weight(NodeId u, NodeId v) const {
  if (!valid(u) || !valid(v)) return std::nullopt;
  const auto& adj = adjacency_[u];
  auto it = std::lower_bound(adj.begin(), adj.end(), v,
                             [](const Neighbor& n, NodeId id) { return n.node < id; });
  if (it == adj.end() || it->node != v) return std::nullopt;
  return it->weight;
}

double Graph::euclid(NodeId u, NodeId v) const {
  const auto& a = node(u);
  const auto& b = node(v);
  return std::hypot(a.lon - b.lon, a.lat - b.lat);
}

std::vector<Neighbor> neighbors(const Graph& g, NodeId u) {
  auto adj = g.neighbors(u);
  return {adj.begin(), adj.end()};
}

// ---------------------------------------------------------------------------

namespace {

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::vector<GeoNode> read_coords(std::istream& in) {
  std::vector<GeoNode> nodes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    std::istringstream row(line);
    double lon, lat;
    std::string extra;
    if (!(row >> lon >> lat) || (row >> extra)) throw ParseError(lineno, "expected `lon lat`");
    if (!std::isfinite(lon) || !std::isfinite(lat)) throw ParseError(lineno, "non-finite coordinate");
    nodes.push_back({static_cast<NodeId>(nodes.size()), lon, lat});
  }
  return nodes;
}

struct MatrixMarketPattern {
  long rows = 0;
  long cols = 0;
  std::vector<std::pair<NodeId, NodeId>> entries;  // 0-based
};

MatrixMarketPattern read_matrix_market(std::istream& in) {
  MatrixMarketPattern mm;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw ParseError(1, "missing %%MatrixMarket header");
  }
  ++lineno;
  if (line.find("coordinate") == std::string::npos) {
    throw ParseError(1, "only coordinate MatrixMarket files are supported");
  }

  long nnz = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line) || line[0] == '%') continue;
    std::istringstream row(line);
    if (nnz < 0) {
      if (!(row >> mm.rows >> mm.cols >> nnz) || mm.rows < 0 || mm.cols < 0 || nnz < 0) {
        throw ParseError(lineno, "expected size line `M N NNZ`");
      }
      mm.entries.reserve(static_cast<std::size_t>(nnz));
      continue;
    }
    long i, j;
    if (!(row >> i >> j)) throw ParseError(lineno, "expected `i j` entry");
    if (i < 1 || j < 1) throw ParseError(lineno, "indices are 1-based");
    if (i > mm.rows || j > mm.cols) {
      throw StructuralError("line " + std::to_string(lineno) + ": entry (" + std::to_string(i) +
                            ", " + std::to_string(j) + ") outside " + std::to_string(mm.rows) + "x" +
                            std::to_string(mm.cols));
    }
    if (static_cast<long>(mm.entries.size()) == nnz) throw ParseError(lineno, "more entries than NNZ");
    mm.entries.emplace_back(static_cast<NodeId>(i - 1), static_cast<NodeId>(j - 1));
  }
  if (nnz < 0) throw ParseError(lineno, "missing size line");
  if (static_cast<long>(mm.entries.size()) != nnz) {
    throw ParseError(lineno, "expected " + std::to_string(nnz) + " entries, found " +
                                 std::to_string(mm.entries.size()));
  }
  return mm;
}

}  // namespace

Graph load_graph(std::istream& edges, std::istream& coords) {
  auto mm = read_matrix_market(edges);
  auto nodes = read_coords(coords);
  if (mm.rows != mm.cols) throw StructuralError("adjacency matrix is not square");
  if (static_cast<std::size_t>(mm.rows) != nodes.size()) {
    throw StructuralError("adjacency has " + std::to_string(mm.rows) + " nodes but coordinates list " +
                          std::to_string(nodes.size()));
  }
  return Graph(std::move(nodes), mm.entries);
}

Graph load_graph_files(const std::string& edges_path, const std::string& coords_path) {
  std::ifstream edges(edges_path);
  if (!edges) throw std::runtime_error("cannot open " + edges_path);
  std::ifstream coords(coords_path);
  if (!coords) throw std::runtime_error("cannot open " + coords_path);
  return load_graph(edges, coords);
}

// ---------------------------------------------------------------------------

Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> keep) {
  Subgraph sub;
  sub.old_to_new.assign(g.node_count(), -1);
  for (NodeId u : keep) {
    if (!g.valid(u)) throw DomainError("invalid node id " + std::to_string(u));
    if (sub.old_to_new[u] != -1) throw DomainError("duplicate node id " + std::to_string(u));
    sub.old_to_new[u] = 0;
  }
  std::vector<GeoNode> nodes;
  for (NodeId u = 0; u < static_cast<NodeId>(g.node_count()); ++u) {
    if (sub.old_to_new[u] == -1) continue;
    const NodeId fresh = static_cast<NodeId>(nodes.size());
    sub.old_to_new[u] = fresh;
    sub.new_to_old.push_back(u);
    nodes.push_back({fresh, g.node(u).lon, g.node(u).lat});
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (auto [u, v] : g.edges()) {
    if (sub.old_to_new[u] >= 0 && sub.old_to_new[v] >= 0) {
      edges.emplace_back(sub.old_to_new[u], sub.old_to_new[v]);
    }
  }
  sub.graph = Graph(std::move(nodes), edges);
  return sub;
}

Subgraph filter_bbox(const Graph& g, const BoundingBox& box, BoxMode mode) {
  if (!(box.lon_min < box.lon_max) || !(box.lat_min < box.lat_max)) {
    throw DomainError("bounding box must satisfy lon_min < lon_max and lat_min < lat_max");
  }
  auto inside = [&](double lo, double x, double hi) {
    return mode == BoxMode::Closed ? (lo <= x && x <= hi) : (lo < x && x < hi);
  };
  std::vector<NodeId> keep;
  for (const auto& n : g.nodes()) {
    if (inside(box.lon_min, n.lon, box.lon_max) && inside(box.lat_min, n.lat, box.lat_max)) {
      keep.push_back(n.id);
    }
  }
  if (keep.empty()) throw EmptyGraphError("bounding box contains no nodes");
  return induced_subgraph(g, keep);
}

// ---------------------------------------------------------------------------

void write_graph(std::ostream& out, const Graph& g) {
  out << g.node_count() << ' ' << g.edge_count() << '\n';
  out << std::setprecision(17);
  for (const auto& n : g.nodes()) out << n.id << ' ' << n.lon << ' ' << n.lat << '\n';
  for (auto [u, v] : g.edges()) out << u << ' ' << v << ' ' << *g.weight(u, v) << '\n';
}

Graph read_graph(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      ++lineno;
      if (!blank(line)) return std::istringstream(line);
    }
    throw ParseError(lineno + 1, "unexpected end of graph file");
  };

  std::size_t n_nodes = 0, n_edges = 0;
  if (!(next_line() >> n_nodes >> n_edges)) throw ParseError(lineno, "expected `num_nodes num_edges`");
  std::vector<GeoNode> nodes;
  nodes.reserve(n_nodes);
  for (std::size_t k = 0; k < n_nodes; ++k) {
    GeoNode n;
    if (!(next_line() >> n.id >> n.lon >> n.lat)) throw ParseError(lineno, "expected `id lon lat`");
    if (n.id != static_cast<NodeId>(k)) throw ParseError(lineno, "node ids must be 0..n-1 in order");
    nodes.push_back(n);
  }
  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(n_edges);
  for (std::size_t k = 0; k < n_edges; ++k) {
    NodeId u, v;
    double w;
    if (!(next_line() >> u >> v >> w)) throw ParseError(lineno, "expected `u v weight`");
    edges.emplace_back(u, v);
  }
  return Graph(std::move(nodes), edges);
}

void save_graph(const std::string& path, const Graph& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_graph(out, g);
}

Graph load_saved_graph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_graph(in);
}

}  // namespace routeseq
