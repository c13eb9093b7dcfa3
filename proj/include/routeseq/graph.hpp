#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace routeseq {

using NodeId = int;

struct GeoNode {
  NodeId id = 0;
  double lon = 0.0;
  double lat = 0.0;
};

struct Neighbor {
  NodeId node;
  double weight;
};

// Undirected road graph. Nodes are intersections with (lon, lat) coordinates,
// edges are road segments weighted by the Euclidean distance between their
// endpoints in raw degree space. Immutable after construction.
class Graph {
 public:
  Graph() = default;

  // Validates ids, drops self-loops and zero-length edges, and merges
  // duplicates/reversed pairs.
  // Node ids must equal their position in `nodes`.
  Graph(std::vector<GeoNode> nodes, std::span<const std::pair<NodeId, NodeId>> edges);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<GeoNode>& nodes() const { return nodes_; }
  const GeoNode& node(NodeId u) const;
  // Canonical (u < v) pairs in ascending order.
  const std::vector<std::pair<NodeId, NodeId>>& edges() const { return edges_; }

  bool valid(NodeId u) const { return u >= 0 && static_cast<std::size_t>(u) < nodes_.size(); }
  // Adjacent nodes in ascending id order.
  std::span<const Neighbor> neighbors(NodeId u) const;
  std::optional<double> weight(NodeId u, NodeId v) const;
  // Straight-line distance between any two nodes.
  double euclid(NodeId u, NodeId v) const;

  std::size_t self_loops_dropped() const { return self_loops_dropped_; }
  std::size_t duplicates_merged() const { return duplicates_merged_; }
  std::size_t zero_length_dropped() const { return zero_length_dropped_; }

 private:
  std::vector<GeoNode> nodes_;
  std::vector<std::pair<NodeId, NodeId>> edges_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::size_t self_loops_dropped_ = 0;
  std::size_t duplicates_merged_ = 0;
  std::size_t zero_length_dropped_ = 0;
};

// Free-function form of Graph::neighbors; throws DomainError on a bad id.
std::vector<Neighbor> neighbors(const Graph& g, NodeId u);

// Edges from a MatrixMarket coordinate file (1-based `i j` rows, any trailing
// value columns ignored), coordinates as one `lon lat` row per node.
Graph load_graph(std::istream& edges, std::istream& coords);
Graph load_graph_files(const std::string& edges_path, const std::string& coords_path);

struct BoundingBox {
  double lon_min;
  double lon_max;
  double lat_min;
  double lat_max;
};

// Open excludes nodes lying exactly on the box boundary.
enum class BoxMode { Open, Closed };

// A subgraph with dense ids plus the mapping back to its parent.
struct Subgraph {
  Graph graph;
  std::vector<NodeId> new_to_old;
  std::vector<NodeId> old_to_new;  // -1 for nodes that were dropped
};

Subgraph filter_bbox(const Graph& g, const BoundingBox& box, BoxMode mode = BoxMode::Open);
// Keeps `keep` (any order, no duplicates) and every edge between kept nodes.
// New ids follow ascending old id.
Subgraph induced_subgraph(const Graph& g, std::span<const NodeId> keep);

// Text export: `num_nodes num_edges`, node lines `id lon lat`, edge lines
// `u v weight`, reals at 17 significant digits.
void write_graph(std::ostream& out, const Graph& g);
Graph read_graph(std::istream& in);
void save_graph(const std::string& path, const Graph& g);
Graph load_saved_graph(const std::string& path);

}  // namespace routeseq
