#pragma once

#include "routeseq/graph.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace routeseq {

struct RoutePath {
  std::vector<NodeId> nodes;
  double cost = 0.0;

  // Edges traversed.
  std::size_t hops() const { return nodes.empty() ? 0 : nodes.size() - 1; }
  NodeId source() const { return nodes.front(); }
  NodeId target() const { return nodes.back(); }
};

// Best-first search with h(n) = heuristic_scale * euclid(n, dst). Scale 0 is
// Dijkstra. The frontier is ordered by (f, node id) so equal-f ties resolve to
// the smaller id. Returns nullopt when dst is unreachable.
std::optional<RoutePath> astar_search(const Graph& g, NodeId src, NodeId dst,
                                      double heuristic_scale = 1.0);

// Total weight when every consecutive pair is an edge; nullopt otherwise or
// for an empty list.
std::optional<double> path_cost(const Graph& g, std::span<const NodeId> nodes);

struct RouteDataset {
  std::vector<RoutePath> train;
  std::vector<RoutePath> test;
  std::uint64_t seed = 0;
  double split_fraction = 0.0;

  std::size_t size() const { return train.size() + test.size(); }
};

// Samples src != dst uniformly, keeps pairs that are reachable and at least
// two hops apart, then assigns the first ceil(split * n) routes of a seeded
// shuffle to the training split. Corpus order is preserved inside each split.
RouteDataset generate_dataset(const Graph& g, std::size_t n_routes, double split_fraction,
                              std::uint64_t seed);

// hop count -> number of routes, over both splits.
std::map<std::size_t, std::size_t> hop_histogram(const RouteDataset& ds);
double mean_hops(std::span<const RoutePath> routes);

// Line format: `# seed=<s> split=<f> n=<n>` then `TRAIN|TEST <cost> <id0> <id1> ...`.
void write_dataset(std::ostream& out, const RouteDataset& ds);
RouteDataset read_dataset(std::istream& in);
void save_dataset(const std::string& path, const RouteDataset& ds);
RouteDataset load_dataset(const std::string& path);

// CSV `hops,count`.
void write_histogram_csv(std::ostream& out, const std::map<std::size_t, std::size_t>& hist);

}  // namespace routeseq
