// SPDX-License-Identifier: Apache-2.0

#ifndef SRNN_STGRAPH_HPP
#define SRNN_STGRAPH_HPP

#include <map>
#include <string>
#include <vector>

namespace srnn {

enum class EdgeKind { Spatial, Temporal };

inline const char* edge_kind_name(EdgeKind k) {
  return k == EdgeKind::Spatial ? "spatial" : "temporal";
}

// A single edge. Spatial edges are stored with endpoints sorted
// (undirected identity); temporal edges keep their declared order and
// read as (node at t, node at t+1).
struct Edge {
  std::string a;
  std::string b;
  EdgeKind kind = EdgeKind::Spatial;

  bool incident_to(const std::string& v) const { return a == v || b == v; }
  const std::string& counterpart(const std::string& v) const { return a == v ? b : a; }
  std::string stream_id() const;  // "a-b:kind", the dataset stream name

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Identifies an edge partition: the unordered endpoint-label pair plus
// the edge kind. Spatial and temporal partitions never merge, even for
// identical label pairs.
struct PartitionKey {
  std::string label_a;  // label_a <= label_b
  std::string label_b;
  EdgeKind kind = EdgeKind::Spatial;

  static PartitionKey make(const std::string& la, const std::string& lb, EdgeKind kind);
  std::string str() const;  // "label_a-label_b:kind"

  friend bool operator==(const PartitionKey&, const PartitionKey&) = default;
  friend auto operator<=>(const PartitionKey&, const PartitionKey&) = default;
};

struct EdgePartition {
  PartitionKey key;
  std::vector<Edge> members;     // sorted for reproducibility
  std::size_t feature_dim = 0;   // dimension of x_e, user-declared
};

// How edge features are rebuilt from node features during closed-loop
// forecasting.
enum class DerivationRule { ConcatEndpoints, Difference, Passthrough };

const char* derivation_rule_name(DerivationRule r);
DerivationRule parse_derivation_rule(const std::string& s);

// Declarative spatio-temporal graph: nodes with semantic partition
// labels, spatial and temporal edge sets, and per-partition feature and
// label dimensions. Immutable once validated.
struct StGraph {
  std::vector<std::pair<std::string, std::string>> nodes;  // (node id, partition label)
  std::vector<Edge> spatial_edges;
  std::vector<Edge> temporal_edges;
  std::map<std::string, std::size_t> node_feature_dims;            // label -> dim of x_v
  std::map<std::string, std::vector<std::size_t>> label_dims;      // label -> head dims
  std::map<PartitionKey, std::size_t> edge_feature_dims;           // key -> dim of x_e
  std::map<PartitionKey, DerivationRule> edge_derivation;          // key -> forecast rule

  // Throws Error(Invalid) on any violated invariant: dangling edge
  // endpoints, duplicate nodes/edges, missing partition declarations.
  void validate() const;

  bool has_node(const std::string& id) const;
  const std::string& partition_of(const std::string& id) const;
  std::vector<Edge> all_edges() const;
  std::vector<std::string> node_ids_sorted() const;
  std::vector<std::string> partition_labels_sorted() const;
  std::size_t node_dim(const std::string& label) const;
  std::size_t edge_dim(const PartitionKey& key) const;
};

struct NodeFactor {
  std::string id;     // "node:<label>"
  std::string label;  // partition label V_p
};

struct EdgeFactor {
  std::string id;  // "edge:<key>"
  PartitionKey key;
  EdgePartition partition;
};

// Structural factor-graph parameterization: one factor per node
// partition, one per edge partition, plus the neighbor relation
// (edge factor, node factor) that drives the compiled wiring.
struct FactorGraph {
  std::vector<NodeFactor> node_factors;                      // sorted by label
  std::vector<EdgeFactor> edge_factors;                      // sorted by key
  std::vector<std::pair<std::string, std::string>> neighbor_pairs;  // (edge id, node id), sorted

  const NodeFactor* find_node_factor(const std::string& id) const;
  const EdgeFactor* find_edge_factor(const std::string& id) const;
  bool are_neighbors(const std::string& edge_id, const std::string& node_id) const;
  // Edge factors wired to the given node factor, in id order.
  std::vector<std::string> wired_edge_factors(const std::string& node_factor_id) const;
};

inline std::string node_factor_id(const std::string& label) { return "node:" + label; }
inline std::string edge_factor_id(const PartitionKey& key) { return "edge:" + key.str(); }

// Groups the graph's edges by (endpoint label pair, kind). Every edge
// lands in exactly one partition.
std::vector<EdgePartition> partition_edges(const StGraph& g);

// Builds the shared-factor parameterization and the neighbor relation:
// (Ψ_Em, Ψ_Vp) are neighbors iff some edge of E_m has an endpoint in V_p.
FactorGraph derive_factor_graph(const StGraph& g);

// Edges of the named partition incident to v, ordered lexicographically
// by (counterpart id, endpoints). Throws Error(Invalid) for an unknown
// node or partition key.
std::vector<Edge> incident_edges(const StGraph& g, const std::string& v, const PartitionKey& key);

}  // namespace srnn

#endif
