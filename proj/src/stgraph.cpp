// SPDX-License-Identifier: Apache-2.0

#include "srnn/stgraph.hpp"

#include <algorithm>
#include <set>

#include "srnn/error.hpp"

namespace srnn {

std::string Edge::stream_id() const {
  return a + "-" + b + ":" + edge_kind_name(kind);
}

PartitionKey PartitionKey::make(const std::string& la, const std::string& lb, EdgeKind kind) {
  PartitionKey k;
  k.kind = kind;
  if (la <= lb) {
    k.label_a = la;
    k.label_b = lb;
  } else {
    k.label_a = lb;
    k.label_b = la;
  }
  return k;
}

std::string PartitionKey::str() const {
  return label_a + "-" + label_b + ":" + edge_kind_name(kind);
}

const char* derivation_rule_name(DerivationRule r) {
  switch (r) {
    case DerivationRule::ConcatEndpoints: return "concat-endpoints";
    case DerivationRule::Difference: return "difference";
    case DerivationRule::Passthrough: return "custom-passthrough";
  }
  return "concat-endpoints";
}

DerivationRule parse_derivation_rule(const std::string& s) {
  if (s == "concat-endpoints") return DerivationRule::ConcatEndpoints;
  if (s == "difference") return DerivationRule::Difference;
  if (s == "custom-passthrough") return DerivationRule::Passthrough;
  throw_invalid("unknown edge derivation rule '" + s + "'");
}

bool StGraph::has_node(const std::string& id) const {
  for (const auto& [nid, label] : nodes) {
    if (nid == id) return true;
  }
  return false;
}

const std::string& StGraph::partition_of(const std::string& id) const {
  for (const auto& [nid, label] : nodes) {
    if (nid == id) return label;
  }
  throw_invalid("unknown node id '" + id + "'");
}

std::vector<Edge> StGraph::all_edges() const {
  std::vector<Edge> out = spatial_edges;
  out.insert(out.end(), temporal_edges.begin(), temporal_edges.end());
  return out;
}

std::vector<std::string> StGraph::node_ids_sorted() const {
  std::vector<std::string> ids;
  ids.reserve(nodes.size());
  for (const auto& [id, label] : nodes) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::vector<std::string> StGraph::partition_labels_sorted() const {
  std::set<std::string> labels;
  for (const auto& [id, label] : nodes) labels.insert(label);
  return {labels.begin(), labels.end()};
}

std::size_t StGraph::node_dim(const std::string& label) const {
  auto it = node_feature_dims.find(label);
  if (it == node_feature_dims.end()) {
    throw_invalid("partition '" + label + "' has no declared feature_dim");
  }
  return it->second;
}

std::size_t StGraph::edge_dim(const PartitionKey& key) const {
  auto it = edge_feature_dims.find(key);
  if (it == edge_feature_dims.end()) {
    throw_invalid("edge partition '" + key.str() + "' has no declared feature_dim");
  }
  return it->second;
}

void StGraph::validate() const {
  if (nodes.empty()) throw_invalid("graph has no nodes");
  std::set<std::string> ids;
  for (const auto& [id, label] : nodes) {
    if (id.empty()) throw_invalid("empty node id");
    if (label.empty()) throw_invalid("node '" + id + "' has empty partition label");
    if (!ids.insert(id).second) throw_invalid("duplicate node id '" + id + "'");
    if (!node_feature_dims.count(label)) {
      throw_invalid("partition '" + label + "' has no declared feature_dim");
    }
  }
  auto check_endpoint = [&](const Edge& e, const std::string& v) {
    if (!ids.count(v)) {
      throw_invalid("edge " + e.stream_id() + " references unknown node '" + v + "'");
    }
  };
  std::set<std::pair<std::string, std::string>> seen_spatial;
  for (const Edge& e : spatial_edges) {
    check_endpoint(e, e.a);
    check_endpoint(e, e.b);
    if (e.kind != EdgeKind::Spatial) throw_internal("spatial edge with wrong kind tag");
    if (e.a == e.b) throw_invalid("spatial self-edge on node '" + e.a + "'");
    auto canon = std::minmax(e.a, e.b);
    if (!seen_spatial.insert({canon.first, canon.second}).second) {
      throw_invalid("duplicate spatial edge " + e.stream_id());
    }
  }
  std::set<std::pair<std::string, std::string>> seen_temporal;
  for (const Edge& e : temporal_edges) {
    check_endpoint(e, e.a);
    check_endpoint(e, e.b);
    if (e.kind != EdgeKind::Temporal) throw_internal("temporal edge with wrong kind tag");
    if (!seen_temporal.insert({e.a, e.b}).second) {
      throw_invalid("duplicate temporal edge " + e.stream_id());
    }
  }
  for (const Edge& e : all_edges()) {
    PartitionKey key = PartitionKey::make(partition_of(e.a), partition_of(e.b), e.kind);
    if (!edge_feature_dims.count(key)) {
      throw_invalid("edge partition '" + key.str() + "' has no declared feature_dim");
    }
  }
}

std::vector<EdgePartition> partition_edges(const StGraph& g) {
  std::map<PartitionKey, EdgePartition> parts;
  for (const Edge& e : g.all_edges()) {
    PartitionKey key = PartitionKey::make(g.partition_of(e.a), g.partition_of(e.b), e.kind);
    EdgePartition& p = parts[key];
    p.key = key;
    p.members.push_back(e);
  }
  std::vector<EdgePartition> out;
  out.reserve(parts.size());
  for (auto& [key, part] : parts) {
    std::sort(part.members.begin(), part.members.end());
    auto it = g.edge_feature_dims.find(key);
    part.feature_dim = it == g.edge_feature_dims.end() ? 0 : it->second;
    out.push_back(std::move(part));
  }
  return out;
}

FactorGraph derive_factor_graph(const StGraph& g) {
  FactorGraph fg;
  for (const std::string& label : g.partition_labels_sorted()) {
    fg.node_factors.push_back(NodeFactor{node_factor_id(label), label});
  }
  std::vector<EdgePartition> parts = partition_edges(g);
  for (EdgePartition& part : parts) {
    fg.edge_factors.push_back(EdgeFactor{edge_factor_id(part.key), part.key, std::move(part)});
  }

  std::set<std::pair<std::string, std::string>> pairs;
  for (const EdgeFactor& ef : fg.edge_factors) {
    for (const Edge& e : ef.partition.members) {
      pairs.insert({ef.id, node_factor_id(g.partition_of(e.a))});
      pairs.insert({ef.id, node_factor_id(g.partition_of(e.b))});
    }
  }
  fg.neighbor_pairs.assign(pairs.begin(), pairs.end());
  return fg;
}

std::vector<Edge> incident_edges(const StGraph& g, const std::string& v,
                                 const PartitionKey& key) {
  if (!g.has_node(v)) throw_invalid("unknown node id '" + v + "'");
  bool key_exists = false;
  std::vector<Edge> out;
  for (const EdgePartition& part : partition_edges(g)) {
    if (part.key != key) continue;
    key_exists = true;
    for (const Edge& e : part.members) {
      if (e.incident_to(v)) out.push_back(e);
    }
  }
  if (!key_exists) throw_invalid("unknown edge partition '" + key.str() + "'");
  std::sort(out.begin(), out.end(), [&](const Edge& x, const Edge& y) {
    return std::make_tuple(x.counterpart(v), x.a, x.b) <
           std::make_tuple(y.counterpart(v), y.a, y.b);
  });
  return out;
}

const NodeFactor* FactorGraph::find_node_factor(const std::string& id) const {
  for (const NodeFactor& f : node_factors) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

const EdgeFactor* FactorGraph::find_edge_factor(const std::string& id) const {
  for (const EdgeFactor& f : edge_factors) {
    if (f.id == id) return &f;
  }
  return nullptr;
}

bool FactorGraph::are_neighbors(const std::string& edge_id, const std::string& node_id) const {
  for (const auto& [e, n] : neighbor_pairs) {
    if (e == edge_id && n == node_id) return true;
  }
  return false;
}

std::vector<std::string> FactorGraph::wired_edge_factors(const std::string& node_factor_id) const {
  std::vector<std::string> out;
  for (const auto& [e, n] : neighbor_pairs) {
    if (n == node_factor_id) out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace srnn
