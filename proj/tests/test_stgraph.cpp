// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <set>

#include "srnn/error.hpp"
#include "srnn/stgraph.hpp"
#include "testutil.hpp"

using namespace srnn;

TEST_CASE("human-objects graph partitions into 4 edge partitions") {
  StGraph g = testutil::human_objects_graph();
  g.validate();
  std::vector<EdgePartition> parts = partition_edges(g);
  CHECK(parts.size() == 4);

  auto find = [&](const std::string& key) -> const EdgePartition* {
    for (const auto& p : parts) {
      if (p.key.str() == key) return &p;
    }
    return nullptr;
  };
  REQUIRE(find("human-object:spatial"));
  REQUIRE(find("object-object:spatial"));
  REQUIRE(find("human-human:temporal"));
  REQUIRE(find("object-object:temporal"));
  CHECK(find("human-object:spatial")->members.size() == 2);
  CHECK(find("object-object:spatial")->members.size() == 1);
  CHECK(find("human-human:temporal")->members.size() == 1);
  CHECK(find("object-object:temporal")->members.size() == 2);
}

TEST_CASE("single node graph has no edge partitions and one factor") {
  StGraph g;
  g.nodes = {{"n", "solo"}};
  g.node_feature_dims = {{"solo", 2}};
  g.validate();
  CHECK(partition_edges(g).empty());
  FactorGraph fg = derive_factor_graph(g);
  CHECK(fg.node_factors.size() == 1);
  CHECK(fg.edge_factors.empty());
  CHECK(fg.neighbor_pairs.empty());
}

TEST_CASE("fully connected three-partition graph: label-pair enumeration oracle") {
  StGraph g;
  g.nodes = {{"a", "A"}, {"b", "B"}, {"c", "C"}};
  g.spatial_edges = {{"a", "b", EdgeKind::Spatial},
                     {"a", "c", EdgeKind::Spatial},
                     {"b", "c", EdgeKind::Spatial}};
  g.node_feature_dims = {{"A", 1}, {"B", 1}, {"C", 1}};
  for (const Edge& e : g.spatial_edges) {
    g.edge_feature_dims[PartitionKey::make(g.partition_of(e.a), g.partition_of(e.b), e.kind)] = 2;
  }
  g.validate();

  // Oracle: enumerate the distinct (sorted label pair, kind) combinations.
  std::set<std::string> expected;
  for (const Edge& e : g.spatial_edges) {
    expected.insert(PartitionKey::make(g.partition_of(e.a), g.partition_of(e.b), e.kind).str());
  }
  std::vector<EdgePartition> parts = partition_edges(g);
  CHECK(parts.size() == expected.size());
  CHECK(parts.size() == 3);
  for (const auto& p : parts) CHECK(expected.count(p.key.str()) == 1);
}

TEST_CASE("derive_factor_graph matches the paper example: 6 factors, 5 neighbor pairs") {
  StGraph g = testutil::human_objects_graph();
  FactorGraph fg = derive_factor_graph(g);
  CHECK(fg.node_factors.size() == 2);
  CHECK(fg.edge_factors.size() == 4);

  std::set<std::pair<std::string, std::string>> expect = {
      {"edge:human-object:spatial", "node:human"},
      {"edge:human-object:spatial", "node:object"},
      {"edge:object-object:spatial", "node:object"},
      {"edge:human-human:temporal", "node:human"},
      {"edge:object-object:temporal", "node:object"},
  };
  std::set<std::pair<std::string, std::string>> got(fg.neighbor_pairs.begin(),
                                                    fg.neighbor_pairs.end());
  CHECK(got == expect);
}

TEST_CASE("incident_edges ordering and errors") {
  StGraph g = testutil::human_objects_graph();
  PartitionKey ho = PartitionKey::make("human", "object", EdgeKind::Spatial);
  std::vector<Edge> edges = incident_edges(g, "h1", ho);
  REQUIRE(edges.size() == 2);
  CHECK(edges[0].counterpart("h1") == "o1");
  CHECK(edges[1].counterpart("h1") == "o2");

  // Object o1 sees only its own human-object edge.
  std::vector<Edge> o1_edges = incident_edges(g, "o1", ho);
  REQUIRE(o1_edges.size() == 1);
  CHECK(o1_edges[0].counterpart("o1") == "h1");

  // No incidences in a valid partition: empty, not an error.
  PartitionKey hh = PartitionKey::make("human", "human", EdgeKind::Temporal);
  CHECK(incident_edges(g, "o1", hh).empty());

  CHECK_THROWS_AS(incident_edges(g, "nope", ho), Error);
  CHECK_THROWS_AS(incident_edges(g, "h1", PartitionKey::make("x", "y", EdgeKind::Spatial)), Error);
}

TEST_CASE("incident_edges: star graph order matches sorted leaf ids") {
  StGraph g;
  g.nodes = {{"center", "hub"}};
  g.node_feature_dims = {{"hub", 1}, {"leaf", 1}};
  std::vector<std::string> leaves = {"l4", "l1", "l5", "l2", "l3"};
  for (const std::string& l : leaves) {
    g.nodes.push_back({l, "leaf"});
    g.spatial_edges.push_back({std::min(l, std::string("center")),
                               std::max(l, std::string("center")), EdgeKind::Spatial});
  }
  g.edge_feature_dims[PartitionKey::make("hub", "leaf", EdgeKind::Spatial)] = 2;
  g.validate();
  std::vector<Edge> es =
      incident_edges(g, "center", PartitionKey::make("hub", "leaf", EdgeKind::Spatial));
  REQUIRE(es.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(es[i].counterpart("center") == "l" + std::to_string(i + 1));
  }
}

TEST_CASE("validation rejects malformed graphs") {
  StGraph g = testutil::human_objects_graph();
  SUBCASE("dangling endpoint") {
    g.spatial_edges.push_back({"h1", "ghost", EdgeKind::Spatial});
    CHECK_THROWS_AS(g.validate(), Error);
  }
  SUBCASE("duplicate node") {
    g.nodes.push_back({"h1", "human"});
    CHECK_THROWS_AS(g.validate(), Error);
  }
  SUBCASE("duplicate spatial edge, reversed") {
    g.spatial_edges.push_back({"o1", "h1", EdgeKind::Spatial});
    CHECK_THROWS_AS(g.validate(), Error);
  }
  SUBCASE("missing edge partition dim") {
    g.edge_feature_dims.erase(PartitionKey::make("human", "object", EdgeKind::Spatial));
    CHECK_THROWS_AS(g.validate(), Error);
  }
  SUBCASE("no nodes") {
    StGraph empty;
    CHECK_THROWS_AS(empty.validate(), Error);
  }
}

namespace {

// Deterministic random graphs over up to 6 nodes and 3 partition labels.
StGraph random_graph(Rng& rng) {
  StGraph g;
  std::size_t n = 1 + rng.below(6);
  const char* labels[] = {"alpha", "beta", "gamma"};
  for (std::size_t i = 0; i < n; ++i) {
    g.nodes.push_back({"n" + std::to_string(i), labels[rng.below(3)]});
  }
  g.node_feature_dims = {{"alpha", 2}, {"beta", 3}, {"gamma", 1}};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.below(2)) {
        g.spatial_edges.push_back(
            {g.nodes[i].first, g.nodes[j].first, EdgeKind::Spatial});
      }
    }
    if (rng.below(2)) {
      g.temporal_edges.push_back({g.nodes[i].first, g.nodes[i].first, EdgeKind::Temporal});
    }
    std::size_t j = rng.below(n);
    if (j != i && rng.below(3) == 0) {
      g.temporal_edges.push_back({g.nodes[i].first, g.nodes[j].first, EdgeKind::Temporal});
    }
  }
  // Deduplicate temporal edges the generator may have repeated.
  std::sort(g.temporal_edges.begin(), g.temporal_edges.end());
  g.temporal_edges.erase(std::unique(g.temporal_edges.begin(), g.temporal_edges.end()),
                         g.temporal_edges.end());
  for (const Edge& e : g.all_edges()) {
    g.edge_feature_dims[PartitionKey::make(g.partition_of(e.a), g.partition_of(e.b), e.kind)] = 2;
  }
  return g;
}

}  // namespace

TEST_CASE("property: partition_edges is a partition") {
  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    StGraph g = random_graph(rng);
    g.validate();
    std::vector<EdgePartition> parts = partition_edges(g);
    std::multiset<std::string> covered;
    for (const auto& p : parts) {
      for (const Edge& e : p.members) covered.insert(e.stream_id() );
    }
    std::multiset<std::string> all;
    for (const Edge& e : g.all_edges()) all.insert(e.stream_id());
    CHECK(covered == all);  // union = all edges, each exactly once
  }
}

TEST_CASE("property: neighbor relation equals the existential brute force") {
  Rng rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    StGraph g = random_graph(rng);
    g.validate();
    FactorGraph fg = derive_factor_graph(g);

    std::set<std::pair<std::string, std::string>> brute;
    for (const EdgeFactor& ef : fg.edge_factors) {
      for (const NodeFactor& nf : fg.node_factors) {
        // ∃ v ∈ V_p, u ∈ V with (u,v) ∈ E_m
        bool found = false;
        for (const auto& [vid, vlabel] : g.nodes) {
          if (vlabel != nf.label) continue;
          for (const Edge& e : ef.partition.members) {
            if (e.incident_to(vid)) found = true;
          }
        }
        if (found) brute.insert({ef.id, nf.id});
      }
    }
    std::set<std::pair<std::string, std::string>> got(fg.neighbor_pairs.begin(),
                                                      fg.neighbor_pairs.end());
    CHECK(got == brute);
  }
}

TEST_CASE("property: derive_factor_graph is deterministic") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    StGraph g = random_graph(rng);
    g.validate();
    FactorGraph a = derive_factor_graph(g);
    FactorGraph b = derive_factor_graph(g);
    CHECK(a.neighbor_pairs == b.neighbor_pairs);
    REQUIRE(a.node_factors.size() == b.node_factors.size());
    REQUIRE(a.edge_factors.size() == b.edge_factors.size());
    for (std::size_t i = 0; i < a.edge_factors.size(); ++i) {
      CHECK(a.edge_factors[i].id == b.edge_factors[i].id);
      CHECK(a.edge_factors[i].partition.members == b.edge_factors[i].partition.members);
    }
  }
}

TEST_CASE("factor count is stable when a similar node joins existing partitions") {
  StGraph g = testutil::human_objects_graph();
  FactorGraph before = derive_factor_graph(g);
  StGraph g2 = testutil::human_objects_graph_extra_object();
  g2.validate();
  FactorGraph after = derive_factor_graph(g2);
  CHECK(before.node_factors.size() == after.node_factors.size());
  CHECK(before.edge_factors.size() == after.edge_factors.size());
}
