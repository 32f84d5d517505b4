// SPDX-License-Identifier: Apache-2.0

#ifndef SRNN_ARCH_HPP
#define SRNN_ARCH_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srnn/stgraph.hpp"

namespace srnn {

enum class LayerKind { FC, RNN, LSTM, Softmax };

const char* layer_kind_name(LayerKind k);

// One layer of an architecture string such as "FC(256)" or "softmax(·)".
// width == 0 marks the placeholder "·", resolved from label_dims at
// compile time.
struct LayerSpec {
  LayerKind kind = LayerKind::FC;
  std::size_t width = 0;

  bool placeholder() const { return width == 0; }
  bool recurrent() const { return kind == LayerKind::RNN || kind == LayerKind::LSTM; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Grammar: unit := layer ("-" layer)* ; layer := KIND "(" (INT | "·" | ".") ")".
// KIND is one of FC, RNN, LSTM, softmax (case-insensitive). Throws
// Error(Parse) with a byte offset on syntax errors, Error(Invalid) on an
// unknown kind or non-positive width.
std::vector<LayerSpec> parse_arch_spec(const std::string& text);
std::string render_arch_spec(const std::vector<LayerSpec>& layers);

// A factor materialization plan. The body splits into `front` (leading
// FC layers ahead of the recurrent run) and `stack` (the skip-connected
// run); node units additionally carry one resolved head per label dim.
struct UnitSpec {
  std::string factor_id;
  std::vector<LayerSpec> layers;  // parsed spec, placeholders resolved in heads
  bool is_node_unit = false;
  bool skip_connections = false;
  std::size_t input_dim = 0;
  std::vector<std::size_t> output_dims;  // head widths; for edge units {top width}

  std::size_t front_len = 0;  // layers[0..front_len) = front
  std::size_t body_len = 0;   // layers[0..body_len) = front + stack
  std::vector<LayerSpec> heads;  // resolved head layers (node units only)

  std::size_t stack_len() const { return body_len - front_len; }
  // Width feeding the stack (front output, or raw input when no front).
  std::size_t stack_input_dim() const;
  // Per-layer input widths as materialized, skip connections included.
  std::size_t front_in(std::size_t i) const;
  std::size_t stack_in(std::size_t i) const;
  std::size_t head_input_dim() const;
  std::size_t top_width() const;
  std::size_t parameter_count() const;
};

// The compiled mixture: one unit per factor plus the bipartite wiring.
struct ArchGraph {
  std::map<std::string, UnitSpec> edge_units;  // edge factor id -> unit
  std::map<std::string, UnitSpec> node_units;  // node factor id -> unit
  std::vector<std::pair<std::string, std::string>> wiring;  // (edge id, node id), sorted

  const UnitSpec* find_unit(const std::string& factor_id) const;
  std::vector<std::string> wired_to(const std::string& node_factor_id) const;
};

struct Diagnostic {
  std::string factor_id;
  std::string message;
};

// Per-role fallback architectures applied when a factor has no explicit
// spec ("FC(256)-FC(256)-LSTM(512)" edges, "LSTM(512)-FC(256)-FC(100)-FC(·)"
// nodes by default).
struct ArchDefaults {
  std::string edge_spec = "FC(256)-FC(256)-LSTM(512)";
  std::string node_spec = "LSTM(512)-FC(256)-FC(100)-FC(·)";
};

struct CompileOptions {
  ArchDefaults defaults;
  // Drops all edge units and wiring; node units see node features only
  // (the "w/o edgeRNN" ablation).
  bool ablate_edges = false;
};

// Instantiates one unit per factor, wires edge units to node units
// exactly along the neighbor relation, and resolves every dimension.
// `specs` maps factor ids to architecture strings; missing entries take
// the role default.
ArchGraph compile(const FactorGraph& fg, const StGraph& g,
                  const std::map<std::string, std::string>& specs,
                  const CompileOptions& options = {});

// Total weight and bias element count across all units.
std::size_t count_parameters(const ArchGraph& a);

// Deterministic DOT rendering: node units as boxes, edge units as
// ellipses, wiring as edge-unit -> node-unit arrows.
std::string export_dot(const ArchGraph& a);

// Structural re-validation of a compiled graph against its sources.
// Returns one diagnostic per violation; empty means well-formed.
std::vector<Diagnostic> validate(const ArchGraph& a, const FactorGraph& fg, const StGraph& g);

}  // namespace srnn

#endif
