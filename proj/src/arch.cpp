// SPDX-License-Identifier: Apache-2.0

#include "srnn/arch.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "srnn/error.hpp"

namespace srnn {

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::FC: return "FC";
    case LayerKind::RNN: return "RNN";
    case LayerKind::LSTM: return "LSTM";
    case LayerKind::Softmax: return "softmax";
  }
  return "FC";
}

namespace {

[[noreturn]] void syntax_error(const std::string& text, std::size_t at, const std::string& what) {
  throw_parse("arch spec syntax error at byte " + std::to_string(at) + ": " + what + " in \"" +
              text + "\"");
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<LayerSpec> parse_arch_spec(const std::string& text) {
  std::vector<LayerSpec> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  if (n == 0) syntax_error(text, 0, "empty spec");
  while (true) {
    std::size_t kind_start = i;
    while (i < n && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    if (i == kind_start) syntax_error(text, i, "expected layer kind");
    std::string kind_str = lower(text.substr(kind_start, i - kind_start));
    LayerKind kind;
    if (kind_str == "fc") kind = LayerKind::FC;
    else if (kind_str == "rnn") kind = LayerKind::RNN;
    else if (kind_str == "lstm") kind = LayerKind::LSTM;
    else if (kind_str == "softmax") kind = LayerKind::Softmax;
    else throw_invalid("unknown layer kind '" + text.substr(kind_start, i - kind_start) + "'");

    if (i >= n || text[i] != '(') syntax_error(text, i, "expected '('");
    ++i;
    LayerSpec layer;
    layer.kind = kind;
    if (i < n && text[i] == '.') {
      layer.width = 0;
      ++i;
    } else if (i + 1 < n && static_cast<unsigned char>(text[i]) == 0xC2 &&
               static_cast<unsigned char>(text[i + 1]) == 0xB7) {
      // UTF-8 middle dot "·"
      layer.width = 0;
      i += 2;
    } else {
      std::size_t digits_start = i;
      while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) ++i;
      if (i == digits_start) syntax_error(text, i, "expected width, '·' or '.'");
      long long w = 0;
      for (std::size_t d = digits_start; d < i; ++d) {
        w = w * 10 + (text[d] - '0');
        if (w > 1'000'000'000LL) throw_invalid("layer width too large in \"" + text + "\"");
      }
      if (w <= 0) {
        throw_invalid("non-positive layer width " + std::to_string(w) + " in \"" + text + "\"");
      }
      layer.width = static_cast<std::size_t>(w);
    }
    if (i >= n || text[i] != ')') syntax_error(text, i, "expected ')'");
    ++i;
    out.push_back(layer);
    if (i == n) break;
    if (text[i] != '-') syntax_error(text, i, "expected '-' between layers");
    ++i;
  }
  return out;
}

std::string render_arch_spec(const std::vector<LayerSpec>& layers) {
  std::ostringstream os;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) os << "-";
    os << layer_kind_name(layers[i].kind) << "(";
    if (layers[i].placeholder()) os << "\xC2\xB7";
    else os << layers[i].width;
    os << ")";
  }
  return os.str();
}

std::size_t UnitSpec::stack_input_dim() const {
  return front_len ? layers[front_len - 1].width : input_dim;
}

std::size_t UnitSpec::front_in(std::size_t i) const {
  return i == 0 ? input_dim : layers[i - 1].width;
}

std::size_t UnitSpec::stack_in(std::size_t i) const {
  if (i == 0) return stack_input_dim();
  std::size_t prev = layers[front_len + i - 1].width;
  return skip_connections ? stack_input_dim() + prev : prev;
}

std::size_t UnitSpec::top_width() const {
  return stack_len() ? layers[body_len - 1].width : stack_input_dim();
}

std::size_t UnitSpec::head_input_dim() const {
  if (stack_len() == 0) return stack_input_dim();
  if (!skip_connections) return top_width();
  std::size_t dim = stack_input_dim();
  for (std::size_t i = front_len; i < body_len; ++i) dim += layers[i].width;
  return dim;
}

std::size_t UnitSpec::parameter_count() const {
  std::size_t total = 0;
  for (std::size_t i = 0; i < front_len; ++i) {
    total += (front_in(i) + 1) * layers[i].width;
  }
  for (std::size_t i = 0; i < stack_len(); ++i) {
    const LayerSpec& l = layers[front_len + i];
    std::size_t in = stack_in(i);
    std::size_t w = l.width;
    switch (l.kind) {
      case LayerKind::FC: total += (in + 1) * w; break;
      case LayerKind::RNN: total += in * w + w * w + w; break;
      case LayerKind::LSTM: total += 4 * (in * w + w * w + w); break;
      case LayerKind::Softmax: break;  // rejected earlier
    }
  }
  for (const LayerSpec& h : heads) {
    total += (head_input_dim() + 1) * h.width;
  }
  return total;
}

const UnitSpec* ArchGraph::find_unit(const std::string& factor_id) const {
  auto it = edge_units.find(factor_id);
  if (it != edge_units.end()) return &it->second;
  auto jt = node_units.find(factor_id);
  if (jt != node_units.end()) return &jt->second;
  return nullptr;
}

std::vector<std::string> ArchGraph::wired_to(const std::string& node_factor_id) const {
  std::vector<std::string> out;
  for (const auto& [e, n] : wiring) {
    if (n == node_factor_id) out.push_back(e);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

constexpr std::size_t kDimLimit = 1u << 28;

// Splits the body into front/stack and validates structural rules that
// hold for every unit.
void finish_unit(UnitSpec& u) {
  // Recurrent layers must form one contiguous run.
  std::size_t first_rec = u.body_len, last_rec = 0;
  bool has_rec = false;
  for (std::size_t i = 0; i < u.body_len; ++i) {
    if (u.layers[i].recurrent()) {
      if (!has_rec) first_rec = i;
      last_rec = i;
      has_rec = true;
    }
  }
  // Leading FC layers ahead of the first recurrent layer transform the
  // raw input; everything from there on is the skip-connected stack.
  u.front_len = has_rec ? first_rec : 0;
  (void)last_rec;
  for (std::size_t i = 0; i < u.body_len; ++i) {
    if (u.layers[i].kind == LayerKind::Softmax) {
      throw_invalid("factor '" + u.factor_id + "': softmax is only valid as an output head");
    }
    if (u.layers[i].placeholder()) {
      throw_invalid("factor '" + u.factor_id + "': unresolvable placeholder width");
    }
    if (i > u.front_len && u.layers[i].recurrent() && !u.layers[i - 1].recurrent()) {
      throw_invalid("factor '" + u.factor_id + "': recurrent layers must be contiguous");
    }
  }
  u.skip_connections = u.stack_len() >= 2;
  if (u.input_dim > kDimLimit || u.head_input_dim() > kDimLimit) {
    throw_invalid("factor '" + u.factor_id + "': dimension overflow");
  }
}

UnitSpec make_edge_unit(const EdgeFactor& ef, const std::string& spec_text) {
  UnitSpec u;
  u.factor_id = ef.id;
  u.layers = parse_arch_spec(spec_text);
  u.is_node_unit = false;
  u.body_len = u.layers.size();
  u.input_dim = ef.partition.feature_dim;
  finish_unit(u);
  u.output_dims = {u.top_width()};
  return u;
}

UnitSpec make_node_unit(const NodeFactor& nf, const std::string& spec_text,
                        std::size_t input_dim, const std::vector<std::size_t>& label_dims) {
  UnitSpec u;
  u.factor_id = nf.id;
  u.layers = parse_arch_spec(spec_text);
  u.is_node_unit = true;
  u.input_dim = input_dim;
  if (label_dims.empty()) {
    // Unlabeled partition: no head, the whole spec is body.
    u.body_len = u.layers.size();
    finish_unit(u);
    u.output_dims = {};
    return u;
  }
  if (u.layers.empty()) throw_invalid("factor '" + nf.id + "': empty arch spec");
  u.body_len = u.layers.size() - 1;
  const LayerSpec head_template = u.layers.back();
  if (head_template.kind != LayerKind::FC && head_template.kind != LayerKind::Softmax) {
    throw_invalid("factor '" + nf.id + "': output head must be FC or softmax, got " +
                  std::string(layer_kind_name(head_template.kind)));
  }
  finish_unit(u);
  for (std::size_t dim : label_dims) {
    if (dim == 0) throw_invalid("factor '" + nf.id + "': zero-width label dim");
    LayerSpec head = head_template;
    if (head.placeholder()) head.width = dim;
    u.heads.push_back(head);
    u.output_dims.push_back(head.width);
  }
  return u;
}

}  // namespace

ArchGraph compile(const FactorGraph& fg, const StGraph& g,
                  const std::map<std::string, std::string>& specs,
                  const CompileOptions& options) {
  for (const auto& [factor_id, spec] : specs) {
    if (!fg.find_node_factor(factor_id) && !fg.find_edge_factor(factor_id)) {
      throw_invalid("arch spec given for unknown factor '" + factor_id + "'");
    }
  }
  auto spec_for = [&](const std::string& id, const std::string& fallback) -> const std::string& {
    auto it = specs.find(id);
    if (it != specs.end()) {
      if (it->second.empty()) throw_invalid("missing arch spec for factor '" + id + "'");
      return it->second;
    }
    if (fallback.empty()) throw_invalid("missing arch spec for factor '" + id + "'");
    return fallback;
  };

  ArchGraph a;
  if (!options.ablate_edges) {
    a.wiring = fg.neighbor_pairs;
    for (const EdgeFactor& ef : fg.edge_factors) {
      a.edge_units.emplace(ef.id, make_edge_unit(ef, spec_for(ef.id, options.defaults.edge_spec)));
    }
  }
  for (const NodeFactor& nf : fg.node_factors) {
    std::size_t input_dim = g.node_dim(nf.label);
    for (const std::string& edge_id : a.wired_to(nf.id)) {
      input_dim += a.edge_units.at(edge_id).output_dims[0];
    }
    auto ld_it = g.label_dims.find(nf.label);
    std::vector<std::size_t> label_dims =
        ld_it == g.label_dims.end() ? std::vector<std::size_t>{} : ld_it->second;
    a.node_units.emplace(
        nf.id, make_node_unit(nf, spec_for(nf.id, options.defaults.node_spec), input_dim,
                              label_dims));
  }
  return a;
}

std::size_t count_parameters(const ArchGraph& a) {
  std::size_t total = 0;
  for (const auto& [id, u] : a.edge_units) total += u.parameter_count();
  for (const auto& [id, u] : a.node_units) total += u.parameter_count();
  return total;
}

std::string export_dot(const ArchGraph& a) {
  std::ostringstream os;
  os << "digraph srnn {\n";
  for (const auto& [id, u] : a.edge_units) {
    os << "  \"" << id << "\" [shape=ellipse];\n";
  }
  for (const auto& [id, u] : a.node_units) {
    os << "  \"" << id << "\" [shape=box];\n";
  }
  std::vector<std::pair<std::string, std::string>> wiring = a.wiring;
  std::sort(wiring.begin(), wiring.end());
  for (const auto& [e, n] : wiring) {
    os << "  \"" << e << "\" -> \"" << n << "\";\n";
  }
  os << "}\n";
  return os.str();
}

std::vector<Diagnostic> validate(const ArchGraph& a, const FactorGraph& fg, const StGraph& g) {
  std::vector<Diagnostic> diags;
  auto report = [&](const std::string& id, const std::string& msg) {
    diags.push_back(Diagnostic{id, msg});
  };

  std::set<std::pair<std::string, std::string>> expected(fg.neighbor_pairs.begin(),
                                                         fg.neighbor_pairs.end());
  std::set<std::pair<std::string, std::string>> actual(a.wiring.begin(), a.wiring.end());
  for (const auto& p : expected) {
    if (!actual.count(p)) report(p.first, "missing wiring to '" + p.second + "'");
  }
  for (const auto& p : actual) {
    if (!expected.count(p)) report(p.first, "spurious wiring to '" + p.second + "'");
  }

  for (const EdgeFactor& ef : fg.edge_factors) {
    auto it = a.edge_units.find(ef.id);
    if (it == a.edge_units.end()) {
      report(ef.id, "no unit for edge factor");
      continue;
    }
    if (it->second.input_dim != ef.partition.feature_dim) {
      report(ef.id, "edge unit input_dim " + std::to_string(it->second.input_dim) +
                        " != partition feature_dim " + std::to_string(ef.partition.feature_dim));
    }
  }
  for (const auto& [id, u] : a.edge_units) {
    if (!fg.find_edge_factor(id)) report(id, "unit for unknown edge factor");
  }

  for (const NodeFactor& nf : fg.node_factors) {
    auto it = a.node_units.find(nf.id);
    if (it == a.node_units.end()) {
      report(nf.id, "no unit for node factor");
      continue;
    }
    const UnitSpec& u = it->second;
    std::size_t want = g.node_dim(nf.label);
    for (const std::string& edge_id : a.wired_to(nf.id)) {
      auto eu = a.edge_units.find(edge_id);
      if (eu != a.edge_units.end()) want += eu->second.output_dims[0];
    }
    if (u.input_dim != want) {
      report(nf.id, "node unit input_dim " + std::to_string(u.input_dim) +
                        " != node feature dim + wired edge outputs (" + std::to_string(want) +
                        ")");
    }
    auto ld_it = g.label_dims.find(nf.label);
    std::size_t heads = ld_it == g.label_dims.end() ? 0 : ld_it->second.size();
    if (u.heads.size() != heads) {
      report(nf.id, "node unit has " + std::to_string(u.heads.size()) + " heads, expected " +
                        std::to_string(heads));
    }
  }
  for (const auto& [id, u] : a.node_units) {
    if (!fg.find_node_factor(id)) report(id, "unit for unknown node factor");
  }

  for (const auto& units : {a.edge_units, a.node_units}) {
    for (const auto& [id, u] : units) {
      for (const LayerSpec& l : u.layers) {
        if (l.placeholder() && &l - u.layers.data() < static_cast<std::ptrdiff_t>(u.body_len)) {
          report(id, "unresolved placeholder width in body");
        }
      }
      for (const LayerSpec& h : u.heads) {
        if (h.width == 0) report(id, "unresolved head width");
      }
    }
  }
  return diags;
}

}  // namespace srnn
