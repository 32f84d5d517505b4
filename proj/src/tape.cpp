// SPDX-License-Identifier: Apache-2.0

#include "srnn/tape.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "srnn/error.hpp"

namespace srnn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<EMat>;
using MapConst = Eigen::Map<const EMat>;

MapConst as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return MapConst(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kCrossEntropyEps = 1e-12;

}  // namespace

Value Tape::push(Tensor value, std::vector<int> inputs, std::function<void(Tape&, int)> back) {
  nodes_.push_back(Node{std::move(value), std::move(inputs), std::move(back), nullptr});
  return Value(static_cast<int>(nodes_.size()) - 1);
}

void Tape::check(Value v) const {
  if (!v.valid() || static_cast<std::size_t>(v.index()) >= nodes_.size()) {
    throw_internal("value handle does not belong to this tape");
  }
}

const Tensor& Tape::val(Value v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.index())].value;
}

Tensor& Tape::grad_buf(int idx) {
  Tensor& g = grads_[static_cast<std::size_t>(idx)];
  if (g.empty()) g = Tensor::zeros(nodes_[static_cast<std::size_t>(idx)].value.shape());
  return g;
}

Value Tape::constant(Tensor t) { return push(std::move(t), {}, nullptr); }

Value Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return Value(it->second);
  nodes_.push_back(Node{p.value, {}, nullptr, &p});
  int idx = static_cast<int>(nodes_.size()) - 1;
  param_nodes_.emplace(&p, idx);
  return Value(idx);
}

Value Tape::matmul(Value a, Value b) {
  check(a);
  check(b);
  const Tensor& ta = node_val(a.index());
  const Tensor& tb = node_val(b.index());
  std::size_t ar = ta.rank() == 1 ? 1 : ta.rows();
  std::size_t ak = ta.rank() == 1 ? ta.dim(0) : ta.cols();
  std::size_t bk = tb.rank() == 1 ? tb.dim(0) : tb.rows();
  std::size_t bc = tb.rank() == 1 ? 1 : tb.cols();
  if (ta.rank() > 2 || tb.rank() > 2 || ak != bk) {
    throw_dim("matmul shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  }
  std::vector<std::size_t> out_shape;
  if (ta.rank() == 2 && tb.rank() == 2) out_shape = {ar, bc};
  else if (ta.rank() == 2) out_shape = {ar};       // matrix · vector
  else if (tb.rank() == 2) out_shape = {bc};       // row vector · matrix
  else out_shape = {};                             // dot product
  Tensor out(out_shape);
  as_matrix(out, ar, bc).noalias() = as_matrix(ta, ar, ak) * as_matrix(tb, bk, bc);

  auto back = [ar, ak, bk, bc](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& va = t.node_val(n.inputs[0]);
    const Tensor& vb = t.node_val(n.inputs[1]);
    Tensor& ga = t.grad_buf(n.inputs[0]);
    Tensor& gb = t.grad_buf(n.inputs[1]);
    as_matrix(ga, ar, ak).noalias() += as_matrix(g, ar, bc) * as_matrix(vb, bk, bc).transpose();
    as_matrix(gb, bk, bc).noalias() += as_matrix(va, ar, ak).transpose() * as_matrix(g, ar, bc);
  };
  return push(std::move(out), {a.index(), b.index()}, back);
}

Value Tape::matmul_nt(Value a, Value b) {
  check(a);
  check(b);
  const Tensor& ta = node_val(a.index());
  const Tensor& tb = node_val(b.index());
  if (ta.rank() != 2 || tb.rank() != 2 || ta.cols() != tb.cols()) {
    throw_dim("matmul_nt shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  }
  std::size_t r = ta.rows(), k = ta.cols(), c = tb.rows();
  Tensor out({r, c});
  as_matrix(out, r, c).noalias() = as_matrix(ta, r, k) * as_matrix(tb, c, k).transpose();

  auto back = [r, k, c](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& va = t.node_val(n.inputs[0]);
    const Tensor& vb = t.node_val(n.inputs[1]);
    Tensor& ga = t.grad_buf(n.inputs[0]);
    Tensor& gb = t.grad_buf(n.inputs[1]);
    as_matrix(ga, r, k).noalias() += as_matrix(g, r, c) * as_matrix(vb, c, k);
    as_matrix(gb, c, k).noalias() += as_matrix(g, r, c).transpose() * as_matrix(va, r, k);
  };
  return push(std::move(out), {a.index(), b.index()}, back);
}

Value Tape::add(Value a, Value b) {
  check(a);
  check(b);
  const Tensor& ta = node_val(a.index());
  const Tensor& tb = node_val(b.index());
  if (ta.same_shape(tb)) {
    Tensor out = ta;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
    auto back = [](Tape& t, int self) {
      const Node& n = t.nodes_[static_cast<std::size_t>(self)];
      const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
      Tensor& ga = t.grad_buf(n.inputs[0]);
      Tensor& gb = t.grad_buf(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
    };
    return push(std::move(out), {a.index(), b.index()}, back);
  }
  // The one permitted broadcast: bias vector added to each row.
  if (ta.rank() == 2 && tb.rank() == 1 && ta.cols() == tb.dim(0)) {
    Tensor out = ta;
    std::size_t r = ta.rows(), c = ta.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out.at(i, j) += tb[j];
    auto back = [r, c](Tape& t, int self) {
      const Node& n = t.nodes_[static_cast<std::size_t>(self)];
      const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
      Tensor& ga = t.grad_buf(n.inputs[0]);
      Tensor& gb = t.grad_buf(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += g[i * c + j];
    };
    return push(std::move(out), {a.index(), b.index()}, back);
  }
  throw_dim("add shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
}

Value Tape::sub(Value a, Value b) {
  check(a);
  check(b);
  const Tensor& ta = node_val(a.index());
  const Tensor& tb = node_val(b.index());
  if (!ta.same_shape(tb)) {
    throw_dim("sub shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
  auto back = [](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    Tensor& ga = t.grad_buf(n.inputs[0]);
    Tensor& gb = t.grad_buf(n.inputs[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i];
      gb[i] -= g[i];
    }
  };
  return push(std::move(out), {a.index(), b.index()}, back);
}

Value Tape::mul(Value a, Value b) {
  check(a);
  check(b);
  const Tensor& ta = node_val(a.index());
  const Tensor& tb = node_val(b.index());
  if (!ta.same_shape(tb)) {
    throw_dim("mul shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  }
  Tensor out = ta;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
  auto back = [](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& va = t.node_val(n.inputs[0]);
    const Tensor& vb = t.node_val(n.inputs[1]);
    Tensor& ga = t.grad_buf(n.inputs[0]);
    Tensor& gb = t.grad_buf(n.inputs[1]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] += g[i] * vb[i];
      gb[i] += g[i] * va[i];
    }
  };
  return push(std::move(out), {a.index(), b.index()}, back);
}

Value Tape::scale(Value a, double s) {
  check(a);
  Tensor out = node_val(a.index());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  auto back = [s](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    Tensor& ga = t.grad_buf(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
  };
  return push(std::move(out), {a.index()}, back);
}

Value Tape::concat(const std::vector<Value>& xs, int axis) {
  if (xs.empty()) throw_invalid("concat of empty list");
  for (Value v : xs) check(v);
  const Tensor& first = node_val(xs[0].index());
  std::size_t rank = first.rank();
  if (rank == 0 || rank > 2) throw_dim("concat requires rank-1 or rank-2 tensors");
  if (axis != 0 && axis != 1) throw_invalid("concat axis must be 0 or 1");
  if (rank == 1 && axis != 0) throw_dim("rank-1 concat only supports axis 0");

  std::size_t fixed = (axis == 0) ? first.cols() : first.rows();
  for (Value v : xs) {
    const Tensor& t = node_val(v.index());
    if (t.rank() != rank) throw_dim("concat rank mismatch: " + t.shape_str());
    std::size_t f = (axis == 0) ? t.cols() : t.rows();
    if (rank == 2 && f != fixed) {
      throw_dim("concat shape mismatch: " + first.shape_str() + " vs " + t.shape_str());
    }
  }
  // rank-1 axis-0 concat: offsets measured in elements.
  if (rank == 1) {
    std::size_t total = 0;
    std::vector<std::size_t> offsets;
    for (Value v : xs) {
      offsets.push_back(total);
      total += node_val(v.index()).dim(0);
    }
    Tensor out({total});
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Tensor& t = node_val(xs[i].index());
      for (std::size_t j = 0; j < t.size(); ++j) out[offsets[i] + j] = t[j];
    }
    std::vector<int> inputs;
    for (Value v : xs) inputs.push_back(v.index());
    auto back = [offsets](Tape& t, int self) {
      const Node& n = t.nodes_[static_cast<std::size_t>(self)];
      const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        Tensor& gi = t.grad_buf(n.inputs[i]);
        for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += g[offsets[i] + j];
      }
    };
    return push(std::move(out), std::move(inputs), back);
  }

  if (axis == 0) {
    std::size_t rows = 0;
    for (Value v : xs) rows += node_val(v.index()).rows();
    std::size_t cols = fixed;
    Tensor out({rows, cols});
    std::size_t row0 = 0;
    std::vector<std::size_t> row_offsets;
    for (Value v : xs) {
      const Tensor& t = node_val(v.index());
      row_offsets.push_back(row0);
      for (std::size_t i = 0; i < t.size(); ++i) out[row0 * cols + i] = t[i];
      row0 += t.rows();
    }
    std::vector<int> inputs;
    for (Value v : xs) inputs.push_back(v.index());
    auto back = [row_offsets, cols](Tape& t, int self) {
      const Node& n = t.nodes_[static_cast<std::size_t>(self)];
      const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        Tensor& gi = t.grad_buf(n.inputs[i]);
        std::size_t base = row_offsets[i] * cols;
        for (std::size_t j = 0; j < gi.size(); ++j) gi[j] += g[base + j];
      }
    };
    return push(std::move(out), std::move(inputs), back);
  }

  // axis == 1: side-by-side columns.
  std::size_t rows = first.rows();
  std::size_t cols = 0;
  std::vector<std::size_t> col_offsets;
  for (Value v : xs) {
    const Tensor& t = node_val(v.index());
    if (t.rows() != rows) {
      throw_dim("concat shape mismatch: " + first.shape_str() + " vs " + t.shape_str());
    }
    col_offsets.push_back(cols);
    cols += t.cols();
  }
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const Tensor& t = node_val(xs[i].index());
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < t.cols(); ++c) out.at(r, col_offsets[i] + c) = t.at(r, c);
  }
  std::vector<int> inputs;
  for (Value v : xs) inputs.push_back(v.index());
  auto back = [col_offsets, rows, cols](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    for (std::size_t i = 0; i < n.inputs.size(); ++i) {
      Tensor& gi = t.grad_buf(n.inputs[i]);
      std::size_t w = gi.cols();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < w; ++c) gi[r * w + c] += g[r * cols + col_offsets[i] + c];
    }
  };
  return push(std::move(out), std::move(inputs), back);
}

Value Tape::sum_list(const std::vector<Value>& xs) {
  if (xs.empty()) throw_invalid("sum_list of empty list");
  for (Value v : xs) check(v);
  const Tensor& first = node_val(xs[0].index());
  Tensor out = first;
  // Left-to-right fold, bit-identical to chained add.
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const Tensor& t = node_val(xs[i].index());
    if (!t.same_shape(first)) {
      throw_dim("sum_list shape mismatch: " + first.shape_str() + " vs " + t.shape_str());
    }
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += t[j];
  }
  std::vector<int> inputs;
  for (Value v : xs) inputs.push_back(v.index());
  auto back = [](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    for (int in : n.inputs) {
      Tensor& gi = t.grad_buf(in);
      for (std::size_t j = 0; j < g.size(); ++j) gi[j] += g[j];
    }
  };
  return push(std::move(out), std::move(inputs), back);
}

Value Tape::sigmoid(Value x) {
  check(x);
  Tensor out = node_val(x.index());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = stable_sigmoid(out[i]);
  auto back = [](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& y = n.value;
    Tensor& gx = t.grad_buf(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  };
  return push(std::move(out), {x.index()}, back);
}

Value Tape::tanh(Value x) {
  check(x);
  Tensor out = node_val(x.index());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  auto back = [](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& y = n.value;
    Tensor& gx = t.grad_buf(n.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * (1.0 - y[i] * y[i]);
  };
  return push(std::move(out), {x.index()}, back);
}

Value Tape::softmax(Value x) {
  check(x);
  const Tensor& in = node_val(x.index());
  if (in.rank() == 0 || in.rank() > 2) throw_dim("softmax requires rank-1 or rank-2 input");
  std::size_t rows = in.rows(), cols = in.cols();
  if (cols == 0) throw_dim("softmax over empty vector");
  Tensor out = in;
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = out[r * cols];
    for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, out[r * cols + c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      double e = std::exp(out[r * cols + c] - mx);
      out[r * cols + c] = e;
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= sum;
  }
  auto back = [rows, cols](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& y = n.value;
    Tensor& gx = t.grad_buf(n.inputs[0]);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
    }
  };
  return push(std::move(out), {x.index()}, back);
}

Value Tape::slice(Value x, int axis, std::size_t start, std::size_t len) {
  check(x);
  const Tensor& in = node_val(x.index());
  if (axis != 0 && axis != 1) throw_invalid("slice axis must be 0 or 1");
  if (in.rank() == 1) {
    if (axis != 0 || start + len > in.dim(0)) {
      throw_dim("slice out of range for shape " + in.shape_str());
    }
    Tensor out({len});
    for (std::size_t i = 0; i < len; ++i) out[i] = in[start + i];
    auto back = [start, len](Tape& t, int self) {
      const Node& n = t.nodes_[static_cast<std::size_t>(self)];
      const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
      Tensor& gx = t.grad_buf(n.inputs[0]);
      for (std::size_t i = 0; i < len; ++i) gx[start + i] += g[i];
    };
    return push(std::move(out), {x.index()}, back);
  }
  if (in.rank() != 2) throw_dim("slice requires rank-1 or rank-2 input");
  std::size_t rows = in.rows(), cols = in.cols();
  if (axis == 0) {
    if (start + len > rows) throw_dim("slice out of range for shape " + in.shape_str());
    Tensor out({len, cols});
    for (std::size_t i = 0; i < len * cols; ++i) out[i] = in[start * cols + i];
    auto back = [start, cols](Tape& t, int self) {
      const Node& n = t.nodes_[static_cast<std::size_t>(self)];
      const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
      Tensor& gx = t.grad_buf(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[start * cols + i] += g[i];
    };
    return push(std::move(out), {x.index()}, back);
  }
  if (start + len > cols) throw_dim("slice out of range for shape " + in.shape_str());
  Tensor out({rows, len});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < len; ++c) out.at(r, c) = in.at(r, start + c);
  auto back = [start, len, cols](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    Tensor& gx = t.grad_buf(n.inputs[0]);
    std::size_t rows2 = g.size() / len;
    for (std::size_t r = 0; r < rows2; ++r)
      for (std::size_t c = 0; c < len; ++c) gx[r * cols + start + c] += g[r * len + c];
  };
  return push(std::move(out), {x.index()}, back);
}

Value Tape::sum_all(Value x) {
  check(x);
  const Tensor& in = node_val(x.index());
  double s = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) s += in[i];
  auto back = [](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    Tensor& gx = t.grad_buf(n.inputs[0]);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  };
  return push(Tensor::scalar(s), {x.index()}, back);
}

Value Tape::euclidean_loss(Value pred, Value target) {
  check(pred);
  check(target);
  const Tensor& p = node_val(pred.index());
  const Tensor& t = node_val(target.index());
  if (!p.same_shape(t)) {
    throw_dim("euclidean_loss shape mismatch: " + p.shape_str() + " vs " + t.shape_str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double d = p[i] - t[i];
    s += 0.5 * d * d;
  }
  auto back = [](Tape& tp, int self) {
    const Node& n = tp.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = tp.grads_[static_cast<std::size_t>(self)];
    const Tensor& vp = tp.node_val(n.inputs[0]);
    const Tensor& vt = tp.node_val(n.inputs[1]);
    Tensor& gp = tp.grad_buf(n.inputs[0]);
    Tensor& gt = tp.grad_buf(n.inputs[1]);
    for (std::size_t i = 0; i < vp.size(); ++i) {
      double d = g[0] * (vp[i] - vt[i]);
      gp[i] += d;
      gt[i] -= d;
    }
  };
  return push(Tensor::scalar(s), {pred.index(), target.index()}, back);
}

Value Tape::cross_entropy_loss(Value probs, int class_index) {
  check(probs);
  const Tensor& p = node_val(probs.index());
  if (p.rank() != 1) throw_dim("cross_entropy_loss expects a rank-1 probability vector");
  if (class_index < 0 || static_cast<std::size_t>(class_index) >= p.dim(0)) {
    throw_invalid("class index " + std::to_string(class_index) + " out of range for " +
                  std::to_string(p.dim(0)) + " classes");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) sum += p[i];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw_invalid("cross_entropy_loss input does not sum to 1 (got " + std::to_string(sum) + ")");
  }
  std::size_t idx = static_cast<std::size_t>(class_index);
  double loss = -std::log(p[idx] + kCrossEntropyEps);
  auto back = [idx](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& vp = t.node_val(n.inputs[0]);
    Tensor& gp = t.grad_buf(n.inputs[0]);
    gp[idx] += -g[0] / (vp[idx] + kCrossEntropyEps);
  };
  return push(Tensor::scalar(loss), {probs.index()}, back);
}

Value Tape::cross_entropy_rows(Value probs, const std::vector<int>& classes) {
  check(probs);
  const Tensor& p = node_val(probs.index());
  if (p.rank() != 2) throw_dim("cross_entropy_rows expects a rank-2 probability matrix");
  if (classes.size() != p.rows()) {
    throw_dim("cross_entropy_rows: " + std::to_string(classes.size()) + " labels for " +
              std::to_string(p.rows()) + " rows");
  }
  std::size_t cols = p.cols();
  double loss = 0.0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    if (classes[r] < 0) continue;  // masked row
    if (static_cast<std::size_t>(classes[r]) >= cols) {
      throw_invalid("class index " + std::to_string(classes[r]) + " out of range for " +
                    std::to_string(cols) + " classes");
    }
    loss += -std::log(p.at(r, static_cast<std::size_t>(classes[r])) + kCrossEntropyEps);
  }
  auto back = [classes, cols](Tape& t, int self) {
    const Node& n = t.nodes_[static_cast<std::size_t>(self)];
    const Tensor& g = t.grads_[static_cast<std::size_t>(self)];
    const Tensor& vp = t.node_val(n.inputs[0]);
    Tensor& gp = t.grad_buf(n.inputs[0]);
    for (std::size_t r = 0; r < classes.size(); ++r) {
      if (classes[r] < 0) continue;
      std::size_t c = static_cast<std::size_t>(classes[r]);
      gp[r * cols + c] += -g[0] / (vp[r * cols + c] + kCrossEntropyEps);
    }
  };
  return push(Tensor::scalar(loss), {probs.index()}, back);
}

void Tape::backward(Value loss) {
  check(loss);
  const Tensor& lv = node_val(loss.index());
  if (lv.rank() != 0) throw_invalid("backward requires a scalar loss, got " + lv.shape_str());

  grads_.assign(nodes_.size(), Tensor());
  grads_[static_cast<std::size_t>(loss.index())] = Tensor::scalar(1.0);

  for (int i = loss.index(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    Tensor& g = grads_[static_cast<std::size_t>(i)];
    if (g.empty()) continue;
    if (n.back) {
      n.back(*this, i);
    } else if (n.parameter) {
      Tensor& pg = n.parameter->grad;
      for (std::size_t j = 0; j < pg.size(); ++j) pg[j] += g[j];
    }
  }
  grads_.clear();
}

double gradcheck(const std::function<Value(Tape&, Value)>& f, const Tensor& point, double h) {
  Parameter p("gradcheck/x", point);
  Tape tape;
  Value loss = f(tape, tape.param(p));
  if (tape.val(loss).rank() != 0) throw_invalid("gradcheck function must be scalar-valued");
  tape.backward(loss);

  double max_err = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    Tensor plus = point;
    plus[i] += h;
    Tensor minus = point;
    minus[i] -= h;
    Tape tp;
    double fp = tp.val(f(tp, tp.constant(plus)))[0];
    Tape tm;
    double fm = tm.val(f(tm, tm.constant(minus)))[0];
    double numeric = (fp - fm) / (2.0 * h);
    double analytic = p.grad[i];
    double denom = std::max(std::max(std::abs(analytic), std::abs(numeric)), 1e-8);
    max_err = std::max(max_err, std::abs(analytic - numeric) / denom);
  }
  return max_err;
}

}  // namespace srnn
