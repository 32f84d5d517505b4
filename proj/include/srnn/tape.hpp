// SPDX-License-Identifier: Apache-2.0

#ifndef SRNN_TAPE_HPP
#define SRNN_TAPE_HPP

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "srnn/tensor.hpp"

namespace srnn {

// Named trainable tensor with a gradient accumulator of the same shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad = Tensor::zeros(value.shape()); }
};

class Tape;

// Handle to a value recorded on a tape.
class Value {
 public:
  Value() = default;
  int index() const { return idx_; }
  bool valid() const { return idx_ >= 0; }

 private:
  friend class Tape;
  explicit Value(int i) : idx_(i) {}
  int idx_ = -1;
};

// Append-only record of tensor operations. forward values are computed
// eagerly; backward() replays the records in reverse, accumulating
// gradients into every reachable Parameter.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value constant(Tensor t);
  // One leaf per parameter per tape; repeated calls return the same node.
  Value param(Parameter& p);

  const Tensor& val(Value v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // a[r×k] · b[k×c]; rank-1 operands act as a single row (a) or column (b).
  Value matmul(Value a, Value b);
  // a[r×k] · bᵀ where b is [c×k]; the layer hot path (x · Wᵀ).
  Value matmul_nt(Value a, Value b);
  // Same-shape elementwise add, or [r×c] + [c] row broadcast (bias).
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value mul(Value a, Value b);  // elementwise
  Value scale(Value a, double s);
  Value concat(const std::vector<Value>& xs, int axis);
  Value sum_list(const std::vector<Value>& xs);
  Value sigmoid(Value x);
  Value tanh(Value x);
  Value softmax(Value x);  // row-wise, max-subtracted
  Value slice(Value x, int axis, std::size_t start, std::size_t len);
  Value sum_all(Value x);  // reduce to scalar

  // ½·Σ(pred−target)²; gradient of pred is (pred−target).
  Value euclidean_loss(Value pred, Value target);
  // −log(probs[class_index] + 1e-12) for a rank-1 probability vector.
  Value cross_entropy_loss(Value probs, int class_index);
  // Row-wise cross entropy over [B×K] probabilities, summed over rows.
  // A class index < 0 masks that row out of the loss.
  Value cross_entropy_rows(Value probs, const std::vector<int>& classes);

  // Accumulates d loss / d parameter into every reachable Parameter's
  // grad. May be called repeatedly (contributions sum).
  void backward(Value loss);

 private:
  struct Node {
    Tensor value;
    std::vector<int> inputs;
    std::function<void(Tape&, int)> back;
    Parameter* parameter = nullptr;
  };

  Value push(Tensor value, std::vector<int> inputs, std::function<void(Tape&, int)> back);
  Tensor& grad_buf(int idx);
  const Tensor& node_val(int idx) const { return nodes_[static_cast<std::size_t>(idx)].value; }
  void check(Value v) const;

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

// Max relative error between tape gradients of the scalar function f and
// central finite differences at `point`, with denominator
// max(|analytic|, |numeric|, 1e-8).
double gradcheck(const std::function<Value(Tape&, Value)>& f, const Tensor& point,
                 double h = 1e-6);

}  // namespace srnn

#endif
