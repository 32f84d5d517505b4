// SPDX-License-Identifier: Apache-2.0

#ifndef SRNN_LAYERS_HPP
#define SRNN_LAYERS_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "srnn/arch.hpp"
#include "srnn/tape.hpp"

namespace srnn {

struct FCLayer {
  Parameter W;  // [out×in]
  Parameter b;  // [out]
  bool tanh_activation = true;
};

// h' = tanh(W x + U h + b)
struct RNNLayer {
  Parameter W;  // [hidden×in]
  Parameter U;  // [hidden×hidden]
  Parameter b;  // [hidden]
};

// Standard no-peephole LSTM. Forget bias initializes to 1.
struct LSTMLayer {
  Parameter W_i, U_i, b_i;
  Parameter W_f, U_f, b_f;
  Parameter W_o, U_o, b_o;
  Parameter W_g, U_g, b_g;
};

// Per-stack-layer recurrent state. FC layers keep no state; their slots
// hold invalid handles so indices line up with the stack.
struct RecurrentState {
  std::vector<Value> h;
  std::vector<Value> c;
};

// A UnitSpec materialized into parameters: front FC cascade, the
// skip-connected stack, and the output heads.
class StackedUnit {
 public:
  StackedUnit() = default;
  explicit StackedUnit(UnitSpec spec);

  const UnitSpec& spec() const { return spec_; }

  // Weights ~ Uniform(−0.08, 0.08) in registry order from the seeded
  // generator; biases zero except LSTM forget bias = 1.
  void init_params(std::uint64_t seed);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  RecurrentState zero_state(Tape& tape, std::size_t batch);

  struct StepOut {
    std::vector<Value> heads;  // per-head outputs (node units)
    Value top;                 // top-of-stack output (edge unit output)
    Value features;            // head input: [x ; h_1 ; … ; h_L] under skip
    RecurrentState state;
  };

  // One timestep on a [batch×input_dim] input. When `cell_capture` is
  // non-null the LSTM cell tensors of this step are copied into it, one
  // entry per stack layer (empty tensors for non-LSTM layers).
  StepOut step(Tape& tape, Value x, const RecurrentState& state,
               std::vector<Tensor>* cell_capture = nullptr);

  // Folds step over t = 0..T−1 from the zero state.
  std::vector<StepOut> forward_sequence(Tape& tape, const std::vector<Value>& xs);

 private:
  struct StackLayer {
    LayerKind kind = LayerKind::FC;
    FCLayer fc;
    RNNLayer rnn;
    LSTMLayer lstm;
  };

  UnitSpec spec_;
  std::vector<FCLayer> front_;
  std::vector<StackLayer> stack_;
  std::vector<FCLayer> heads_;
  std::vector<LayerKind> head_kinds_;
};

}  // namespace srnn

#endif
