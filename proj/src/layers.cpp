// SPDX-License-Identifier: Apache-2.0

#include "srnn/layers.hpp"

#include "srnn/error.hpp"
#include "srnn/rng.hpp"

namespace srnn {

namespace {

Parameter make_param(const std::string& name, std::size_t rows, std::size_t cols) {
  return Parameter(name, Tensor::zeros({rows, cols}));
}

Parameter make_bias(const std::string& name, std::size_t n) {
  return Parameter(name, Tensor::zeros({n}));
}

}  // namespace

StackedUnit::StackedUnit(UnitSpec spec) : spec_(std::move(spec)) {
  const std::string& id = spec_.factor_id;
  for (std::size_t i = 0; i < spec_.front_len; ++i) {
    std::string base = id + "/front" + std::to_string(i) + "/";
    std::size_t in = spec_.front_in(i), w = spec_.layers[i].width;
    front_.push_back(FCLayer{make_param(base + "W", w, in), make_bias(base + "b", w), true});
  }
  for (std::size_t i = 0; i < spec_.stack_len(); ++i) {
    const LayerSpec& l = spec_.layers[spec_.front_len + i];
    std::string base = id + "/stack" + std::to_string(i) + "/";
    std::size_t in = spec_.stack_in(i), w = l.width;
    StackLayer sl;
    sl.kind = l.kind;
    switch (l.kind) {
      case LayerKind::FC:
        sl.fc = FCLayer{make_param(base + "W", w, in), make_bias(base + "b", w), true};
        break;
      case LayerKind::RNN:
        sl.rnn = RNNLayer{make_param(base + "W", w, in), make_param(base + "U", w, w),
                          make_bias(base + "b", w)};
        break;
      case LayerKind::LSTM:
        sl.lstm = LSTMLayer{
            make_param(base + "Wi", w, in), make_param(base + "Ui", w, w), make_bias(base + "bi", w),
            make_param(base + "Wf", w, in), make_param(base + "Uf", w, w), make_bias(base + "bf", w),
            make_param(base + "Wo", w, in), make_param(base + "Uo", w, w), make_bias(base + "bo", w),
            make_param(base + "Wg", w, in), make_param(base + "Ug", w, w), make_bias(base + "bg", w)};
        break;
      case LayerKind::Softmax:
        throw_internal("softmax layer in materialized stack");
    }
    stack_.push_back(std::move(sl));
  }
  std::size_t head_in = spec_.head_input_dim();
  for (std::size_t k = 0; k < spec_.heads.size(); ++k) {
    std::string base = id + "/head" + std::to_string(k) + "/";
    std::size_t w = spec_.heads[k].width;
    heads_.push_back(FCLayer{make_param(base + "W", w, head_in), make_bias(base + "b", w), false});
    head_kinds_.push_back(spec_.heads[k].kind);
  }
}

std::vector<Parameter*> StackedUnit::parameters() {
  std::vector<Parameter*> out;
  for (FCLayer& l : front_) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  for (StackLayer& sl : stack_) {
    switch (sl.kind) {
      case LayerKind::FC:
        out.push_back(&sl.fc.W);
        out.push_back(&sl.fc.b);
        break;
      case LayerKind::RNN:
        out.push_back(&sl.rnn.W);
        out.push_back(&sl.rnn.U);
        out.push_back(&sl.rnn.b);
        break;
      case LayerKind::LSTM: {
        LSTMLayer& m = sl.lstm;
        for (Parameter* p : {&m.W_i, &m.U_i, &m.b_i, &m.W_f, &m.U_f, &m.b_f, &m.W_o, &m.U_o,
                             &m.b_o, &m.W_g, &m.U_g, &m.b_g}) {
          out.push_back(p);
        }
        break;
      }
      case LayerKind::Softmax: break;
    }
  }
  for (FCLayer& l : heads_) {
    out.push_back(&l.W);
    out.push_back(&l.b);
  }
  return out;
}

std::vector<const Parameter*> StackedUnit::parameters() const {
  auto* self = const_cast<StackedUnit*>(this);
  std::vector<Parameter*> ps = self->parameters();
  return {ps.begin(), ps.end()};
}

void StackedUnit::init_params(std::uint64_t seed) {
  Rng rng(seed);
  for (Parameter* p : parameters()) {
    if (p->value.rank() == 2) {
      for (std::size_t i = 0; i < p->value.size(); ++i) {
        p->value[i] = rng.uniform(-0.08, 0.08);
      }
    } else {
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] = 0.0;
    }
    p->zero_grad();
  }
  for (StackLayer& sl : stack_) {
    if (sl.kind == LayerKind::LSTM) {
      for (std::size_t i = 0; i < sl.lstm.b_f.value.size(); ++i) sl.lstm.b_f.value[i] = 1.0;
    }
  }
}

RecurrentState StackedUnit::zero_state(Tape& tape, std::size_t batch) {
  RecurrentState st;
  for (const StackLayer& sl : stack_) {
    std::size_t w = 0;
    switch (sl.kind) {
      case LayerKind::FC: break;
      case LayerKind::RNN: w = sl.rnn.b.value.dim(0); break;
      case LayerKind::LSTM: w = sl.lstm.b_i.value.dim(0); break;
      case LayerKind::Softmax: break;
    }
    if (w) {
      st.h.push_back(tape.constant(Tensor::zeros({batch, w})));
      st.c.push_back(sl.kind == LayerKind::LSTM ? tape.constant(Tensor::zeros({batch, w}))
                                                : Value());
    } else {
      st.h.push_back(Value());
      st.c.push_back(Value());
    }
  }
  return st;
}

StackedUnit::StepOut StackedUnit::step(Tape& tape, Value x, const RecurrentState& state,
                                       std::vector<Tensor>* cell_capture) {
  const Tensor& xt = tape.val(x);
  if (xt.rank() != 2 || xt.cols() != spec_.input_dim) {
    throw_dim("unit '" + spec_.factor_id + "' expects input [batch x " +
              std::to_string(spec_.input_dim) + "], got " + xt.shape_str());
  }
  if (state.h.size() != stack_.size()) {
    throw_dim("unit '" + spec_.factor_id + "' state has " + std::to_string(state.h.size()) +
              " layers, expected " + std::to_string(stack_.size()));
  }

  Value x_eff = x;
  for (FCLayer& l : front_) {
    Value z = tape.add(tape.matmul_nt(x_eff, tape.param(l.W)), tape.param(l.b));
    x_eff = tape.tanh(z);
  }

  StepOut out;
  out.state.h.resize(stack_.size());
  out.state.c.resize(stack_.size());
  std::vector<Value> stack_outputs;
  Value prev;
  for (std::size_t i = 0; i < stack_.size(); ++i) {
    Value in;
    if (i == 0) {
      in = x_eff;
    } else if (spec_.skip_connections) {
      in = tape.concat({x_eff, prev}, 1);
    } else {
      in = prev;
    }
    StackLayer& sl = stack_[i];
    Value h;
    switch (sl.kind) {
      case LayerKind::FC: {
        h = tape.tanh(tape.add(tape.matmul_nt(in, tape.param(sl.fc.W)), tape.param(sl.fc.b)));
        if (cell_capture) cell_capture->push_back(Tensor());
        break;
      }
      case LayerKind::RNN: {
        Value z = tape.add(tape.add(tape.matmul_nt(in, tape.param(sl.rnn.W)),
                                    tape.matmul_nt(state.h[i], tape.param(sl.rnn.U))),
                           tape.param(sl.rnn.b));
        h = tape.tanh(z);
        out.state.h[i] = h;
        if (cell_capture) cell_capture->push_back(Tensor());
        break;
      }
      case LayerKind::LSTM: {
        LSTMLayer& m = sl.lstm;
        auto gate = [&](Parameter& W, Parameter& U, Parameter& b) {
          return tape.add(tape.add(tape.matmul_nt(in, tape.param(W)),
                                   tape.matmul_nt(state.h[i], tape.param(U))),
                          tape.param(b));
        };
        Value ig = tape.sigmoid(gate(m.W_i, m.U_i, m.b_i));
        Value fg = tape.sigmoid(gate(m.W_f, m.U_f, m.b_f));
        Value og = tape.sigmoid(gate(m.W_o, m.U_o, m.b_o));
        Value gg = tape.tanh(gate(m.W_g, m.U_g, m.b_g));
        Value c = tape.add(tape.mul(fg, state.c[i]), tape.mul(ig, gg));
        h = tape.mul(og, tape.tanh(c));
        out.state.h[i] = h;
        out.state.c[i] = c;
        if (cell_capture) cell_capture->push_back(tape.val(c));
        break;
      }
      case LayerKind::Softmax:
        throw_internal("softmax layer in materialized stack");
    }
    stack_outputs.push_back(h);
    prev = h;
  }

  if (stack_.empty()) {
    out.features = x_eff;
    out.top = x_eff;
  } else if (spec_.skip_connections) {
    std::vector<Value> parts{x_eff};
    parts.insert(parts.end(), stack_outputs.begin(), stack_outputs.end());
    out.features = tape.concat(parts, 1);
    out.top = stack_outputs.back();
  } else {
    out.features = stack_outputs.back();
    out.top = stack_outputs.back();
  }

  for (std::size_t k = 0; k < heads_.size(); ++k) {
    Value z = tape.add(tape.matmul_nt(out.features, tape.param(heads_[k].W)),
                       tape.param(heads_[k].b));
    out.heads.push_back(head_kinds_[k] == LayerKind::Softmax ? tape.softmax(z) : z);
  }
  return out;
}

std::vector<StackedUnit::StepOut> StackedUnit::forward_sequence(Tape& tape,
                                                                const std::vector<Value>& xs) {
  if (xs.empty()) throw_invalid("forward_sequence on empty sequence");
  std::vector<StepOut> outs;
  RecurrentState st = zero_state(tape, tape.val(xs[0]).rows());
  for (Value x : xs) {
    StepOut o = step(tape, x, st);
    // FC slots carry no state; keep the zero-state handles so indices
    // stay aligned.
    for (std::size_t i = 0; i < st.h.size(); ++i) {
      if (o.state.h[i].valid()) st.h[i] = o.state.h[i];
      if (o.state.c[i].valid()) st.c[i] = o.state.c[i];
    }
    outs.push_back(std::move(o));
  }
  return outs;
}

}  // namespace srnn
