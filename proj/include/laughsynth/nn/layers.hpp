#pragma once

#include <string>
#include <unordered_map>

#include "laughsynth/nn/conv.hpp"
#include "laughsynth/nn/parameters.hpp"

namespace laughsynth::nn {

/// Puts a store's parameters on a tape on first use. In training mode
/// they become gradient-collecting parameter nodes; otherwise plain
/// constants, so a const model can run inference.
template <typename Scalar>
class Binder {
 public:
  Binder(Tape<Scalar>& tape, const ParameterStore<Scalar>& store, bool train)
      : tape_(tape), store_(store), train_(train) {}

  Tape<Scalar>& tape() { return tape_; }

  Var operator()(const std::string& name) {
    if (auto it = bound_.find(name); it != bound_.end()) return it->second;
    const Parameter<Scalar>* p = store_.find(name);
    if (!p) throw std::out_of_range("unknown parameter " + name);
    // Training needs the mutable parameter to route gradients into it;
    // the store is only read otherwise.
    const Var v = train_ ? tape_.parameter(const_cast<Parameter<Scalar>&>(*p)) : tape_.constant(p->value);
    bound_.emplace(name, v);
    return v;
  }

  /// Uses `v` for `name` instead of the stored value (e.g. a tape input
  /// in a gradient check).
  void bind(const std::string& name, Var v) { bound_.insert_or_assign(name, v); }

  Var conv(Var x, const std::string& name, ConvSpec spec = {}) {
    return conv1d(tape_, x, (*this)(name + ".w"), (*this)(name + ".b"), spec);
  }

  Var highway(Var x, const std::string& name, ConvSpec spec) {
    return highway_block(tape_, x, (*this)(name + ".w"), (*this)(name + ".b"), spec);
  }

  Var upsample(Var x, const std::string& name, int stride, int kernel) {
    return transposed_conv1d(tape_, x, (*this)(name + ".w"), (*this)(name + ".b"), stride, kernel);
  }

 private:
  Tape<Scalar>& tape_;
  const ParameterStore<Scalar>& store_;
  bool train_;
  std::unordered_map<std::string, Var> bound_;
};

template <typename Scalar>
void add_conv(ParameterStore<Scalar>& store, const std::string& name, Eigen::Index in, Eigen::Index out, int kernel,
              Rng& rng) {
  store.add_uniform(name + ".w", out, kernel * in, kernel * in, rng);
  store.add_constant(name + ".b", out, 1, Scalar(0));
}

template <typename Scalar>
void add_highway(ParameterStore<Scalar>& store, const std::string& name, Eigen::Index channels, int kernel, Rng& rng) {
  add_conv(store, name, channels, 2 * channels, kernel, rng);
}

template <typename Scalar>
void add_transposed_conv(ParameterStore<Scalar>& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                         int kernel, int stride, Rng& rng) {
  // Each output sample receives kernel/stride taps from each input channel.
  store.add_uniform(name + ".w", kernel * out, in, in * std::max(1, kernel / stride), rng);
  store.add_constant(name + ".b", out, 1, Scalar(0));
}

}  // namespace laughsynth::nn
