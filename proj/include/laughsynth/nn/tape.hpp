#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace laughsynth::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Raised when an op produces NaN/Inf, or when an optimizer sees a
/// non-finite gradient.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A named trainable matrix. Gradients accumulate into `grad` after
/// Tape::backward.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  bool trainable = true;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Every op appends one node holding its value and a
/// closure that pushes the node's gradient into its parents. Nodes are
/// only referenced by index, so closures stay valid as the tape grows.
template <typename Scalar>
class Tape {
 public:
  using MatrixType = Matrix<Scalar>;
  using BackwardFn = std::function<void(Tape&, const MatrixType& grad)>;

  Var constant(MatrixType value) { return push(std::move(value), false, {}, nullptr, "constant"); }

  Var variable(MatrixType value) { return push(std::move(value), true, {}, nullptr, "variable"); }

  Var parameter(Parameter<Scalar>& p) {
    return push(p.value, p.trainable, {}, &p, p.name.c_str());
  }

  /// Appends an op result. `parents` decides whether the node needs a
  /// gradient; `backward` is skipped entirely when it does not.
  Var record(MatrixType value, std::initializer_list<Var> parents, BackwardFn backward,
             const char* op) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, std::move(backward), nullptr, op);
  }

  const MatrixType& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  Eigen::Index rows(Var v) const { return nodes_[v.id].value.rows(); }
  Eigen::Index cols(Var v) const { return nodes_[v.id].value.cols(); }

  /// Gradient of `v` after backward(); zeros if nothing flowed into it.
  MatrixType grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.has_grad) return n.grad;
    return MatrixType::Zero(n.value.rows(), n.value.cols());
  }

  /// Accumulation target used by backward closures. Returns nullptr when
  /// the node does not participate in differentiation.
  MatrixType* grad_target(Var v) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return nullptr;
    if (!n.has_grad) {
      n.grad.setZero(n.value.rows(), n.value.cols());
      n.has_grad = true;
    }
    return &n.grad;
  }

  /// Back-propagates from a 1x1 node and adds the results into any bound
  /// Parameter::grad.
  void backward(Var root) {
    if (value(root).size() != 1) throw ShapeError("backward: root must be a scalar");
    MatrixType* seed = grad_target(root);
    if (seed == nullptr) return;
    (*seed)(0, 0) += Scalar(1);
    for (std::size_t i = root.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad) continue;
      if (n.backward) {
        // The closure may grow parent grads but never this node's, so a
        // copy is unnecessary; move out to keep the reference stable.
        MatrixType g = std::move(n.grad);
        n.backward(*this, g);
        n.grad = std::move(g);
      }
      if (n.param != nullptr) {
        if (n.param->grad.size() != n.value.size()) n.param->zero_grad();
        n.param->grad += n.grad;
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    MatrixType value;
    MatrixType grad;
    BackwardFn backward;
    Parameter<Scalar>* param = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
  };

  Var push(MatrixType value, bool requires_grad, BackwardFn backward, Parameter<Scalar>* param,
           const char* op) {
    if (!value.allFinite()) throw NonFiniteError(std::string("non-finite value produced by ") + op);
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    n.param = param;
    nodes_.push_back(std::move(n));
    return Var{nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace laughsynth::nn
