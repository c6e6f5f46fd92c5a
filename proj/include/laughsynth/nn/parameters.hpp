#pragma once

#include <cmath>
#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "laughsynth/nn/tape.hpp"
#include "laughsynth/random.hpp"

namespace laughsynth::nn {

/// Owns a model's parameters in creation order. Addresses are stable, so
/// layers may keep references into the store.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter<Scalar>& add(std::string name, Matrix<Scalar> value, bool trainable = true) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
    index_.emplace(name, params_.size());
    Parameter<Scalar>& p = params_.emplace_back();
    p.name = std::move(name);
    p.value = std::move(value);
    p.trainable = trainable;
    p.zero_grad();
    return p;
  }

  /// Uniform in ±sqrt(3/fan_in), i.e. unit-variance-preserving for
  /// unit-variance inputs.
  Parameter<Scalar>& add_uniform(std::string name, Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
    const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
    Matrix<Scalar> v(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) v(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
    return add(std::move(name), std::move(v));
  }

  Parameter<Scalar>& add_constant(std::string name, Eigen::Index rows, Eigen::Index cols, Scalar value) {
    return add(std::move(name), Matrix<Scalar>::Constant(rows, cols, value));
  }

  Parameter<Scalar>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Parameter<Scalar>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  Parameter<Scalar>& at(const std::string& name) {
    auto* p = find(name);
    if (p == nullptr) throw std::out_of_range("no parameter named " + name);
    return *p;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::deque<Parameter<Scalar>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace laughsynth::nn
