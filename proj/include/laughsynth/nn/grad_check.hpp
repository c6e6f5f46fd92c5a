#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "laughsynth/nn/ops.hpp"

namespace laughsynth::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_abs_error = 0.0;
};

/// Builds a scalar graph from input variables.
using GraphBuilder = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients of `build` against central
/// differences with step `eps`, over every entry of every input.
///
/// Relative error per entry is |a − n| / max(|a|, |n|, floor), where
/// the floor keeps entries whose true gradient is ~0 from turning
/// finite-difference noise into huge ratios.
inline GradCheckResult grad_check(const GraphBuilder& build, std::vector<Matrix<double>> inputs, double eps = 1e-5,
                                  double floor = 1e-5) {
  auto evaluate = [&](const std::vector<Matrix<double>>& xs) {
    Tape<double> t;
    std::vector<Var> vars;
    for (const auto& x : xs) vars.push_back(t.constant(x));
    return t.value(build(t, vars))(0, 0);
  };

  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& x : inputs) vars.push_back(tape.variable(x));
  const Var out = build(tape, vars);
  tape.backward(out);

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix<double> analytic = tape.grad(vars[k]);
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double saved = inputs[k](i);
      inputs[k](i) = saved + eps;
      const double up = evaluate(inputs);
      inputs[k](i) = saved - eps;
      const double down = evaluate(inputs);
      inputs[k](i) = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic(i);
      const double abs_err = std::abs(a - numeric);
      result.max_abs_error = std::max(result.max_abs_error, abs_err);
      result.max_relative_error =
          std::max(result.max_relative_error, abs_err / std::max({std::abs(a), std::abs(numeric), floor}));
    }
  }
  return result;
}

}  // namespace laughsynth::nn
