#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "laughsynth/nn/grad_check.hpp"
#include "laughsynth/random.hpp"

namespace laughsynth::gradcheck {

inline constexpr double kTolerance = 1e-4;

/// One differentiable op: builds a scalar graph plus random inputs for a
/// seed. Outputs are reduced with fixed random weights.
struct OpCase {
  std::string name;
  std::function<std::pair<nn::GraphBuilder, std::vector<nn::Matrix<double>>>(Rng&, std::uint64_t)> make;
};

/// Every op of the autodiff kernel, the three seq2seq losses and the
/// generator blocks.
std::vector<OpCase> catalog();

struct OpReport {
  std::string name;
  double worst = 0.0;  // max relative error over seeds
  int seeds = 0;
  double seconds = 0.0;
};

/// Seeds 1..`seeds` per op; `filter` keeps ops whose name contains it.
std::vector<OpReport> run_catalog(int seeds = 20, const std::string& filter = "");

}  // namespace laughsynth::gradcheck
