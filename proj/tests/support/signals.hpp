#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

#include "laughsynth/random.hpp"

namespace laughsynth::testing {

inline Eigen::VectorXd sine(Eigen::Index n, double freq, double rate, double amplitude = 1.0) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = amplitude * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return x;
}

inline Eigen::VectorXd white_noise(Eigen::Index n, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = scale * rng.normal();
  return x;
}

/// Voiced bursts with gliding pitch separated by pauses; a stand-in for a
/// recorded laugh.
inline Eigen::VectorXd laugh_like(Eigen::Index n, double rate, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  const Eigen::Index burst = static_cast<Eigen::Index>(0.12 * rate);
  const Eigen::Index period = static_cast<Eigen::Index>(0.2 * rate);
  for (Eigen::Index start = period / 4; start + burst < n; start += period) {
    const double f0 = rng.uniform(180.0, 300.0);
    double phase = 0.0;
    for (Eigen::Index i = 0; i < burst; ++i) {
      const double f = f0 * (1.0 - 0.2 * static_cast<double>(i) / burst);
      phase += 2.0 * std::numbers::pi * f / rate;
      const double env = std::sin(std::numbers::pi * static_cast<double>(i) / burst);
      double v = 0.0;
      for (int h = 1; h <= 5; ++h) v += std::sin(h * phase) / h;
      x(start + i) = 0.3 * env * v;
    }
  }
  return x;
}

inline double snr_db(const Eigen::VectorXd& reference, const Eigen::VectorXd& estimate) {
  return 10.0 * std::log10(reference.squaredNorm() / (reference - estimate).squaredNorm());
}

}  // namespace laughsynth::testing
