#pragma once

#include <random>

#include "cascade/plant.hpp"

namespace cascade::testing {

/// Two-channel embedding of the scalar recirculation loop: channel speeds
/// (2*lambda, -2*lambda) on the half-length domains, unit cross reflections,
/// output injected at x = 1.
inline PlantSpec make_two_channel_fold(double a, double lambda, double c) {
  PlantSpec spec;
  spec.n = spec.m = spec.p = 1;
  spec.N = 2;
  spec.k = 1;
  spec.A = Eigen::MatrixXd::Constant(1, 1, -a);
  spec.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.C = Eigen::MatrixXd::Constant(1, 1, c);
  spec.speeds = Eigen::VectorXd(2);
  spec.speeds << 2.0 * lambda, -2.0 * lambda;
  spec.D0 = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.D1 = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.E1 = Eigen::MatrixXd::Constant(1, 1, c);
  return build_plant(spec);
}

inline Profile random_profile(const Grid& grid, int channels,
                              std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Profile w(grid.cells, channels);
  for (int j = 0; j < grid.cells; ++j) {
    for (int ch = 0; ch < channels; ++ch) w(j, ch) = dist(rng);
  }
  return w;
}

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = dist(rng);
  return v;
}

}  // namespace cascade::testing
