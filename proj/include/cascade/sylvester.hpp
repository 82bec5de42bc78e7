#pragma once

#include <iosfwd>
#include <optional>

#include "cascade/plant.hpp"

namespace cascade {

struct ScalarClosedForm {
  double a = 0.0;
  double lambda = 1.0;
  double c = 0.0;
};

/// Gain operator M mapping the ODE state to a transport profile, sampled
/// at grid nodes. Rows are channel-major (row ch*G + j holds channel ch at
/// node j), so values * z is directly a stacked profile.
struct SylvesterSolution {
  enum class Method { closed, bvp, discrete };

  Eigen::MatrixXd values;  // (G*N) x n
  int grid_cells = 0;
  int channels = 1;
  int state_dim = 1;
  Method method = Method::discrete;
  std::optional<ScalarClosedForm> closed_form;
  double residual = 0.0;

  /// M(x_j) as an N x n matrix.
  Eigen::MatrixXd node_value(int j) const;
  /// The profile M z.
  Profile apply(const Eigen::VectorXd& z) const;
};

/// The scalar gain c / (1 - exp(a/lambda)) * exp((a/lambda) x);
/// requires a, lambda > 0.
double closed_form_scalar(double a, double lambda, double c, double x);

/// Samples the scalar closed form on the grid (scalar plants with unit
/// recirculation only).
SylvesterSolution solve_closed(const PlantSpec& plant, const Grid& grid);

/// Two-point boundary value route: propagates vec(M(x)) with the matrix
/// exponential of -(A^T kron Lambda^{-1}) and solves the boundary system
/// assembled from the coupling and injection matrices.
SylvesterSolution solve_bvp(const PlantSpec& plant, const Grid& grid);

/// Discrete route on the upwind generator: solves
/// S_h M_h - M_h A = -(injection) by Kronecker linearization. This is the
/// representation the simulator's energy audit is exact against.
SylvesterSolution solve_discrete(const PlantSpec& plant, const Grid& grid);

SylvesterSolution solve_sylvester(const PlantSpec& plant, const Grid& grid,
                                  SylvesterSolution::Method method);

/// Evaluates the resolvent fixed-point identity
///   M = (mu I - S)^{-1} [ M (mu I - A) + Gamma C ]
/// on the discretized operator over the canonical basis and returns the
/// worst relative mismatch.
double fixed_point_check(const SylvesterSolution& sol, const PlantSpec& plant,
                         const Grid& grid, double mu = 1.0);

/// CSV export: x, then M(x) entries row-major per node.
void write_sylvester_csv(std::ostream& os, const SylvesterSolution& sol,
                         const Grid& grid);

}  // namespace cascade
