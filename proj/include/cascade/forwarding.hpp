#pragma once

#include <iosfwd>
#include <optional>

#include "cascade/nonlinearity.hpp"
#include "cascade/sylvester.hpp"

namespace cascade {

/// Forwarding controller for the cascade: Lyapunov matrix P of the ODE,
/// gain operator M, the feedback u = -B^T [P z - M*(w - M z)] and the
/// coupled energy V(z,w) = z^T P z + ||w - M z||_H^2.
struct Controller {
  Eigen::MatrixXd P;  // n x n symmetric positive definite
  SylvesterSolution M;
  InnerProductWeight weight;
  Nonlinearity sigma = Nonlinearity::linear(1.0);
  std::optional<Nonlinearity> shaping;  // psi applied to the feedback

  Eigen::MatrixXd B;             // input map, used by the feedback
  Eigen::MatrixXd adjoint_rows;  // n x (G N): M* against stacked profiles
  Eigen::MatrixXd gram;          // M* M, n x n
  double Mnorm2 = 0.0;           // sup_{|z|=1} ||M z||_H^2
  double p_min = 0.0, p_max = 0.0;
  double c_lo = 0.0, c_hi = 0.0;  // norm-equivalence constants
  int n = 1, m = 1;
  Grid grid;
};

/// Builds the controller: P from the Lyapunov solve, M by the requested
/// route, the discrete adjoint of M, and the equivalence constants
///   c_hi = max(2, p_max + 2 ||M||^2),
///   c_lo = min(p_min / 2, p_min / (p_min + 2 ||M||^2)).
Controller synthesize(const PlantSpec& plant, const Grid& grid,
                      const Nonlinearity& sigma,
                      SylvesterSolution::Method method,
                      const InnerProductWeight& weight,
                      std::optional<Nonlinearity> shaping = std::nullopt);

/// M* w: the exact discrete adjoint of z -> M z with respect to the
/// weighted node quadrature.
Eigen::VectorXd adjoint_apply(const Controller& ctl, const Profile& w);

/// The feedback before shaping: -B^T [P z - M*(w - M z)].
Eigen::VectorXd feedback_nominal(const Controller& ctl,
                                 const CascadeState& state);

/// The control the actuator receives: psi(feedback) when shaping is
/// present, the nominal feedback otherwise.
Eigen::VectorXd feedback_u(const Controller& ctl, const CascadeState& state);

/// sigma(psi(u)) for a nominal input u: the effective cone-bounded drive.
Eigen::VectorXd applied_input(const Controller& ctl, const Eigen::VectorXd& u);

double lyapunov_V(const Controller& ctl, const CascadeState& state);
double v_norm(const Controller& ctl, const CascadeState& state);

/// |z| + ||w||_H, the state-space norm the decay statements use.
double x_norm(const Controller& ctl, const CascadeState& state);

CascadeState state_difference(const CascadeState& a, const CascadeState& b);

/// Structured text export: dimensions, constants, P, then M node values.
void write_controller(std::ostream& os, const Controller& ctl);

}  // namespace cascade
