#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

#include "cascade/numlin.hpp"

namespace cascade {

/// Uniform grid on [0,1] with nodes at cell midpoints.
struct Grid {
  int cells = 200;

  double h() const { return 1.0 / cells; }
  double node(int j) const { return (j + 0.5) / cells; }
};

Grid make_grid(int cells);

/// Channel weights of the energy inner product on L2(0,1;R^N):
/// either plain (all ones) or 1/|speed| per channel.
struct InnerProductWeight {
  enum class Mode { plain, speed_weighted };

  Mode mode = Mode::plain;
  Eigen::VectorXd weights;
};

InnerProductWeight make_weight(InnerProductWeight::Mode mode,
                               const Eigen::VectorXd& speeds);

/// Cascade of an ODE dz/dt = Az + B sigma(u), y = Cz with a transport
/// system w_t + diag(speeds) w_x = 0 on [0,1]. The first k speeds are
/// positive (inflow at x=0), the rest negative (inflow at x=1).
///
/// Boundary coupling, with out-traces o = [w+(1); w-(0)] and in-traces
/// i = [w+(0); w-(1)]:
///
///   i = [[R0, D0], [D1, R1]] o + [E0; E1] z
///
/// D0/D1 are the cross-family reflections; R0/R1 carry same-family
/// recirculation (the scalar loop w(t,0) = w(t,1) + c z uses R0 = [1],
/// E0 = [c]); E0/E1 place the ODE output injection at either end.
struct PlantSpec {
  int n = 1, m = 1, p = 1;  // ODE state, input, output dimensions
  int N = 1, k = 1;         // transport channels, positive-speed count

  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x m
  Eigen::MatrixXd C;  // p x n

  Eigen::VectorXd speeds;  // N

  Eigen::MatrixXd D0;  // k x (N-k)
  Eigen::MatrixXd D1;  // (N-k) x k
  Eigen::MatrixXd R0;  // k x k
  Eigen::MatrixXd R1;  // (N-k) x (N-k)
  Eigen::MatrixXd E0;  // k x n
  Eigen::MatrixXd E1;  // (N-k) x n

  /// N x N matrix mapping out-traces to in-traces.
  Eigen::MatrixXd boundary_coupling() const;
  /// N x n stacked injection [E0; E1].
  Eigen::MatrixXd boundary_injection() const;
};

/// Validates dimensions, speed signs and finiteness; throws
/// ValidationError naming the violated field.
PlantSpec build_plant(PlantSpec raw);

/// The scalar transport loop: dz/dt = -a z + sigma(u),
/// w_t + lambda w_x = 0, w(t,0) = recirculation * w(t,1) + c z.
PlantSpec make_scalar_transport(double a, double lambda, double c,
                                double recirculation = 1.0);

/// PDE state samples at grid nodes: one row per cell, one column per
/// channel. Column-major storage makes this interchangeable with the
/// channel-major stacked vector used by the discrete generator.
using Profile = Eigen::MatrixXd;

struct CascadeState {
  Eigen::VectorXd z;
  Profile w;
  double t = 0.0;
};

Eigen::VectorXd stack_profile(const Profile& w);
Profile unstack_profile(const Eigen::VectorXd& v, int cells, int channels);

/// Composite midpoint quadrature of the weighted pairing
/// integral of w1(x)^T diag(weights) w2(x).
double h_inner(const Profile& w1, const Profile& w2, const Grid& grid,
               const InnerProductWeight& wt);
double h_norm(const Profile& w, const Grid& grid,
              const InnerProductWeight& wt);

/// Initial profile helpers.
Profile profile_constant(const Grid& grid, int channels, double value);
Profile profile_sine(const Grid& grid, int channels, int mode);

struct AssumptionReport {
  bool contraction_ok = false;      // boundary coupling is a trace contraction
  bool hurwitz_ok = false;          // A Hurwitz
  bool spectra_disjoint_ok = false; // spectra of S and A disjoint
  bool disjoint_exact = false;      // via the norm-preserving shortcut;
                                    // false means the discretized spectrum
                                    // was used (caveat)
  double boundary_excess = 0.0;     // max eigenvalue of K^T W K - W
  double spectral_gap = 0.0;        // discretized path: min |mu_S - mu_A|

  bool all_pass() const {
    return contraction_ok && hurwitz_ok && spectra_disjoint_ok;
  }
  std::string summary() const;
};

/// Checks the standing assumptions: (i) the transport generator is a
/// contraction in the weighted energy metric, (ii) A is Hurwitz,
/// (iii) the spectra of the generator and A are disjoint.
AssumptionReport check_standing_assumptions(const PlantSpec& plant, const Grid& grid,
                                   const InnerProductWeight& wt);

/// Folds a (w+, w-) channel pair on [0,1] into the single recirculated
/// channel: folded(x) = w+(2x) left of 1/2 and w-(2(1-x)) right of it.
/// Exact on midpoint grids.
Eigen::VectorXd fold_scalar(const Eigen::VectorXd& w_plus,
                            const Eigen::VectorXd& w_minus);
std::pair<Eigen::VectorXd, Eigen::VectorXd> unfold_scalar(
    const Eigen::VectorXd& folded);

/// Dense first-order upwind generator S_h (GN x GN) including the
/// boundary coupling rows, channel-major stacking.
Eigen::MatrixXd upwind_generator(const PlantSpec& plant, const Grid& grid);

/// Dense injection map (GN x n): the z-dependence of the inflow cells,
/// scaled by |speed|/h (finite-volume reading of the boundary measure).
Eigen::MatrixXd upwind_injection(const PlantSpec& plant, const Grid& grid);

}  // namespace cascade
