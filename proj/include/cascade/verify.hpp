#pragma once

#include <complex>
#include <string>
#include <vector>

#include "cascade/simulate.hpp"

namespace cascade {

struct AuditReport {
  std::string name;
  bool pass = false;
  double worst_violation = 0.0;
  std::string context;
};

/// Slope-bound constant: audits certify the continuous decay inequality
/// up to kappa * (h + dt) * (1 + V0) of first-order discretization error.
inline constexpr double kDecayKappa = 50.0;

/// Per-step Lyapunov decrease and the slope bound
/// dV/dt <= -|z|^2 - 2 u^T sigma(u), both up to discretization slack.
AuditReport decay_audit(const SimulationTrace& trace, const Controller& ctl);

/// ||difference of two trajectories||_V must be nonincreasing when the
/// scenarios differ only in initial data.
AuditReport contraction_audit(const SimulationTrace& a,
                              const SimulationTrace& b, const Controller& ctl);

/// Single-trajectory contraction: ||state||_V nonincreasing along a run.
AuditReport vnorm_monotone_audit(const SimulationTrace& trace,
                                 const Controller& ctl);

/// Full row rank of [[A - mu I, B], [C, 0]] at a (possibly complex) mu,
/// checked through the real embedding.
bool nonresonance_rank(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const Eigen::MatrixXd& c, std::complex<double> mu,
                       double tol = 1e-9);

struct ObservabilityProbe {
  int mode_index = 0;
  std::complex<double> eigenvalue;
  double pairing_magnitude = 0.0;
  bool flagged = false;  // pairing below the unobservability threshold
};

struct ProbeReport {
  std::vector<ObservabilityProbe> modes;
  bool analytic_modes = false;  // scalar periodic eigenfunctions
  bool caveat = false;          // non-conservative boundary: discretized modes
  int flagged_count() const;
};

inline constexpr double kProbeFlagThreshold = 1e-8;

/// |B^T M* phi_k| over transport eigenmodes. The scalar unit-recirculation
/// loop uses the exact Fourier modes exp(2 pi i k x) with eigenvalue
/// -2 pi i k lambda; anything else falls back to eigenvectors of the
/// discretized generator (caveat when the boundary is not conservative).
ProbeReport observability_probe(const PlantSpec& plant, const Controller& ctl,
                                int max_mode);

struct ConvergenceRow {
  int cells = 0;
  double gain_error = 0.0;
  double state_error = 0.0;  // vs the finest grid; 0 for the finest row
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<double> gain_orders;
  std::vector<double> state_orders;
  bool gain_exact = false;  // errors at rounding level on every grid
};

/// Observed convergence of the discrete gain (against the closed form or
/// the boundary-value route) and of the final state norm under grid
/// refinement. Grids must be at least three, ascending and nested.
ConvergenceReport convergence_study(const ScenarioSpec& spec,
                                    const std::vector<int>& grids);

}  // namespace cascade
