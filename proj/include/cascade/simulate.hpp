#pragma once

#include <optional>
#include <vector>

#include "cascade/forwarding.hpp"

namespace cascade {

/// Named initial-profile family for w0.
struct InitialProfile {
  enum class Kind { constant, sine, samples };

  Kind kind = Kind::constant;
  double constant_value = 0.0;
  int sine_mode = 1;
  Profile samples;           // used only for Kind::samples
  std::string samples_path;  // provenance, kept for serialization

  Profile materialize(const Grid& grid, int channels) const;
};

/// Grid-independent description of a closed-loop run; instantiating it
/// builds the grid, weight, controller and initial data.
struct ScenarioSpec {
  PlantSpec plant;
  int grid_cells = 200;
  double cfl_safety = 0.5;
  InnerProductWeight::Mode weight_mode = InnerProductWeight::Mode::plain;
  Nonlinearity sigma = Nonlinearity::linear(1.0);
  std::optional<Nonlinearity> shaping;
  SylvesterSolution::Method method = SylvesterSolution::Method::discrete;
  Eigen::VectorXd z0;
  InitialProfile w0;
  double t_final = 60.0;
  int record_stride = 10;
  enum class Integrator { euler, rk4 };
  Integrator integrator = Integrator::euler;
};

struct Scenario {
  PlantSpec plant;
  Grid grid;
  Controller controller;
  Eigen::VectorXd z0;
  Profile w0;
  double t_final = 60.0;
  double cfl_safety = 0.5;
  int record_stride = 10;
  ScenarioSpec::Integrator integrator = ScenarioSpec::Integrator::euler;
  bool sabotage_sign_flip = false;  // test hook: flips the feedback sign
};

Scenario instantiate(const ScenarioSpec& spec,
                     std::optional<int> override_cells = std::nullopt);

struct Snapshot {
  double t = 0.0;
  Eigen::VectorXd z;
  Profile w;
  Eigen::VectorXd u;        // nominal feedback
  Eigen::VectorXd sigma_u;  // effective drive sigma(psi(u))
  double V = 0.0;
  double norm_z = 0.0;
  double norm_w = 0.0;  // ||w||_H
};

struct SimulationTrace {
  std::vector<Snapshot> snapshots;
  double dt = 0.0;

  const Snapshot& front() const { return snapshots.front(); }
  const Snapshot& back() const { return snapshots.back(); }
};

/// CFL-stable explicit step: safety * h / max |speed|.
double cfl_dt(const Grid& grid, const PlantSpec& plant, double safety);

/// One explicit step of the coupled semi-discrete system (first-order
/// upwind in space; euler freezes the feedback over the step, rk4
/// re-evaluates it at stage states). Throws NumericalError on NaN/Inf.
CascadeState step(const CascadeState& state, const Scenario& scenario,
                  double dt);

/// Marches to t_final recording every record_stride-th step plus the
/// final state. t_final = 0 yields the single initial snapshot.
SimulationTrace run(const Scenario& scenario);

}  // namespace cascade
