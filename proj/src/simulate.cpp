#include "cascade/simulate.hpp"

#include <cmath>
#include <sstream>

namespace cascade {

namespace {

struct Rates {
  Eigen::VectorXd dz;
  Profile dw;
};

Eigen::VectorXd out_traces(const PlantSpec& plant, const Profile& w) {
  Eigen::VectorXd out(plant.N);
  const int last = static_cast<int>(w.rows()) - 1;
  for (int ch = 0; ch < plant.N; ++ch) {
    out(ch) = plant.speeds(ch) > 0 ? w(last, ch) : w(0, ch);
  }
  return out;
}

Rates rates(const CascadeState& state, const Scenario& scenario) {
  const PlantSpec& plant = scenario.plant;
  const Grid& grid = scenario.grid;
  const Controller& ctl = scenario.controller;
  if (state.z.size() != plant.n || state.w.rows() != grid.cells ||
      state.w.cols() != plant.N) {
    throw DimensionError("step: state does not match the scenario shapes");
  }

  Eigen::VectorXd u = feedback_nominal(ctl, state);
  if (scenario.sabotage_sign_flip) u = -u;
  if (!u.allFinite()) {
    std::ostringstream os;
    os << "simulation aborted: non-finite feedback at t = " << state.t
       << " (|z| = " << state.z.norm() << ")";
    throw NumericalError(os.str());
  }
  const Eigen::VectorXd drive = applied_input(ctl, u);

  Rates r;
  r.dz = plant.A * state.z + plant.B * drive;

  const Eigen::VectorXd inflow = plant.boundary_coupling() *
                                     out_traces(plant, state.w) +
                                 plant.boundary_injection() * state.z;
  const int cells = grid.cells;
  const double h = grid.h();
  r.dw.resize(cells, plant.N);
  for (int ch = 0; ch < plant.N; ++ch) {
    const double rate = std::abs(plant.speeds(ch)) / h;
    if (plant.speeds(ch) > 0) {
      r.dw(0, ch) = -rate * (state.w(0, ch) - inflow(ch));
      for (int j = 1; j < cells; ++j) {
        r.dw(j, ch) = -rate * (state.w(j, ch) - state.w(j - 1, ch));
      }
    } else {
      for (int j = 0; j + 1 < cells; ++j) {
        r.dw(j, ch) = -rate * (state.w(j, ch) - state.w(j + 1, ch));
      }
      r.dw(cells - 1, ch) = -rate * (state.w(cells - 1, ch) - inflow(ch));
    }
  }
  return r;
}

CascadeState advanced(const CascadeState& state, const Rates& r, double dt) {
  return CascadeState{state.z + dt * r.dz, state.w + dt * r.dw, state.t + dt};
}

void check_finite(const CascadeState& state) {
  if (!state.z.allFinite() || !state.w.allFinite()) {
    std::ostringstream os;
    os << "simulation aborted: non-finite state at t = " << state.t
       << " (|z| = " << state.z.norm()
       << ", max |w| = " << state.w.cwiseAbs().maxCoeff() << ")";
    throw NumericalError(os.str());
  }
}

Snapshot snapshot_of(const CascadeState& state, const Scenario& scenario) {
  const Controller& ctl = scenario.controller;
  Snapshot snap;
  snap.t = state.t;
  snap.z = state.z;
  snap.w = state.w;
  Eigen::VectorXd u = feedback_nominal(ctl, state);
  if (scenario.sabotage_sign_flip) u = -u;
  snap.u = u;
  snap.sigma_u = applied_input(ctl, u);
  snap.V = lyapunov_V(ctl, state);
  snap.norm_z = state.z.norm();
  snap.norm_w = h_norm(state.w, ctl.grid, ctl.weight);
  return snap;
}

}  // namespace

Profile InitialProfile::materialize(const Grid& grid, int channels) const {
  switch (kind) {
    case Kind::constant:
      return profile_constant(grid, channels, constant_value);
    case Kind::sine:
      return profile_sine(grid, channels, sine_mode);
    case Kind::samples:
      if (samples.rows() != grid.cells || samples.cols() != channels) {
        throw ValidationError(
            "initial profile samples do not match the grid/channel count");
      }
      if (!samples.allFinite()) {
        throw ValidationError("initial profile samples are not finite");
      }
      return samples;
  }
  throw Error("InitialProfile: unknown kind");
}

Scenario instantiate(const ScenarioSpec& spec,
                     std::optional<int> override_cells) {
  Scenario s;
  s.plant = build_plant(spec.plant);
  s.grid = make_grid(override_cells.value_or(spec.grid_cells));
  const auto weight = make_weight(spec.weight_mode, s.plant.speeds);
  s.controller =
      synthesize(s.plant, s.grid, spec.sigma, spec.method, weight,
                 spec.shaping);
  if (spec.z0.size() == 0) {
    s.z0 = Eigen::VectorXd::Zero(s.plant.n);
  } else if (spec.z0.size() == s.plant.n) {
    s.z0 = spec.z0;
  } else {
    throw ValidationError("instantiate: z0 has the wrong dimension");
  }
  if (!s.z0.allFinite()) {
    throw ValidationError("instantiate: z0 is not finite");
  }
  s.w0 = spec.w0.materialize(s.grid, s.plant.N);
  if (!(spec.t_final >= 0.0) || !std::isfinite(spec.t_final)) {
    throw ValidationError("instantiate: t_final must be >= 0");
  }
  if (!(spec.cfl_safety > 0.0) || spec.cfl_safety > 1.0) {
    throw ValidationError("instantiate: cfl_safety must lie in (0, 1]");
  }
  if (spec.record_stride < 1) {
    throw ValidationError("instantiate: record_stride must be >= 1");
  }
  s.t_final = spec.t_final;
  s.cfl_safety = spec.cfl_safety;
  s.record_stride = spec.record_stride;
  s.integrator = spec.integrator;
  return s;
}

double cfl_dt(const Grid& grid, const PlantSpec& plant, double safety) {
  if (!(safety > 0.0) || safety > 1.0) {
    throw ValidationError("cfl_dt: safety must lie in (0, 1]");
  }
  return safety * grid.h() / plant.speeds.cwiseAbs().maxCoeff();
}

CascadeState step(const CascadeState& state, const Scenario& scenario,
                  double dt) {
  const double limit = cfl_dt(scenario.grid, scenario.plant,
                              scenario.cfl_safety);
  if (dt > limit * (1.0 + 1e-12)) {
    throw ValidationError("step: dt exceeds the CFL bound");
  }
  CascadeState next;
  if (scenario.integrator == ScenarioSpec::Integrator::euler) {
    next = advanced(state, rates(state, scenario), dt);
  } else {
    const Rates k1 = rates(state, scenario);
    const Rates k2 = rates(advanced(state, k1, 0.5 * dt), scenario);
    const Rates k3 = rates(advanced(state, k2, 0.5 * dt), scenario);
    const Rates k4 = rates(advanced(state, k3, dt), scenario);
    Rates total;
    total.dz = (k1.dz + 2.0 * k2.dz + 2.0 * k3.dz + k4.dz) / 6.0;
    total.dw = (k1.dw + 2.0 * k2.dw + 2.0 * k3.dw + k4.dw) / 6.0;
    next = advanced(state, total, dt);
  }
  check_finite(next);
  return next;
}

SimulationTrace run(const Scenario& scenario) {
  CascadeState state{scenario.z0, scenario.w0, 0.0};
  check_finite(state);

  SimulationTrace trace;
  trace.snapshots.push_back(snapshot_of(state, scenario));
  if (scenario.t_final <= 0.0) {
    trace.dt = 0.0;
    return trace;
  }

  const double dt_cfl =
      cfl_dt(scenario.grid, scenario.plant, scenario.cfl_safety);
  const long steps =
      std::max(1L, static_cast<long>(std::ceil(scenario.t_final / dt_cfl -
                                               1e-12)));
  const double dt = scenario.t_final / static_cast<double>(steps);
  trace.dt = dt;

  for (long k = 1; k <= steps; ++k) {
    state = step(state, scenario, dt);
    // snap the recorded time to the exact multiple to keep traces tidy
    state.t = dt * static_cast<double>(k);
    if (k % scenario.record_stride == 0 || k == steps) {
      trace.snapshots.push_back(snapshot_of(state, scenario));
    }
  }
  return trace;
}

}  // namespace cascade
