#include <random>

#include "cascade/simulate.hpp"
#include "corpus.hpp"
#include "doctest.h"

using namespace cascade;

TEST_CASE("cfl_dt formula") {
  auto plant = make_scalar_transport(1.0, 1.0, 1.0);
  Grid grid = make_grid(100);
  CHECK(cfl_dt(grid, plant, 0.9) == doctest::Approx(0.009));
  CHECK(cfl_dt(grid, plant, 1.0) == doctest::Approx(grid.h()));

  auto fast = make_scalar_transport(1.0, 2.0, 1.0);
  CHECK(cfl_dt(grid, fast, 0.9) == doctest::Approx(0.0045));
  CHECK_THROWS_AS(cfl_dt(grid, plant, 0.0), ValidationError);
  CHECK_THROWS_AS(cfl_dt(grid, plant, 1.5), ValidationError);
}

TEST_CASE("the origin is an exact fixed point of step") {
  for (auto integrator :
       {ScenarioSpec::Integrator::euler, ScenarioSpec::Integrator::rk4}) {
    ScenarioSpec spec = testing::base_scalar_spec(64, 1.0);
    spec.integrator = integrator;
    spec.z0 = Eigen::VectorXd::Zero(1);
    spec.w0.kind = InitialProfile::Kind::constant;
    spec.w0.constant_value = 0.0;
    Scenario scenario = instantiate(spec);
    CascadeState state{scenario.z0, scenario.w0, 0.0};
    const double dt = cfl_dt(scenario.grid, scenario.plant, scenario.cfl_safety);
    for (int i = 0; i < 5; ++i) state = step(state, scenario, dt);
    CHECK(state.z.norm() == 0.0);
    CHECK(state.w.norm() == 0.0);
  }
}

TEST_CASE("pure recirculation transports a constant exactly") {
  ScenarioSpec spec = testing::base_scalar_spec(64, 1.0);
  spec.plant = make_scalar_transport(1.0, 1.0, 0.0);  // C = 0
  spec.plant.B = Eigen::MatrixXd::Zero(1, 1);         // B = 0
  spec.w0.kind = InitialProfile::Kind::constant;
  spec.w0.constant_value = 2.5;
  spec.z0 = Eigen::VectorXd::Constant(1, 1.0);
  Scenario scenario = instantiate(spec);
  CascadeState state{scenario.z0, scenario.w0, 0.0};
  const double dt = cfl_dt(scenario.grid, scenario.plant, scenario.cfl_safety);
  for (int i = 0; i < 50; ++i) state = step(state, scenario, dt);
  CHECK((state.w.array() == 2.5).all());
}

TEST_CASE("conservative boundary with no control never gains energy") {
  ScenarioSpec spec;
  spec.plant = testing::make_two_channel_fold(1.0, 1.0, 1.0);
  spec.plant.C = Eigen::MatrixXd::Zero(1, 1);
  spec.plant.E1 = Eigen::MatrixXd::Zero(1, 1);
  spec.plant.B = Eigen::MatrixXd::Zero(1, 1);
  spec.grid_cells = 48;
  spec.weight_mode = InnerProductWeight::Mode::speed_weighted;
  spec.z0 = Eigen::VectorXd::Zero(1);
  spec.t_final = 1.0;
  Scenario scenario = instantiate(spec);
  auto wt = make_weight(spec.weight_mode, scenario.plant.speeds);

  std::mt19937_64 rng(41);
  CascadeState state{Eigen::VectorXd::Zero(1),
                     testing::random_profile(scenario.grid, 2, rng), 0.0};
  const double dt =
      cfl_dt(scenario.grid, scenario.plant, scenario.cfl_safety);
  double energy = h_norm(state.w, scenario.grid, wt);
  for (int i = 0; i < 200; ++i) {
    state = step(state, scenario, dt);
    const double next = h_norm(state.w, scenario.grid, wt);
    CHECK(next <= energy + 1e-12);
    energy = next;
  }
}

TEST_CASE("step enforces the CFL bound") {
  ScenarioSpec spec = testing::base_scalar_spec(64, 1.0);
  Scenario scenario = instantiate(spec);
  CascadeState state{scenario.z0, scenario.w0, 0.0};
  const double dt = cfl_dt(scenario.grid, scenario.plant, scenario.cfl_safety);
  CHECK_THROWS_AS(step(state, scenario, 2.0 * dt), ValidationError);
}

TEST_CASE("euler step agrees with the dense upwind operators") {
  // With B = 0 the PDE advance is linear; the loop-based rate must equal
  // S_h w + injection * z exactly.
  ScenarioSpec spec = testing::base_scalar_spec(48, 1.0);
  spec.plant.B = Eigen::MatrixXd::Zero(1, 1);
  Scenario scenario = instantiate(spec);
  Eigen::MatrixXd gen = upwind_generator(scenario.plant, scenario.grid);
  Eigen::MatrixXd inj = upwind_injection(scenario.plant, scenario.grid);

  std::mt19937_64 rng(7);
  const double dt = cfl_dt(scenario.grid, scenario.plant, scenario.cfl_safety);
  for (int trial = 0; trial < 10; ++trial) {
    CascadeState state{testing::random_vector(1, rng),
                       testing::random_profile(scenario.grid, 1, rng), 0.0};
    CascadeState next = step(state, scenario, dt);
    Eigen::VectorXd expected =
        stack_profile(state.w) +
        dt * (gen * stack_profile(state.w) + inj * state.z);
    CHECK((stack_profile(next.w) - expected).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("two-channel system stays finite and dissipates") {
  ScenarioSpec spec;
  spec.plant = testing::make_two_channel_fold(1.0, 1.0, 1.0);
  spec.grid_cells = 64;
  spec.weight_mode = InnerProductWeight::Mode::speed_weighted;
  spec.sigma = Nonlinearity::saturation(1.0);
  spec.z0 = Eigen::VectorXd::Constant(1, 1.0);
  spec.w0.kind = InitialProfile::Kind::sine;
  spec.w0.sine_mode = 1;
  spec.t_final = 5.0;
  spec.record_stride = 4;
  Scenario scenario = instantiate(spec);
  SimulationTrace trace = run(scenario);
  CHECK(trace.back().V <= trace.front().V);
}

TEST_CASE("V is nonincreasing from the first recorded step") {
  ScenarioSpec spec = testing::base_scalar_spec(200, 1.0);
  spec.record_stride = 1;
  Scenario scenario = instantiate(spec);
  SimulationTrace trace = run(scenario);
  REQUIRE(trace.snapshots.size() >= 2);
  CHECK(trace.snapshots[1].V <= trace.snapshots[0].V);
  for (size_t k = 1; k < trace.snapshots.size(); ++k) {
    CHECK(trace.snapshots[k].V <=
          trace.snapshots[k - 1].V + 1e-9 * std::max(1.0, trace.front().V));
  }
}

TEST_CASE("t_final = 0 records a single snapshot") {
  ScenarioSpec spec = testing::base_scalar_spec(64, 0.0);
  Scenario scenario = instantiate(spec);
  SimulationTrace trace = run(scenario);
  CHECK(trace.snapshots.size() == 1);
  CHECK(trace.front().t == 0.0);
  CHECK(trace.front().norm_z == doctest::Approx(1.0));
}

TEST_CASE("snapshot times are strictly increasing and end at t_final") {
  ScenarioSpec spec = testing::base_scalar_spec(64, 2.0);
  spec.record_stride = 7;
  Scenario scenario = instantiate(spec);
  SimulationTrace trace = run(scenario);
  for (size_t k = 1; k < trace.snapshots.size(); ++k) {
    CHECK(trace.snapshots[k].t > trace.snapshots[k - 1].t);
  }
  CHECK(trace.back().t == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("closed loop decays over a moderate horizon") {
  ScenarioSpec spec = testing::base_scalar_spec(100, 30.0);
  Scenario scenario = instantiate(spec);
  SimulationTrace trace = run(scenario);
  const CascadeState initial{trace.front().z, trace.front().w, 0.0};
  const CascadeState last{trace.back().z, trace.back().w, trace.back().t};
  CHECK(x_norm(scenario.controller, last) <
        0.3 * x_norm(scenario.controller, initial));
}

TEST_CASE("rk4 also decays") {
  ScenarioSpec spec = testing::base_scalar_spec(100, 10.0);
  spec.integrator = ScenarioSpec::Integrator::rk4;
  Scenario scenario = instantiate(spec);
  SimulationTrace trace = run(scenario);
  CHECK(trace.back().V < trace.front().V);
}

TEST_CASE("sabotaged linear feedback blows up and aborts") {
  ScenarioSpec spec = testing::base_scalar_spec(16, 1500.0);
  spec.sigma = Nonlinearity::linear(1.0);
  spec.record_stride = 1000;
  Scenario scenario = instantiate(spec);
  scenario.sabotage_sign_flip = true;
  CHECK_THROWS_AS(run(scenario), NumericalError);
}

TEST_CASE("instantiate validates the scenario") {
  ScenarioSpec spec = testing::base_scalar_spec(64, 1.0);
  spec.cfl_safety = 1.5;
  CHECK_THROWS_AS(instantiate(spec), ValidationError);
  spec = testing::base_scalar_spec(64, 1.0);
  spec.z0 = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(instantiate(spec), ValidationError);
  spec = testing::base_scalar_spec(64, 1.0);
  spec.record_stride = 0;
  CHECK_THROWS_AS(instantiate(spec), ValidationError);
  spec = testing::base_scalar_spec(64, 1.0);
  spec.t_final = -1.0;
  CHECK_THROWS_AS(instantiate(spec), ValidationError);
}
