#include <random>

#include "cascade/forwarding.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cascade;

namespace {

Controller scalar_controller(SylvesterSolution::Method method,
                             int cells = 200,
                             std::optional<Nonlinearity> shaping = {}) {
  auto plant = make_scalar_transport(1.0, 1.0, 1.0);
  Grid grid = make_grid(cells);
  auto weight = make_weight(InnerProductWeight::Mode::plain, plant.speeds);
  return synthesize(plant, grid, Nonlinearity::saturation(1.0), method,
                    weight, shaping);
}

constexpr double kMnorm2Scalar = 1.0819767068693265;  // (e+1)/(2(e-1))

}  // namespace

TEST_CASE("scalar synthesis computes P = 1/(2a)") {
  auto ctl = scalar_controller(SylvesterSolution::Method::closed);
  CHECK(ctl.P(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(ctl.p_min == doctest::Approx(0.5));
  CHECK(ctl.p_max == doctest::Approx(0.5));
}

TEST_CASE("scalar gain norm matches the analytic integral") {
  auto ctl = scalar_controller(SylvesterSolution::Method::closed);
  CHECK(std::abs(ctl.Mnorm2 - kMnorm2Scalar) < 1e-3);
  auto ctl_bvp = scalar_controller(SylvesterSolution::Method::bvp);
  CHECK(std::abs(ctl_bvp.Mnorm2 - kMnorm2Scalar) < 1e-3);
}

TEST_CASE("equivalence constants follow the synthesis formulas") {
  auto ctl = scalar_controller(SylvesterSolution::Method::closed);
  CHECK(ctl.c_hi ==
        doctest::Approx(std::max(2.0, 0.5 + 2.0 * ctl.Mnorm2)));
  CHECK(ctl.c_lo ==
        doctest::Approx(std::min(0.25, 0.5 / (0.5 + 2.0 * ctl.Mnorm2))));
  CHECK(ctl.c_lo > 0.0);
  CHECK(ctl.c_hi >= ctl.c_lo);
}

TEST_CASE("zero output collapses the functional to the uncoupled energy") {
  auto plant = make_scalar_transport(1.0, 1.0, 0.0);
  Grid grid = make_grid(64);
  auto weight = make_weight(InnerProductWeight::Mode::plain, plant.speeds);
  auto ctl = synthesize(plant, grid, Nonlinearity::saturation(1.0),
                        SylvesterSolution::Method::discrete, weight);
  CHECK(ctl.Mnorm2 == doctest::Approx(0.0));
  CHECK(ctl.c_hi == doctest::Approx(std::max(2.0, ctl.p_max)));
  CHECK(ctl.c_lo == doctest::Approx(std::min(0.5 * ctl.p_min, 1.0)));

  std::mt19937_64 rng(3);
  CascadeState state{testing::random_vector(1, rng),
                     testing::random_profile(grid, 1, rng), 0.0};
  const double expected = state.z.dot(ctl.P * state.z) +
                          std::pow(h_norm(state.w, grid, weight), 2);
  CHECK(lyapunov_V(ctl, state) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adjoint of the constant profile equals the gain integral") {
  auto ctl = scalar_controller(SylvesterSolution::Method::bvp);
  Profile ones = profile_constant(ctl.grid, 1, 1.0);
  // integral of M is -c for a = lambda
  CHECK(adjoint_apply(ctl, ones)(0) == doctest::Approx(-1.0).epsilon(1e-3));

  Profile zero = profile_constant(ctl.grid, 1, 0.0);
  CHECK(adjoint_apply(ctl, zero).norm() == 0.0);
}

TEST_CASE("adjoint of the gain profile is the Gram matrix action") {
  auto ctl = scalar_controller(SylvesterSolution::Method::discrete);
  Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 1.0);
  Profile mz = ctl.M.apply(z);
  CHECK(adjoint_apply(ctl, mz)(0) ==
        doctest::Approx((ctl.gram * z)(0)).epsilon(1e-14));
}

TEST_CASE("adjoint duality is exact at the discrete level") {
  for (auto method : {SylvesterSolution::Method::discrete,
                      SylvesterSolution::Method::bvp}) {
    auto ctl = scalar_controller(method);
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
      Eigen::VectorXd z = testing::random_vector(1, rng);
      Profile w = testing::random_profile(ctl.grid, 1, rng);
      const double lhs = h_inner(ctl.M.apply(z), w, ctl.grid, ctl.weight);
      const double rhs = z.dot(adjoint_apply(ctl, w));
      CHECK(std::abs(lhs - rhs) <= 1e-12);
    }
  }
}

TEST_CASE("adjoint duality on a two-channel weighted plant") {
  auto plant = testing::make_two_channel_fold(1.0, 1.0, 1.0);
  Grid grid = make_grid(96);
  auto weight =
      make_weight(InnerProductWeight::Mode::speed_weighted, plant.speeds);
  auto ctl = synthesize(plant, grid, Nonlinearity::saturation(1.0),
                        SylvesterSolution::Method::discrete, weight);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd z = testing::random_vector(1, rng);
    Profile w = testing::random_profile(grid, 2, rng);
    const double lhs = h_inner(ctl.M.apply(z), w, grid, weight);
    const double rhs = z.dot(adjoint_apply(ctl, w));
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("feedback vanishes at the origin") {
  auto ctl = scalar_controller(SylvesterSolution::Method::closed);
  CascadeState origin{Eigen::VectorXd::Zero(1),
                      profile_constant(ctl.grid, 1, 0.0), 0.0};
  CHECK(feedback_u(ctl, origin).norm() == 0.0);
}

TEST_CASE("scalar feedback at z=1, w=0 matches direct quadrature") {
  auto ctl = scalar_controller(SylvesterSolution::Method::closed);
  CascadeState state{Eigen::VectorXd::Constant(1, 1.0),
                     profile_constant(ctl.grid, 1, 0.0), 0.0};
  // independent midpoint sum of -P - integral of M^2
  double gain_sq = 0.0;
  for (int j = 0; j < ctl.grid.cells; ++j) {
    const double mj = closed_form_scalar(1.0, 1.0, 1.0, ctl.grid.node(j));
    gain_sq += ctl.grid.h() * mj * mj;
  }
  const double expected = -0.5 - gain_sq;
  CHECK(feedback_nominal(ctl, state)(0) ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(feedback_nominal(ctl, state)(0) ==
        doctest::Approx(-(0.5 + kMnorm2Scalar)).epsilon(1e-3));
}

TEST_CASE("feedback is linear in the state without shaping") {
  auto ctl = scalar_controller(SylvesterSolution::Method::discrete);
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    CascadeState s1{testing::random_vector(1, rng),
                    testing::random_profile(ctl.grid, 1, rng), 0.0};
    CascadeState s2{testing::random_vector(1, rng),
                    testing::random_profile(ctl.grid, 1, rng), 0.0};
    CascadeState sum{s1.z + 2.0 * s2.z, s1.w + 2.0 * s2.w, 0.0};
    const double expected =
        feedback_u(ctl, s1)(0) + 2.0 * feedback_u(ctl, s2)(0);
    CHECK(feedback_u(ctl, sum)(0) ==
          doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("shaping is applied to the emitted control") {
  auto shaped = scalar_controller(SylvesterSolution::Method::closed, 200,
                                  Nonlinearity::saturation(0.1));
  CascadeState state{Eigen::VectorXd::Constant(1, 1.0),
                     profile_constant(shaped.grid, 1, 0.0), 0.0};
  const double nominal = feedback_nominal(shaped, state)(0);
  CHECK(std::abs(nominal) > 0.1);
  CHECK(feedback_u(shaped, state)(0) == doctest::Approx(-0.1));
  // the effective drive composes sigma after the shaping
  Eigen::VectorXd u = feedback_nominal(shaped, state);
  CHECK(applied_input(shaped, u)(0) == doctest::Approx(-0.1));
}

TEST_CASE("Lyapunov functional basics") {
  auto ctl = scalar_controller(SylvesterSolution::Method::closed);
  CascadeState origin{Eigen::VectorXd::Zero(1),
                      profile_constant(ctl.grid, 1, 0.0), 0.0};
  CHECK(lyapunov_V(ctl, origin) == 0.0);

  CascadeState pure_wave{Eigen::VectorXd::Zero(1),
                         profile_constant(ctl.grid, 1, 1.0), 0.0};
  CHECK(lyapunov_V(ctl, pure_wave) == doctest::Approx(1.0).epsilon(1e-12));

  Eigen::VectorXd z = Eigen::VectorXd::Constant(1, 1.0);
  CascadeState on_gain{z, ctl.M.apply(z), 0.0};
  CHECK(lyapunov_V(ctl, on_gain) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("completing the square: V(z, Mz + v) = z^T P z + ||v||^2") {
  auto ctl = scalar_controller(SylvesterSolution::Method::discrete);
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd z = testing::random_vector(1, rng);
    Profile v = testing::random_profile(ctl.grid, 1, rng);
    CascadeState state{z, ctl.M.apply(z) + v, 0.0};
    const double expected =
        z.dot(ctl.P * z) + h_inner(v, v, ctl.grid, ctl.weight);
    CHECK(lyapunov_V(ctl, state) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("v_norm scales linearly with the state") {
  auto ctl = scalar_controller(SylvesterSolution::Method::discrete);
  std::mt19937_64 rng(29);
  CascadeState state{testing::random_vector(1, rng),
                     testing::random_profile(ctl.grid, 1, rng), 0.0};
  CascadeState doubled{2.0 * state.z, 2.0 * state.w, 0.0};
  CHECK(v_norm(ctl, doubled) ==
        doctest::Approx(2.0 * v_norm(ctl, state)).epsilon(1e-13));
  CascadeState origin{Eigen::VectorXd::Zero(1),
                      profile_constant(ctl.grid, 1, 0.0), 0.0};
  CHECK(v_norm(ctl, origin) == 0.0);
}

TEST_CASE("norm equivalence holds on random states") {
  for (auto method : {SylvesterSolution::Method::closed,
                      SylvesterSolution::Method::discrete}) {
    auto ctl = scalar_controller(method);
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
      CascadeState state{testing::random_vector(1, rng, 2.0),
                         testing::random_profile(ctl.grid, 1, rng, 2.0), 0.0};
      const double v = lyapunov_V(ctl, state);
      const double squared = state.z.squaredNorm() +
                             h_inner(state.w, state.w, ctl.grid, ctl.weight);
      CHECK(v >= ctl.c_lo * squared - 1e-12 * std::max(1.0, squared));
      CHECK(v <= ctl.c_hi * squared + 1e-12 * std::max(1.0, squared));
    }
  }
}

TEST_CASE("synthesize rejects mismatched shapes") {
  auto plant = make_scalar_transport(1.0, 1.0, 1.0);
  Grid grid = make_grid(32);
  auto weight = make_weight(InnerProductWeight::Mode::plain, plant.speeds);
  CHECK_THROWS_AS(
      synthesize(plant, grid, Nonlinearity::saturation(1.0, 2),
                 SylvesterSolution::Method::discrete, weight),
      DimensionError);
  auto ctl = synthesize(plant, grid, Nonlinearity::saturation(1.0),
                        SylvesterSolution::Method::discrete, weight);
  Profile wrong(grid.cells, 2);
  CHECK_THROWS_AS(adjoint_apply(ctl, wrong), DimensionError);
  CascadeState bad{Eigen::VectorXd::Zero(2),
                   profile_constant(grid, 1, 0.0), 0.0};
  CHECK_THROWS_AS(feedback_u(ctl, bad), DimensionError);
  CHECK_THROWS_AS(lyapunov_V(ctl, bad), DimensionError);
  CascadeState bad_w{Eigen::VectorXd::Zero(1),
                     profile_constant(grid, 2, 0.0), 0.0};
  CHECK_THROWS_AS(lyapunov_V(ctl, bad_w), DimensionError);
  CHECK_THROWS_AS(feedback_u(ctl, bad_w), DimensionError);
}
