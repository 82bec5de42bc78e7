#include <random>

#include "cascade/plant.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace cascade;

TEST_CASE("build_plant accepts the scalar loop") {
  auto plant = make_scalar_transport(1.0, 1.0, 1.0);
  CHECK(plant.N == 1);
  CHECK(plant.k == 1);
  CHECK(plant.boundary_coupling()(0, 0) == 1.0);
  CHECK(plant.boundary_injection()(0, 0) == 1.0);
  CHECK(plant.A(0, 0) == -1.0);
}

TEST_CASE("build_plant accepts a two-channel system") {
  PlantSpec spec;
  spec.n = spec.m = spec.p = 1;
  spec.N = 2;
  spec.k = 1;
  spec.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
  spec.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.C = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.speeds = Eigen::VectorXd(2);
  spec.speeds << 1.0, -1.0;
  spec.D0 = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.D1 = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.E1 = Eigen::MatrixXd::Constant(1, 1, 1.0);
  auto plant = build_plant(spec);
  Eigen::MatrixXd coupling = plant.boundary_coupling();
  CHECK(coupling(0, 1) == 1.0);
  CHECK(coupling(1, 0) == 1.0);
  CHECK(coupling(0, 0) == 0.0);
}

TEST_CASE("build_plant rejections are named") {
  PlantSpec spec;
  spec.n = spec.m = spec.p = 1;
  spec.N = 1;
  spec.k = 1;
  spec.A = Eigen::MatrixXd::Constant(1, 1, -1.0);
  spec.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.C = Eigen::MatrixXd::Constant(1, 1, 1.0);

  SUBCASE("zero speed") {
    spec.speeds = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_WITH_AS(build_plant(spec),
                         doctest::Contains("speed 0 is zero"),
                         ValidationError);
  }
  SUBCASE("wrong speed sign") {
    spec.speeds = Eigen::VectorXd::Constant(1, -1.0);
    CHECK_THROWS_AS(build_plant(spec), ValidationError);
  }
  SUBCASE("k out of range") {
    spec.speeds = Eigen::VectorXd::Constant(1, 1.0);
    spec.k = 2;
    CHECK_THROWS_AS(build_plant(spec), ValidationError);
  }
  SUBCASE("A not square") {
    spec.speeds = Eigen::VectorXd::Constant(1, 1.0);
    spec.A = Eigen::MatrixXd::Zero(1, 2);
    CHECK_THROWS_AS(build_plant(spec), ValidationError);
  }
  SUBCASE("E0 wrong shape") {
    spec.speeds = Eigen::VectorXd::Constant(1, 1.0);
    spec.E0 = Eigen::MatrixXd::Zero(2, 1);
    CHECK_THROWS_AS(build_plant(spec), ValidationError);
  }
}

TEST_CASE("make_grid enforces the minimum resolution") {
  CHECK(make_grid(8).cells == 8);
  CHECK_THROWS_AS(make_grid(7), ValidationError);
  CHECK(make_grid(100).h() == doctest::Approx(0.01));
  CHECK(make_grid(100).node(0) == doctest::Approx(0.005));
}

TEST_CASE("h_inner quadrature basics") {
  Grid grid = make_grid(200);
  auto wt = make_weight(InnerProductWeight::Mode::plain,
                        Eigen::VectorXd::Constant(1, 1.0));

  Profile ones = profile_constant(grid, 1, 1.0);
  CHECK(h_inner(ones, ones, grid, wt) == doctest::Approx(1.0).epsilon(1e-13));

  Profile linear(grid.cells, 1);
  for (int j = 0; j < grid.cells; ++j) linear(j, 0) = grid.node(j);
  // midpoint rule is exact on affine integrands
  CHECK(h_inner(ones, linear, grid, wt) ==
        doctest::Approx(0.5).epsilon(1e-13));

  auto weighted = make_weight(InnerProductWeight::Mode::speed_weighted,
                              Eigen::VectorXd::Constant(1, 2.0));
  CHECK(h_inner(ones, ones, grid, weighted) ==
        doctest::Approx(0.5).epsilon(1e-13));

  Profile wrong(grid.cells, 2);
  CHECK_THROWS_AS(h_inner(ones, wrong, grid, wt), DimensionError);
}

TEST_CASE("h_inner induces a norm") {
  Grid grid = make_grid(64);
  auto wt = make_weight(InnerProductWeight::Mode::plain,
                        Eigen::VectorXd::Constant(2, 1.0));
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Profile w = testing::random_profile(grid, 2, rng);
    CHECK(h_inner(w, w, grid, wt) >= 0.0);
  }
  Profile zero = profile_constant(grid, 2, 0.0);
  CHECK(h_inner(zero, zero, grid, wt) == 0.0);
  Profile spike = zero;
  spike(3, 1) = 1e-8;
  CHECK(h_inner(spike, spike, grid, wt) > 0.0);
}

TEST_CASE("check_standing_assumptions passes on the scalar loop") {
  auto plant = make_scalar_transport(1.0, 1.0, 1.0);
  Grid grid = make_grid(64);
  auto wt = make_weight(InnerProductWeight::Mode::plain, plant.speeds);
  auto report = check_standing_assumptions(plant, grid, wt);
  CHECK(report.contraction_ok);
  CHECK(report.hurwitz_ok);
  CHECK(report.spectra_disjoint_ok);
  CHECK(report.disjoint_exact);  // unit recirculation preserves the norm
  CHECK(report.all_pass());
}

TEST_CASE("check_standing_assumptions fails on an expanding boundary") {
  auto plant = testing::make_two_channel_fold(1.0, 1.0, 1.0);
  plant.D1 = Eigen::MatrixXd::Constant(1, 1, 2.0);
  plant = build_plant(plant);
  Grid grid = make_grid(32);
  auto wt = make_weight(InnerProductWeight::Mode::speed_weighted, plant.speeds);
  auto report = check_standing_assumptions(plant, grid, wt);
  CHECK_FALSE(report.contraction_ok);
  CHECK(report.boundary_excess > 1.0);
}

TEST_CASE("check_standing_assumptions fails on an unstable A") {
  auto plant = make_scalar_transport(-1.0, 1.0, 1.0);  // A = +1
  Grid grid = make_grid(32);
  auto wt = make_weight(InnerProductWeight::Mode::plain, plant.speeds);
  auto report = check_standing_assumptions(plant, grid, wt);
  CHECK_FALSE(report.hurwitz_ok);
}

TEST_CASE("check_standing_assumptions contraction verdict is monotone in gains") {
  auto plant = testing::make_two_channel_fold(1.0, 1.0, 1.0);
  Grid grid = make_grid(32);
  auto wt = make_weight(InnerProductWeight::Mode::speed_weighted, plant.speeds);
  REQUIRE(check_standing_assumptions(plant, grid, wt).contraction_ok);
  for (double scale : {0.9, 0.5, 0.1, 0.0}) {
    PlantSpec scaled = plant;
    scaled.D0 *= scale;
    scaled.D1 *= scale;
    CHECK(check_standing_assumptions(scaled, grid, wt).contraction_ok);
  }
}

TEST_CASE("check_standing_assumptions discretized fallback carries a caveat") {
  auto plant = make_scalar_transport(1.0, 1.0, 1.0, 0.5);
  Grid grid = make_grid(32);
  auto wt = make_weight(InnerProductWeight::Mode::plain, plant.speeds);
  auto report = check_standing_assumptions(plant, grid, wt);
  CHECK(report.contraction_ok);
  CHECK(report.hurwitz_ok);
  CHECK_FALSE(report.disjoint_exact);
  CHECK(report.spectra_disjoint_ok);  // Re log(0.5) well away from -a
  CHECK(report.spectral_gap > 0.0);
}

TEST_CASE("fold and unfold") {
  const int half = 32;
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(half);
  Eigen::VectorXd folded = fold_scalar(ones, ones);
  CHECK(folded.size() == 2 * half);
  CHECK((folded.array() == 1.0).all());

  // w+(y) = y, w- = 0 samples fold to 2x left of 1/2 and 0 right of it
  Eigen::VectorXd ramp(half);
  Grid half_grid{half};
  for (int j = 0; j < half; ++j) ramp(j) = half_grid.node(j);
  Eigen::VectorXd folded2 = fold_scalar(ramp, Eigen::VectorXd::Zero(half));
  Grid full_grid{2 * half};
  for (int j = 0; j < half; ++j) {
    CHECK(folded2(j) == doctest::Approx(2.0 * full_grid.node(j)));
  }
  for (int j = half; j < 2 * half; ++j) CHECK(folded2(j) == 0.0);

  CHECK_THROWS_AS(unfold_scalar(Eigen::VectorXd::Zero(33)), DimensionError);
  CHECK_THROWS_AS(fold_scalar(ones, Eigen::VectorXd::Zero(half - 1)),
                  DimensionError);
}

TEST_CASE("fold round trip is the identity") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Eigen::VectorXd a(25), b(25);
  for (int i = 0; i < 25; ++i) {
    a(i) = dist(rng);
    b(i) = dist(rng);
  }
  auto [ra, rb] = unfold_scalar(fold_scalar(a, b));
  CHECK((ra - a).norm() == 0.0);
  CHECK((rb - b).norm() == 0.0);
}

TEST_CASE("upwind generator annihilates constants under unit recirculation") {
  auto plant = make_scalar_transport(1.0, 1.0, 0.0);
  Grid grid = make_grid(32);
  Eigen::MatrixXd gen = upwind_generator(plant, grid);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid.cells);
  CHECK((gen * ones).norm() == doctest::Approx(0.0));
}

TEST_CASE("upwind generator is dissipative in the weighted metric") {
  auto plant = testing::make_two_channel_fold(1.0, 1.0, 1.0);
  Grid grid = make_grid(24);
  auto wt = make_weight(InnerProductWeight::Mode::speed_weighted, plant.speeds);
  Eigen::MatrixXd gen = upwind_generator(plant, grid);
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    Profile w = testing::random_profile(grid, 2, rng);
    Profile rate = unstack_profile(gen * stack_profile(w), grid.cells, 2);
    CHECK(h_inner(rate, w, grid, wt) <= 1e-12);
  }
}

TEST_CASE("upwind injection scales the inflow cell by speed over h") {
  auto plant = make_scalar_transport(1.0, 2.0, 3.0);
  Grid grid = make_grid(16);
  Eigen::MatrixXd inj = upwind_injection(plant, grid);
  CHECK(inj.rows() == 16);
  CHECK(inj(0, 0) == doctest::Approx(2.0 / grid.h() * 3.0));
  // only the inflow cell is touched
  CHECK(inj.bottomRows(15).norm() == 0.0);
}
