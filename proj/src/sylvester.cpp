#include "cascade/sylvester.hpp"

#include <cmath>
#include <ostream>

#include "cascade/textio.hpp"

namespace cascade {

namespace {

using numlin::kron;
using numlin::mat_exp;
using numlin::unvec;
using numlin::vec;

constexpr const char* kDisjointSpectraMsg =
    "the boundary system is singular: the spectra of the transport "
    "generator and of A must be disjoint for a unique gain";

// vec(M') = -(A^T kron Lambda^{-1}) vec(M) for the profile ODE
// Lambda M' + M A = 0.
Eigen::MatrixXd profile_generator(const PlantSpec& plant) {
  Eigen::VectorXd inv_speeds = plant.speeds.cwiseInverse();
  return -kron(plant.A.transpose(),
               Eigen::MatrixXd(inv_speeds.asDiagonal()));
}

SylvesterSolution sample_propagated(const PlantSpec& plant, const Grid& grid,
                                    const Eigen::MatrixXd& gen,
                                    const Eigen::VectorXd& m0) {
  const int N = plant.N;
  const int n = plant.n;
  SylvesterSolution sol;
  sol.grid_cells = grid.cells;
  sol.channels = N;
  sol.state_dim = n;
  sol.method = SylvesterSolution::Method::bvp;
  sol.values.resize(grid.cells * N, n);

  const Eigen::MatrixXd to_first = mat_exp(gen, 0.5 * grid.h());
  const Eigen::MatrixXd step = mat_exp(gen, grid.h());
  Eigen::VectorXd m = to_first * m0;
  for (int j = 0; j < grid.cells; ++j) {
    const Eigen::MatrixXd mj = unvec(m, N, n);
    for (int ch = 0; ch < N; ++ch) sol.values.row(ch * grid.cells + j) = mj.row(ch);
    m = step * m;
  }
  if (!sol.values.allFinite()) {
    throw NumericalError("solve_bvp: non-finite gain samples");
  }
  return sol;
}

// Max Frobenius norm of Lambda M' + M A over interior nodes, with M'
// estimated by a second-order central difference through the exact
// propagator (step 1e-6, well below any grid spacing).
double bvp_residual(const PlantSpec& plant, const Grid& grid,
                    const Eigen::MatrixXd& gen,
                    const SylvesterSolution& sol) {
  const double delta = 1e-6;
  const Eigen::MatrixXd forward = mat_exp(gen, delta);
  const Eigen::MatrixXd backward = mat_exp(gen, -delta);
  const Eigen::MatrixXd lambda = plant.speeds.asDiagonal();
  double worst = 0.0;
  for (int j = 1; j + 1 < grid.cells; ++j) {
    Eigen::VectorXd mj = vec(sol.node_value(j));
    Eigen::MatrixXd plus = unvec(forward * mj, plant.N, plant.n);
    Eigen::MatrixXd minus = unvec(backward * mj, plant.N, plant.n);
    Eigen::MatrixXd deriv = (plus - minus) / (2.0 * delta);
    worst = std::max(
        worst, (lambda * deriv + sol.node_value(j) * plant.A).norm());
  }
  return worst;
}

}  // namespace

Eigen::MatrixXd SylvesterSolution::node_value(int j) const {
  if (j < 0 || j >= grid_cells) {
    throw DimensionError("SylvesterSolution::node_value: node out of range");
  }
  Eigen::MatrixXd out(channels, state_dim);
  for (int ch = 0; ch < channels; ++ch) {
    out.row(ch) = values.row(ch * grid_cells + j);
  }
  return out;
}

Profile SylvesterSolution::apply(const Eigen::VectorXd& z) const {
  if (z.size() != state_dim) {
    throw DimensionError("SylvesterSolution::apply: state dimension mismatch");
  }
  return unstack_profile(values * z, grid_cells, channels);
}

double closed_form_scalar(double a, double lambda, double c, double x) {
  if (!(a > 0.0) || !(lambda > 0.0)) {
    throw ValidationError("closed_form_scalar: a and lambda must be positive");
  }
  const double ratio = a / lambda;
  if (ratio > 700.0) {
    throw NumericalError("closed_form_scalar: exp(a/lambda) overflows");
  }
  return c / (1.0 - std::exp(ratio)) * std::exp(ratio * x);
}

SylvesterSolution solve_closed(const PlantSpec& plant, const Grid& grid) {
  if (plant.N != 1 || plant.n != 1) {
    throw ValidationError(
        "solve_closed: closed form is scalar-only (N = n = 1)");
  }
  if (plant.R0(0, 0) != 1.0) {
    throw ValidationError(
        "solve_closed: closed form requires unit recirculation");
  }
  const double a = -plant.A(0, 0);
  const double lambda = plant.speeds(0);
  const double c = plant.E0(0, 0);
  SylvesterSolution sol;
  sol.grid_cells = grid.cells;
  sol.channels = 1;
  sol.state_dim = 1;
  sol.method = SylvesterSolution::Method::closed;
  sol.closed_form = ScalarClosedForm{a, lambda, c};
  sol.values.resize(grid.cells, 1);
  for (int j = 0; j < grid.cells; ++j) {
    sol.values(j, 0) = closed_form_scalar(a, lambda, c, grid.node(j));
  }
  sol.residual = 0.0;
  return sol;
}

SylvesterSolution solve_bvp(const PlantSpec& plant, const Grid& grid) {
  const int N = plant.N;
  const int n = plant.n;
  const int dim = N * n;
  const Eigen::MatrixXd gen = profile_generator(plant);
  const Eigen::MatrixXd prop = mat_exp(gen, 1.0);  // vec M(1) = prop vec M(0)
  const Eigen::MatrixXd coupling = plant.boundary_coupling();
  const Eigen::MatrixXd inj = plant.boundary_injection();

  // In-traces minus coupled out-traces equal the injection, with M(1)
  // eliminated through the propagator; unknown is vec M(0).
  Eigen::MatrixXd system = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs(dim);
  for (int c = 0; c < n; ++c) {
    for (int i = 0; i < N; ++i) {
      const int row = c * N + i;
      Eigen::RowVectorXd lhs = Eigen::RowVectorXd::Zero(dim);
      if (i < plant.k) {
        lhs(row) = 1.0;  // in-trace at x = 0
      } else {
        lhs = prop.row(row);  // in-trace at x = 1
      }
      for (int o = 0; o < N; ++o) {
        if (coupling(i, o) == 0.0) continue;
        if (o < plant.k) {
          lhs -= coupling(i, o) * prop.row(c * N + o);  // out-trace at x = 1
        } else {
          Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(dim);
          unit(c * N + o) = 1.0;  // out-trace at x = 0
          lhs -= coupling(i, o) * unit;
        }
      }
      system.row(row) = lhs;
      rhs(row) = inj(i, c);
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
  // Overlapping spectra collapse the boundary system. Pivot ratios alone
  // miss the uniformly tiny case (propagator equal to identity), so gate
  // the smallest-singular-value estimate against the data scale.
  const double scale = std::max(1.0, prop.cwiseAbs().maxCoeff());
  const double sigma_min_est =
      lu.rcond() * system.cwiseAbs().colwise().sum().maxCoeff();
  if (!lu.isInvertible() || sigma_min_est < 1e-13 * scale) {
    throw SingularSystemError(std::string("solve_bvp: ") +
                              kDisjointSpectraMsg);
  }
  const Eigen::VectorXd m0 = lu.solve(rhs);

  SylvesterSolution sol = sample_propagated(plant, grid, gen, m0);
  sol.residual = bvp_residual(plant, grid, gen, sol);
  return sol;
}

SylvesterSolution solve_discrete(const PlantSpec& plant, const Grid& grid) {
  const Eigen::MatrixXd gen = upwind_generator(plant, grid);
  const Eigen::MatrixXd inj = upwind_injection(plant, grid);
  const Eigen::Index rows = gen.rows();
  const int n = plant.n;

  // (I_n kron S_h - A^T kron I) vec(M_h) = -vec(inj)
  const Eigen::MatrixXd system =
      kron(Eigen::MatrixXd::Identity(n, n), gen) -
      kron(plant.A.transpose(), Eigen::MatrixXd::Identity(rows, rows));
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const Eigen::VectorXd m = lu.solve(-vec(inj));

  SylvesterSolution sol;
  sol.grid_cells = grid.cells;
  sol.channels = plant.N;
  sol.state_dim = n;
  sol.method = SylvesterSolution::Method::discrete;
  sol.values = unvec(m, rows, n);

  const double scale = std::max(1.0, inj.norm());
  if (!sol.values.allFinite()) {
    throw SingularSystemError(std::string("solve_discrete: ") +
                              kDisjointSpectraMsg);
  }
  sol.residual = (gen * sol.values - sol.values * plant.A + inj).norm();
  if (sol.residual > 1e-6 * scale) {
    throw SingularSystemError(std::string("solve_discrete: ") +
                              kDisjointSpectraMsg);
  }
  return sol;
}

SylvesterSolution solve_sylvester(const PlantSpec& plant, const Grid& grid,
                                  SylvesterSolution::Method method) {
  switch (method) {
    case SylvesterSolution::Method::closed:
      return solve_closed(plant, grid);
    case SylvesterSolution::Method::bvp:
      return solve_bvp(plant, grid);
    case SylvesterSolution::Method::discrete:
      return solve_discrete(plant, grid);
  }
  throw Error("solve_sylvester: unknown method");
}

double fixed_point_check(const SylvesterSolution& sol, const PlantSpec& plant,
                         const Grid& grid, double mu) {
  if (!(mu > 0.0)) {
    throw ValidationError("fixed_point_check: mu must be positive");
  }
  if (sol.grid_cells != grid.cells || sol.channels != plant.N ||
      sol.state_dim != plant.n) {
    throw DimensionError("fixed_point_check: solution does not match plant");
  }
  const Eigen::MatrixXd gen = upwind_generator(plant, grid);
  const Eigen::MatrixXd inj = upwind_injection(plant, grid);
  const Eigen::Index rows = gen.rows();
  const Eigen::MatrixXd resolvent_arg =
      mu * Eigen::MatrixXd::Identity(rows, rows) - gen;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(resolvent_arg);

  const Eigen::MatrixXd shifted = mu * Eigen::MatrixXd::Identity(plant.n, plant.n) - plant.A;
  double worst = 0.0;
  for (int j = 0; j < plant.n; ++j) {
    const Eigen::VectorXd lhs = sol.values.col(j);
    const Eigen::VectorXd rhs =
        lu.solve(Eigen::VectorXd(sol.values * shifted.col(j) + inj.col(j)));
    if (!rhs.allFinite()) {
      throw SingularSystemError("fixed_point_check: resolvent is singular");
    }
    const double denom = std::max({lhs.norm(), rhs.norm(), 1e-30});
    const double mismatch = (lhs - rhs).norm() / denom;
    worst = std::max(worst, lhs.norm() + rhs.norm() == 0.0 ? 0.0 : mismatch);
  }
  return worst;
}

void write_sylvester_csv(std::ostream& os, const SylvesterSolution& sol,
                         const Grid& grid) {
  os << "x";
  for (int ch = 0; ch < sol.channels; ++ch) {
    for (int c = 0; c < sol.state_dim; ++c) {
      os << ",M_" << ch << "_" << c;
    }
  }
  os << "\n";
  for (int j = 0; j < sol.grid_cells; ++j) {
    os << fmt17(grid.node(j));
    const Eigen::MatrixXd mj = sol.node_value(j);
    for (int ch = 0; ch < sol.channels; ++ch) {
      for (int c = 0; c < sol.state_dim; ++c) {
        os << "," << fmt17(mj(ch, c));
      }
    }
    os << "\n";
  }
}

}  // namespace cascade
