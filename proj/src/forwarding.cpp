#include "cascade/forwarding.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <ostream>

#include "cascade/textio.hpp"

namespace cascade {

Controller synthesize(const PlantSpec& plant, const Grid& grid,
                      const Nonlinearity& sigma,
                      SylvesterSolution::Method method,
                      const InnerProductWeight& weight,
                      std::optional<Nonlinearity> shaping) {
  if (sigma.dim() != plant.m) {
    throw DimensionError("synthesize: sigma dimension does not match input");
  }
  if (shaping && shaping->dim() != plant.m) {
    throw DimensionError("synthesize: shaping dimension does not match input");
  }
  if (weight.weights.size() != plant.N) {
    throw DimensionError("synthesize: weight does not match channel count");
  }

  Controller ctl;
  ctl.P = numlin::solve_lyapunov(plant.A);
  ctl.M = solve_sylvester(plant, grid, method);
  ctl.weight = weight;
  ctl.sigma = sigma;
  ctl.shaping = std::move(shaping);
  ctl.B = plant.B;
  ctl.n = plant.n;
  ctl.m = plant.m;
  ctl.grid = grid;

  // Quadrature weights h * weight(ch) per stacked node make
  // adjoint_rows * stack(w) the exact adjoint of z -> M z.
  const int cells = grid.cells;
  Eigen::VectorXd quad(cells * plant.N);
  for (int ch = 0; ch < plant.N; ++ch) {
    quad.segment(ch * cells, cells).setConstant(grid.h() * weight.weights(ch));
  }
  ctl.adjoint_rows = ctl.M.values.transpose() * quad.asDiagonal();
  ctl.gram = ctl.adjoint_rows * ctl.M.values;
  ctl.gram = 0.5 * (ctl.gram + ctl.gram.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gram_eig(ctl.gram);
  ctl.Mnorm2 = std::max(0.0, gram_eig.eigenvalues().maxCoeff());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> p_eig(ctl.P);
  ctl.p_min = p_eig.eigenvalues().minCoeff();
  ctl.p_max = p_eig.eigenvalues().maxCoeff();

  ctl.c_hi = std::max(2.0, ctl.p_max + 2.0 * ctl.Mnorm2);
  ctl.c_lo = std::min(0.5 * ctl.p_min,
                      ctl.p_min / (ctl.p_min + 2.0 * ctl.Mnorm2));
  return ctl;
}

Eigen::VectorXd adjoint_apply(const Controller& ctl, const Profile& w) {
  if (w.rows() != ctl.grid.cells || w.cols() != ctl.M.channels) {
    throw DimensionError("adjoint_apply: profile shape mismatch");
  }
  return ctl.adjoint_rows * stack_profile(w);
}

Eigen::VectorXd feedback_nominal(const Controller& ctl,
                                 const CascadeState& state) {
  if (state.z.size() != ctl.n) {
    throw DimensionError("feedback: state dimension mismatch");
  }
  // u = -B^T [P z - M* w + (M* M) z]
  const Eigen::VectorXd adj = adjoint_apply(ctl, state.w);
  return -ctl.B.transpose() *
         Eigen::VectorXd(ctl.P * state.z - adj + ctl.gram * state.z);
}

Eigen::VectorXd feedback_u(const Controller& ctl, const CascadeState& state) {
  Eigen::VectorXd u = feedback_nominal(ctl, state);
  if (ctl.shaping) return (*ctl.shaping)(u);
  return u;
}

Eigen::VectorXd applied_input(const Controller& ctl,
                              const Eigen::VectorXd& u) {
  if (ctl.shaping) return ctl.sigma((*ctl.shaping)(u));
  return ctl.sigma(u);
}

double lyapunov_V(const Controller& ctl, const CascadeState& state) {
  if (state.z.size() != ctl.n || state.w.rows() != ctl.grid.cells ||
      state.w.cols() != ctl.M.channels) {
    throw DimensionError("lyapunov_V: state dimension mismatch");
  }
  const Profile deviation = state.w - ctl.M.apply(state.z);
  return state.z.dot(ctl.P * state.z) +
         h_inner(deviation, deviation, ctl.grid, ctl.weight);
}

double v_norm(const Controller& ctl, const CascadeState& state) {
  return std::sqrt(std::max(0.0, lyapunov_V(ctl, state)));
}

double x_norm(const Controller& ctl, const CascadeState& state) {
  return state.z.norm() + h_norm(state.w, ctl.grid, ctl.weight);
}

CascadeState state_difference(const CascadeState& a, const CascadeState& b) {
  if (a.z.size() != b.z.size() || a.w.rows() != b.w.rows() ||
      a.w.cols() != b.w.cols()) {
    throw DimensionError("state_difference: shape mismatch");
  }
  return CascadeState{a.z - b.z, a.w - b.w, a.t};
}

void write_controller(std::ostream& os, const Controller& ctl) {
  os << "cascade_forward controller v1\n";
  os << "n = " << ctl.n << "\n";
  os << "m = " << ctl.m << "\n";
  os << "channels = " << ctl.M.channels << "\n";
  os << "grid_cells = " << ctl.grid.cells << "\n";
  os << "weight_mode = "
     << (ctl.weight.mode == InnerProductWeight::Mode::plain ? "plain"
                                                            : "speed_weighted")
     << "\n";
  const char* method = "discrete";
  if (ctl.M.method == SylvesterSolution::Method::closed) method = "closed";
  if (ctl.M.method == SylvesterSolution::Method::bvp) method = "bvp";
  os << "sylvester_method = " << method << "\n";
  os << "sylvester_residual = " << fmt17(ctl.M.residual) << "\n";
  os << "p_min = " << fmt17(ctl.p_min) << "\n";
  os << "p_max = " << fmt17(ctl.p_max) << "\n";
  os << "Mnorm2 = " << fmt17(ctl.Mnorm2) << "\n";
  os << "c_lo = " << fmt17(ctl.c_lo) << "\n";
  os << "c_hi = " << fmt17(ctl.c_hi) << "\n";
  os << "sigma = " << ctl.sigma.describe() << "\n";
  os << "shaping = " << (ctl.shaping ? ctl.shaping->describe() : "none")
     << "\n";
  os << "P";
  for (int i = 0; i < ctl.n; ++i) {
    for (int j = 0; j < ctl.n; ++j) os << " " << fmt17(ctl.P(i, j));
  }
  os << "\n";
  for (int j = 0; j < ctl.grid.cells; ++j) {
    os << "M " << fmt17(ctl.grid.node(j));
    const Eigen::MatrixXd mj = ctl.M.node_value(j);
    for (int ch = 0; ch < mj.rows(); ++ch) {
      for (int c = 0; c < mj.cols(); ++c) os << " " << fmt17(mj(ch, c));
    }
    os << "\n";
  }
}

}  // namespace cascade
