#include "cascade/plant.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

namespace cascade {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError("build_plant: " + what);
}

void require_shape(const Eigen::MatrixXd& m, Eigen::Index rows,
                   Eigen::Index cols, const std::string& name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "build_plant: " << name << " must be " << rows << "x" << cols
       << ", got " << m.rows() << "x" << m.cols();
    throw ValidationError(os.str());
  }
  if (!m.allFinite()) {
    throw ValidationError("build_plant: " + name + " has non-finite entries");
  }
}

}  // namespace

Grid make_grid(int cells) {
  if (cells < 8) {
    throw ValidationError("make_grid: need at least 8 cells, got " +
                          std::to_string(cells));
  }
  return Grid{cells};
}

InnerProductWeight make_weight(InnerProductWeight::Mode mode,
                               const Eigen::VectorXd& speeds) {
  InnerProductWeight wt;
  wt.mode = mode;
  wt.weights = Eigen::VectorXd::Ones(speeds.size());
  if (mode == InnerProductWeight::Mode::speed_weighted) {
    for (Eigen::Index i = 0; i < speeds.size(); ++i) {
      if (speeds(i) == 0.0) {
        throw ValidationError("make_weight: zero speed");
      }
      wt.weights(i) = 1.0 / std::abs(speeds(i));
    }
  }
  return wt;
}

Eigen::MatrixXd PlantSpec::boundary_coupling() const {
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(N, N);
  coupling.topLeftCorner(k, k) = R0;
  coupling.topRightCorner(k, N - k) = D0;
  coupling.bottomLeftCorner(N - k, k) = D1;
  coupling.bottomRightCorner(N - k, N - k) = R1;
  return coupling;
}

Eigen::MatrixXd PlantSpec::boundary_injection() const {
  Eigen::MatrixXd inj(N, n);
  inj.topRows(k) = E0;
  inj.bottomRows(N - k) = E1;
  return inj;
}

PlantSpec build_plant(PlantSpec raw) {
  require(raw.n >= 1, "ODE dimension n must be >= 1");
  require(raw.m >= 1, "input dimension m must be >= 1");
  require(raw.p >= 1, "output dimension p must be >= 1");
  require(raw.N >= 1, "channel count N must be >= 1");
  require(raw.k >= 1 && raw.k <= raw.N,
          "positive-speed count k must satisfy 1 <= k <= N");

  require_shape(raw.A, raw.n, raw.n, "A");
  require_shape(raw.B, raw.n, raw.m, "B");
  require_shape(raw.C, raw.p, raw.n, "C");

  require(raw.speeds.size() == raw.N, "speeds must have N entries");
  require(raw.speeds.allFinite(), "speeds must be finite");
  for (int i = 0; i < raw.N; ++i) {
    if (raw.speeds(i) == 0.0) {
      throw ValidationError("build_plant: speed " + std::to_string(i) +
                            " is zero, transport undefined");
    }
    if (i < raw.k) {
      require(raw.speeds(i) > 0.0,
              "speed " + std::to_string(i) + " must be positive (first k)");
    } else {
      require(raw.speeds(i) < 0.0,
              "speed " + std::to_string(i) + " must be negative (last N-k)");
    }
  }

  const int k = raw.k;
  const int neg = raw.N - raw.k;
  if (raw.R0.size() == 0) raw.R0 = Eigen::MatrixXd::Zero(k, k);
  if (raw.R1.size() == 0) raw.R1 = Eigen::MatrixXd::Zero(neg, neg);
  if (raw.E0.size() == 0) raw.E0 = Eigen::MatrixXd::Zero(k, raw.n);
  if (raw.E1.size() == 0) raw.E1 = Eigen::MatrixXd::Zero(neg, raw.n);
  if (raw.D0.size() == 0) raw.D0 = Eigen::MatrixXd::Zero(k, neg);
  if (raw.D1.size() == 0) raw.D1 = Eigen::MatrixXd::Zero(neg, k);

  require_shape(raw.D0, k, neg, "D0");
  require_shape(raw.D1, neg, k, "D1");
  require_shape(raw.R0, k, k, "R0");
  require_shape(raw.R1, neg, neg, "R1");
  require_shape(raw.E0, k, raw.n, "E0");
  require_shape(raw.E1, neg, raw.n, "E1");

  return raw;
}

PlantSpec make_scalar_transport(double a, double lambda, double c,
                                double recirculation) {
  if (!(lambda > 0.0)) {
    throw ValidationError(
        "make_scalar_transport: lambda must be positive");
  }
  PlantSpec spec;
  spec.n = spec.m = spec.p = 1;
  spec.N = spec.k = 1;
  spec.A = Eigen::MatrixXd::Constant(1, 1, -a);
  spec.B = Eigen::MatrixXd::Constant(1, 1, 1.0);
  spec.C = Eigen::MatrixXd::Constant(1, 1, c);
  spec.speeds = Eigen::VectorXd::Constant(1, lambda);
  spec.R0 = Eigen::MatrixXd::Constant(1, 1, recirculation);
  spec.E0 = Eigen::MatrixXd::Constant(1, 1, c);
  return build_plant(spec);
}

Eigen::VectorXd stack_profile(const Profile& w) {
  return Eigen::Map<const Eigen::VectorXd>(w.data(), w.size());
}

Profile unstack_profile(const Eigen::VectorXd& v, int cells, int channels) {
  if (v.size() != static_cast<Eigen::Index>(cells) * channels) {
    throw DimensionError("unstack_profile: size mismatch");
  }
  return Eigen::Map<const Profile>(v.data(), cells, channels);
}

double h_inner(const Profile& w1, const Profile& w2, const Grid& grid,
               const InnerProductWeight& wt) {
  if (w1.rows() != w2.rows() || w1.cols() != w2.cols()) {
    throw DimensionError("h_inner: profile shapes differ");
  }
  if (w1.rows() != grid.cells || w1.cols() != wt.weights.size()) {
    throw DimensionError("h_inner: profile does not match grid/weight");
  }
  double acc = 0.0;
  for (Eigen::Index ch = 0; ch < w1.cols(); ++ch) {
    acc += wt.weights(ch) * w1.col(ch).dot(w2.col(ch));
  }
  return acc * grid.h();
}

double h_norm(const Profile& w, const Grid& grid,
              const InnerProductWeight& wt) {
  return std::sqrt(std::max(0.0, h_inner(w, w, grid, wt)));
}

Profile profile_constant(const Grid& grid, int channels, double value) {
  return Profile::Constant(grid.cells, channels, value);
}

Profile profile_sine(const Grid& grid, int channels, int mode) {
  Profile w(grid.cells, channels);
  for (int j = 0; j < grid.cells; ++j) {
    const double v = std::sin(2.0 * M_PI * mode * grid.node(j));
    for (int ch = 0; ch < channels; ++ch) w(j, ch) = v;
  }
  return w;
}

std::string AssumptionReport::summary() const {
  std::ostringstream os;
  os << "(i) boundary contraction: " << (contraction_ok ? "pass" : "FAIL")
     << " (excess " << boundary_excess << ")\n"
     << "(ii) A Hurwitz: " << (hurwitz_ok ? "pass" : "FAIL") << "\n"
     << "(iii) spectra disjoint: " << (spectra_disjoint_ok ? "pass" : "FAIL")
     << (disjoint_exact ? " (exact, norm-preserving boundary)"
                        : " (discretized spectrum, caveat)");
  if (!disjoint_exact) os << " gap " << spectral_gap;
  return os.str();
}

AssumptionReport check_standing_assumptions(const PlantSpec& plant, const Grid& grid,
                                   const InnerProductWeight& wt) {
  AssumptionReport report;

  // Trace metric: the energy flux weighs each boundary trace by
  // weight * |speed|, so contraction means K^T W K <= W.
  const Eigen::MatrixXd coupling = plant.boundary_coupling();
  Eigen::VectorXd trace_w(plant.N);
  for (int i = 0; i < plant.N; ++i) {
    trace_w(i) = wt.weights(i) * std::abs(plant.speeds(i));
  }
  const Eigen::MatrixXd w_mat = trace_w.asDiagonal();
  const Eigen::MatrixXd excess =
      coupling.transpose() * w_mat * coupling - w_mat;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(excess);
  report.boundary_excess = es.eigenvalues().maxCoeff();
  const double tol = 1e-12 * std::max(1.0, trace_w.maxCoeff());
  report.contraction_ok = report.boundary_excess <= tol;

  const auto spectrum_a = numlin::eig(plant.A);
  report.hurwitz_ok = spectrum_a.is_hurwitz();

  const bool norm_preserving = excess.norm() <= 1e-10 * std::max(1.0, w_mat.norm());
  if (norm_preserving && report.hurwitz_ok) {
    // Conservative boundary: the generator spectrum sits on the imaginary
    // axis, so a Hurwitz A cannot meet it.
    report.spectra_disjoint_ok = true;
    report.disjoint_exact = true;
    report.spectral_gap = -spectrum_a.eigenvalues.back().real();
  } else {
    const Eigen::MatrixXd gen = upwind_generator(plant, grid);
    auto spectrum_s = numlin::eig(gen);
    spectrum_s.source = numlin::Spectrum::Source::discretized;
    double gap = std::numeric_limits<double>::infinity();
    for (const auto& mu : spectrum_s.eigenvalues) {
      for (const auto& la : spectrum_a.eigenvalues) {
        gap = std::min(gap, std::abs(mu - la));
      }
    }
    report.spectral_gap = gap;
    report.disjoint_exact = false;
    double scale = 1.0;
    for (const auto& la : spectrum_a.eigenvalues) {
      scale = std::max(scale, std::abs(la));
    }
    report.spectra_disjoint_ok = gap > 1e-8 * scale;
  }
  return report;
}

Eigen::VectorXd fold_scalar(const Eigen::VectorXd& w_plus,
                            const Eigen::VectorXd& w_minus) {
  if (w_plus.size() != w_minus.size()) {
    throw DimensionError("fold_scalar: sample counts differ");
  }
  const Eigen::Index half = w_plus.size();
  Eigen::VectorXd folded(2 * half);
  for (Eigen::Index j = 0; j < half; ++j) {
    folded(j) = w_plus(j);
    folded(2 * half - 1 - j) = w_minus(j);
  }
  return folded;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unfold_scalar(
    const Eigen::VectorXd& folded) {
  if (folded.size() % 2 != 0) {
    throw DimensionError("unfold_scalar: folded grid size must be even");
  }
  const Eigen::Index half = folded.size() / 2;
  Eigen::VectorXd w_plus(half), w_minus(half);
  for (Eigen::Index j = 0; j < half; ++j) {
    w_plus(j) = folded(j);
    w_minus(j) = folded(2 * half - 1 - j);
  }
  return {w_plus, w_minus};
}

Eigen::MatrixXd upwind_generator(const PlantSpec& plant, const Grid& grid) {
  const int cells = grid.cells;
  const double h = grid.h();
  const int dim = cells * plant.N;
  const Eigen::MatrixXd coupling = plant.boundary_coupling();
  auto idx = [cells](int ch, int j) { return ch * cells + j; };
  auto trace_idx = [&](int ch) {
    return plant.speeds(ch) > 0 ? idx(ch, cells - 1) : idx(ch, 0);
  };

  Eigen::MatrixXd gen = Eigen::MatrixXd::Zero(dim, dim);
  for (int ch = 0; ch < plant.N; ++ch) {
    const double rate = std::abs(plant.speeds(ch)) / h;
    if (plant.speeds(ch) > 0) {
      for (int j = 0; j < cells; ++j) {
        gen(idx(ch, j), idx(ch, j)) -= rate;
        if (j > 0) gen(idx(ch, j), idx(ch, j - 1)) += rate;
      }
      for (int c = 0; c < plant.N; ++c) {
        if (coupling(ch, c) != 0.0) {
          gen(idx(ch, 0), trace_idx(c)) += rate * coupling(ch, c);
        }
      }
    } else {
      for (int j = 0; j < cells; ++j) {
        gen(idx(ch, j), idx(ch, j)) -= rate;
        if (j < cells - 1) gen(idx(ch, j), idx(ch, j + 1)) += rate;
      }
      for (int c = 0; c < plant.N; ++c) {
        if (coupling(ch, c) != 0.0) {
          gen(idx(ch, cells - 1), trace_idx(c)) += rate * coupling(ch, c);
        }
      }
    }
  }
  return gen;
}

Eigen::MatrixXd upwind_injection(const PlantSpec& plant, const Grid& grid) {
  const int cells = grid.cells;
  const double h = grid.h();
  const Eigen::MatrixXd inj = plant.boundary_injection();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(cells * plant.N, plant.n);
  for (int ch = 0; ch < plant.N; ++ch) {
    const double rate = std::abs(plant.speeds(ch)) / h;
    const int inflow_cell =
        plant.speeds(ch) > 0 ? ch * cells : ch * cells + (cells - 1);
    out.row(inflow_cell) = rate * inj.row(ch);
  }
  return out;
}

}  // namespace cascade
