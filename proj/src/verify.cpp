#include "cascade/verify.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "cascade/sylvester.hpp"

namespace cascade {

namespace {

void require_trace_matches(const SimulationTrace& trace,
                           const Controller& ctl) {
  if (trace.snapshots.empty()) {
    throw ValidationError("audit: empty trace");
  }
  const Snapshot& first = trace.front();
  if (first.z.size() != ctl.n || first.w.rows() != ctl.grid.cells ||
      first.w.cols() != ctl.M.channels) {
    throw DimensionError("audit: trace does not match the controller");
  }
}

}  // namespace

AuditReport decay_audit(const SimulationTrace& trace, const Controller& ctl) {
  require_trace_matches(trace, ctl);
  if (trace.snapshots.size() < 2) {
    throw ValidationError("decay_audit: need at least two snapshots");
  }
  const double v0 = trace.front().V;
  const double step_slack = 1e-9 * std::max(1.0, v0);
  const double h = ctl.grid.h();

  double worst_step = -std::numeric_limits<double>::infinity();
  double worst_slope = -std::numeric_limits<double>::infinity();
  double kappa_observed = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k + 1 < trace.snapshots.size(); ++k) {
    const Snapshot& cur = trace.snapshots[k];
    const Snapshot& nxt = trace.snapshots[k + 1];
    const double dt = nxt.t - cur.t;
    worst_step = std::max(worst_step, nxt.V - cur.V - step_slack);

    const double slope = (nxt.V - cur.V) / dt;
    const double bound =
        -cur.z.squaredNorm() - 2.0 * cur.u.dot(cur.sigma_u);
    const double scale = (h + dt) * (1.0 + v0);
    kappa_observed = std::max(kappa_observed, (slope - bound) / scale);
    worst_slope = std::max(worst_slope, slope - bound - kDecayKappa * scale);
  }

  AuditReport report;
  report.name = "decay";
  report.pass = worst_step <= 0.0 && worst_slope <= 0.0;
  report.worst_violation = std::max({0.0, worst_step, worst_slope});
  std::ostringstream os;
  os << "kappa_observed = " << kappa_observed << " (allowed " << kDecayKappa
     << "), V0 = " << v0;
  report.context = os.str();
  return report;
}

AuditReport contraction_audit(const SimulationTrace& a,
                              const SimulationTrace& b,
                              const Controller& ctl) {
  require_trace_matches(a, ctl);
  require_trace_matches(b, ctl);
  if (a.snapshots.size() != b.snapshots.size()) {
    throw ValidationError("contraction_audit: time grids differ");
  }
  for (size_t k = 0; k < a.snapshots.size(); ++k) {
    if (std::abs(a.snapshots[k].t - b.snapshots[k].t) >
        1e-12 * std::max(1.0, a.snapshots[k].t)) {
      throw ValidationError("contraction_audit: time grids differ");
    }
  }

  auto diff_norm = [&](size_t k) {
    const CascadeState sa{a.snapshots[k].z, a.snapshots[k].w,
                          a.snapshots[k].t};
    const CascadeState sb{b.snapshots[k].z, b.snapshots[k].w,
                          b.snapshots[k].t};
    return v_norm(ctl, state_difference(sa, sb));
  };

  const double d0 = diff_norm(0);
  const double slack = 1e-9 * std::max(1.0, d0);
  double worst = -std::numeric_limits<double>::infinity();
  double prev = d0;
  for (size_t k = 1; k < a.snapshots.size(); ++k) {
    const double cur = diff_norm(k);
    worst = std::max(worst, cur - prev - slack);
    prev = cur;
  }

  AuditReport report;
  report.name = "contraction";
  report.pass = worst <= 0.0;
  report.worst_violation = std::max(0.0, worst);
  std::ostringstream os;
  os << "initial difference norm = " << d0;
  report.context = os.str();
  return report;
}

AuditReport vnorm_monotone_audit(const SimulationTrace& trace,
                                 const Controller& ctl) {
  require_trace_matches(trace, ctl);
  const auto& snaps = trace.snapshots;
  auto norm_at = [&](size_t k) {
    return v_norm(ctl, CascadeState{snaps[k].z, snaps[k].w, snaps[k].t});
  };
  const double d0 = norm_at(0);
  const double slack = 1e-9 * std::max(1.0, d0);
  double worst = 0.0;
  double prev = d0;
  for (size_t k = 1; k < snaps.size(); ++k) {
    const double cur = norm_at(k);
    worst = std::max(worst, cur - prev - slack);
    prev = cur;
  }
  AuditReport report;
  report.name = "vnorm_monotone";
  report.pass = worst <= 0.0;
  report.worst_violation = std::max(0.0, worst);
  std::ostringstream os;
  os << "initial ||state||_V = " << d0;
  report.context = os.str();
  return report;
}

bool nonresonance_rank(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                       const Eigen::MatrixXd& c, std::complex<double> mu,
                       double tol) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || c.cols() != n) {
    throw DimensionError("nonresonance_rank: inconsistent block shapes");
  }
  const Eigen::Index m = b.cols();
  const Eigen::Index p = c.rows();
  if (n + m < n + p) return false;  // fewer columns than rows

  Eigen::MatrixXcd block = Eigen::MatrixXcd::Zero(n + p, n + m);
  block.topLeftCorner(n, n) = a.cast<std::complex<double>>();
  block.topLeftCorner(n, n).diagonal().array() -= mu;
  block.topRightCorner(n, m) = b.cast<std::complex<double>>();
  block.bottomLeftCorner(p, n) = c.cast<std::complex<double>>();
  return numlin::numerical_rank_complex(block, tol) == n + p;
}

int ProbeReport::flagged_count() const {
  return static_cast<int>(
      std::count_if(modes.begin(), modes.end(),
                    [](const ObservabilityProbe& m) { return m.flagged; }));
}

ProbeReport observability_probe(const PlantSpec& plant, const Controller& ctl,
                                int max_mode) {
  if (max_mode < 0) {
    throw ValidationError("observability_probe: max_mode must be >= 0");
  }
  ProbeReport report;

  const bool scalar_periodic =
      plant.N == 1 && plant.k == 1 && plant.R0(0, 0) == 1.0;
  if (scalar_periodic) {
    report.analytic_modes = true;
    const double lambda = plant.speeds(0);
    const int cells = ctl.grid.cells;
    for (int k = -max_mode; k <= max_mode; ++k) {
      Eigen::VectorXcd pairing = Eigen::VectorXcd::Zero(ctl.n);
      for (int j = 0; j < cells; ++j) {
        const double x = ctl.grid.node(j);
        const std::complex<double> mode =
            std::exp(std::complex<double>(0.0, 2.0 * M_PI * k * x));
        pairing += ctl.adjoint_rows.col(j).cast<std::complex<double>>() * mode;
      }
      ObservabilityProbe probe;
      probe.mode_index = k;
      probe.eigenvalue = std::complex<double>(0.0, -2.0 * M_PI * k * lambda);
      probe.pairing_magnitude =
          (ctl.B.transpose().cast<std::complex<double>>() * pairing).norm();
      probe.flagged = probe.pairing_magnitude <= kProbeFlagThreshold;
      report.modes.push_back(probe);
    }
    return report;
  }

  // Fallback: eigenvectors of the discretized generator. Honest but
  // grid-limited; flagged as a caveat when the boundary is not
  // norm-preserving (the generator is then not skew-adjoint).
  const auto weight = ctl.weight;
  Eigen::VectorXd trace_w(plant.N);
  for (int i = 0; i < plant.N; ++i) {
    trace_w(i) = weight.weights(i) * std::abs(plant.speeds(i));
  }
  const Eigen::MatrixXd coupling = plant.boundary_coupling();
  const Eigen::MatrixXd w_mat = trace_w.asDiagonal();
  const double excess =
      (coupling.transpose() * w_mat * coupling - w_mat).norm();
  report.caveat = excess > 1e-10 * std::max(1.0, w_mat.norm());
  report.analytic_modes = false;

  const Eigen::MatrixXd gen = upwind_generator(plant, ctl.grid);
  Eigen::EigenSolver<Eigen::MatrixXd> solver(gen);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("observability_probe: eigensolver did not converge");
  }
  const auto& values = solver.eigenvalues();
  const auto& vectors = solver.eigenvectors();

  std::vector<Eigen::Index> order(values.size());
  for (Eigen::Index i = 0; i < values.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Eigen::Index l, Eigen::Index r) {
    return std::abs(values(l)) < std::abs(values(r));
  });
  const int count = static_cast<int>(
      std::min<Eigen::Index>(2 * max_mode + 1, values.size()));
  std::vector<Eigen::Index> selected(order.begin(), order.begin() + count);
  std::sort(selected.begin(), selected.end(),
            [&](Eigen::Index l, Eigen::Index r) {
              return values(l).imag() < values(r).imag();
            });

  const double h = ctl.grid.h();
  for (int pos = 0; pos < count; ++pos) {
    const Eigen::Index idx = selected[static_cast<size_t>(pos)];
    Eigen::VectorXcd mode = vectors.col(idx);
    double norm2 = 0.0;
    for (int ch = 0; ch < plant.N; ++ch) {
      norm2 += weight.weights(ch) *
               mode.segment(ch * ctl.grid.cells, ctl.grid.cells).squaredNorm();
    }
    norm2 *= h;
    if (norm2 > 0.0) mode /= std::sqrt(norm2);

    ObservabilityProbe probe;
    probe.mode_index = pos - count / 2;
    probe.eigenvalue = values(idx);
    probe.pairing_magnitude =
        (ctl.B.transpose().cast<std::complex<double>>() *
         (ctl.adjoint_rows.cast<std::complex<double>>() * mode))
            .norm();
    probe.flagged = probe.pairing_magnitude <= kProbeFlagThreshold;
    report.modes.push_back(probe);
  }
  return report;
}

ConvergenceReport convergence_study(const ScenarioSpec& spec,
                                    const std::vector<int>& grids) {
  if (grids.size() < 3) {
    throw ValidationError("convergence_study: need at least three grids");
  }
  for (size_t i = 0; i + 1 < grids.size(); ++i) {
    if (grids[i + 1] <= grids[i] || grids[i + 1] % grids[i] != 0) {
      throw ValidationError(
          "convergence_study: grids must be ascending refinements");
    }
  }
  if (spec.w0.kind == InitialProfile::Kind::samples) {
    throw ValidationError(
        "convergence_study: sampled initial profiles cannot be refined");
  }

  const PlantSpec plant = build_plant(spec.plant);
  const bool has_closed_form = plant.N == 1 && plant.n == 1 &&
                               plant.R0(0, 0) == 1.0 && -plant.A(0, 0) > 0.0;

  ConvergenceReport report;
  std::vector<double> final_norms;
  for (int cells : grids) {
    const Grid grid = make_grid(cells);
    const auto discrete = solve_discrete(plant, grid);
    Eigen::MatrixXd reference;
    if (has_closed_form) {
      reference.resize(cells, 1);
      for (int j = 0; j < cells; ++j) {
        reference(j, 0) = closed_form_scalar(-plant.A(0, 0), plant.speeds(0),
                                             plant.E0(0, 0), grid.node(j));
      }
    } else {
      reference = solve_bvp(plant, grid).values;
    }
    ConvergenceRow row;
    row.cells = cells;
    row.gain_error = (discrete.values - reference).cwiseAbs().maxCoeff();

    const Scenario scenario = instantiate(spec, cells);
    const SimulationTrace trace = run(scenario);
    const CascadeState final_state{trace.back().z, trace.back().w,
                                   trace.back().t};
    final_norms.push_back(x_norm(scenario.controller, final_state));
    report.rows.push_back(row);
  }

  const double ref_norm = final_norms.back();
  for (size_t i = 0; i + 1 < final_norms.size(); ++i) {
    report.rows[i].state_error = std::abs(final_norms[i] - ref_norm);
  }

  report.gain_exact = true;
  for (const auto& row : report.rows) {
    if (row.gain_error > 1e-12) report.gain_exact = false;
  }
  if (!report.gain_exact) {
    for (size_t i = 0; i + 1 < report.rows.size(); ++i) {
      const double ratio = static_cast<double>(report.rows[i + 1].cells) /
                           report.rows[i].cells;
      report.gain_orders.push_back(
          std::log(report.rows[i].gain_error /
                   report.rows[i + 1].gain_error) /
          std::log(ratio));
    }
  }
  for (size_t i = 0; i + 2 < report.rows.size(); ++i) {
    if (report.rows[i].state_error <= 0.0 ||
        report.rows[i + 1].state_error <= 0.0) {
      continue;
    }
    const double ratio = static_cast<double>(report.rows[i + 1].cells) /
                         report.rows[i].cells;
    report.state_orders.push_back(
        std::log(report.rows[i].state_error /
                 report.rows[i + 1].state_error) /
        std::log(ratio));
  }
  return report;
}

}  // namespace cascade
