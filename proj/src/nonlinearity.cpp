#include "cascade/nonlinearity.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace cascade {

namespace {

double sat(double level, double s) {
  if (s > level) return level;
  if (s < -level) return -level;
  return s;
}

// Square-root shaping: identity on [-1, 1], sqrt growth outside. Monotone
// and odd, with tight cone constant (1 + sqrt(2)) / 2 reached at
// s = 4 - 2*sqrt(2).
double phi(double s) {
  if (s > 1.0) return std::sqrt(s - 1.0) + 1.0;
  if (s < -1.0) return -std::sqrt(-s - 1.0) - 1.0;
  return s;
}

constexpr double kSatPhiBound = 1.2071067811865475;  // (1 + sqrt 2) / 2

}  // namespace

Nonlinearity Nonlinearity::linear(double gain, int dim) {
  if (!(gain > 0.0)) {
    throw ValidationError("Nonlinearity::linear: gain must be positive");
  }
  if (dim < 1) throw ValidationError("Nonlinearity::linear: dim must be >= 1");
  Nonlinearity s;
  s.kind_ = Kind::linear;
  s.dim_ = dim;
  s.gain_ = gain;
  s.bound_ = gain;
  return s;
}

Nonlinearity Nonlinearity::saturation(const Eigen::VectorXd& levels) {
  if (levels.size() < 1) {
    throw ValidationError("Nonlinearity::saturation: needs at least one level");
  }
  if ((levels.array() <= 0.0).any()) {
    throw ValidationError(
        "Nonlinearity::saturation: all levels must be positive");
  }
  Nonlinearity s;
  s.kind_ = Kind::saturation;
  s.dim_ = static_cast<int>(levels.size());
  s.levels_ = levels;
  s.bound_ = 1.0;
  return s;
}

Nonlinearity Nonlinearity::saturation(double level, int dim) {
  return saturation(Eigen::VectorXd::Constant(dim, level));
}

Nonlinearity Nonlinearity::sat_phi(double level) {
  if (!(level > 1.0)) {
    throw ValidationError("Nonlinearity::sat_phi: level must be > 1");
  }
  Nonlinearity s;
  s.kind_ = Kind::sat_phi;
  s.dim_ = 1;
  s.levels_ = Eigen::VectorXd::Constant(1, level);
  s.bound_ = kSatPhiBound;
  return s;
}

Nonlinearity Nonlinearity::compose_shaping(const Nonlinearity& shaping,
                                           const Nonlinearity& sigma) {
  if (shaping.dim() != sigma.dim()) {
    throw DimensionError("compose_shaping: dimension mismatch");
  }
  Nonlinearity s;
  s.kind_ = Kind::composed;
  s.dim_ = sigma.dim();
  s.bound_ = sigma.bound() * shaping.bound();
  s.inner_ = std::make_shared<const Nonlinearity>(shaping);
  s.outer_ = std::make_shared<const Nonlinearity>(sigma);
  return s;
}

Eigen::VectorXd Nonlinearity::operator()(const Eigen::VectorXd& s) const {
  if (s.size() != dim_) {
    throw DimensionError("Nonlinearity: input has dimension " +
                         std::to_string(s.size()) + ", expected " +
                         std::to_string(dim_));
  }
  if (!s.allFinite()) {
    throw ValidationError("Nonlinearity: non-finite input");
  }
  switch (kind_) {
    case Kind::linear:
      return gain_ * s;
    case Kind::saturation: {
      Eigen::VectorXd out(dim_);
      for (int i = 0; i < dim_; ++i) out(i) = sat(levels_(i), s(i));
      return out;
    }
    case Kind::sat_phi: {
      Eigen::VectorXd out(1);
      out(0) = sat(levels_(0), phi(s(0)));
      return out;
    }
    case Kind::composed:
      return (*outer_)((*inner_)(s));
  }
  throw Error("Nonlinearity: unknown kind");
}

double Nonlinearity::eval_scalar(double s) const {
  Eigen::VectorXd v(1);
  v(0) = s;
  return (*this)(v)(0);
}

std::string Nonlinearity::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::linear:
      os << "linear(gain=" << gain_ << ")";
      break;
    case Kind::saturation:
      os << "sat(";
      for (int i = 0; i < dim_; ++i) os << (i ? "," : "") << levels_(i);
      os << ")";
      break;
    case Kind::sat_phi:
      os << "sat_phi(" << levels_(0) << ")";
      break;
    case Kind::composed:
      os << outer_->describe() << " o " << inner_->describe();
      break;
  }
  return os.str();
}

ConeBoundReport validate_cone_bounded(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
    int dim, double bound, int samples, double span, std::uint64_t seed) {
  if (samples < 1) {
    throw ValidationError("validate_cone_bounded: samples must be >= 1");
  }
  if (!(span > 0.0)) {
    throw ValidationError("validate_cone_bounded: span must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-span, span);

  ConeBoundReport report;
  const Eigen::VectorXd at_zero = map(Eigen::VectorXd::Zero(dim));
  report.zero_at_zero = (at_zero.array() == 0.0).all();

  double worst_mono = std::numeric_limits<double>::infinity();
  double worst_ratio = 0.0;
  for (int i = 0; i < samples; ++i) {
    Eigen::VectorXd s1(dim), s2(dim);
    for (int j = 0; j < dim; ++j) s1(j) = dist(rng);
    for (int j = 0; j < dim; ++j) s2(j) = dist(rng);
    const Eigen::VectorXd f1 = map(s1);
    const Eigen::VectorXd f2 = map(s2);
    worst_mono = std::min(worst_mono, (f1 - f2).dot(s1 - s2));
    const double n1 = s1.norm();
    const double n2 = s2.norm();
    if (n1 > 0.0) worst_ratio = std::max(worst_ratio, f1.norm() / n1);
    if (n2 > 0.0) worst_ratio = std::max(worst_ratio, f2.norm() / n2);
  }
  report.worst_monotonicity = worst_mono;
  report.worst_ratio = worst_ratio;
  report.monotone_ok = worst_mono >= -1e-12;
  report.bound_ok = worst_ratio <= bound + 1e-9;
  return report;
}

ConeBoundReport validate_cone_bounded(const Nonlinearity& sigma, int samples,
                                      double span, std::uint64_t seed) {
  return validate_cone_bounded(
      [&sigma](const Eigen::VectorXd& s) { return sigma(s); }, sigma.dim(),
      sigma.bound(), samples, span, seed);
}

}  // namespace cascade
