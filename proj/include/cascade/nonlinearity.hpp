#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>

#include "cascade/errors.hpp"

namespace cascade {

/// Cone-bounded input nonlinearity: continuous, vanishing exactly at 0,
/// monotone in the increment sense, and linearly bounded |σ(s)| <= L|s|.
/// The catalog covers positive linear gains, componentwise saturations,
/// a saturated square-root shaping (not locally Lipschitz), and
/// compositions of catalog entries.
class Nonlinearity {
 public:
  enum class Kind { linear, saturation, sat_phi, composed };

  static Nonlinearity linear(double gain, int dim = 1);
  static Nonlinearity saturation(const Eigen::VectorXd& levels);
  static Nonlinearity saturation(double level, int dim = 1);
  /// sat_level(phi(s)) with phi the square-root shaping; requires level > 1.
  static Nonlinearity sat_phi(double level);
  /// sigma ∘ shaping: the shaped feedback seen by the plant. Bound is
  /// L_sigma * L_shaping.
  static Nonlinearity compose_shaping(const Nonlinearity& shaping,
                                      const Nonlinearity& sigma);

  Eigen::VectorXd operator()(const Eigen::VectorXd& s) const;
  double eval_scalar(double s) const;

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  /// Declared cone constant L.
  double bound() const { return bound_; }
  double gain() const { return gain_; }
  const Eigen::VectorXd& levels() const { return levels_; }
  std::string describe() const;

 private:
  Nonlinearity() = default;

  Kind kind_ = Kind::linear;
  int dim_ = 1;
  double bound_ = 1.0;
  double gain_ = 1.0;            // linear
  Eigen::VectorXd levels_;       // saturation / sat_phi
  std::shared_ptr<const Nonlinearity> inner_;  // composed
  std::shared_ptr<const Nonlinearity> outer_;
};

struct ConeBoundReport {
  double worst_monotonicity = 0.0;  // min over pairs of (σ(s1)-σ(s2))ᵀ(s1-s2)
  double worst_ratio = 0.0;         // max over samples of |σ(s)|/|s|
  bool zero_at_zero = true;
  bool monotone_ok = true;
  bool bound_ok = true;

  bool pass() const { return zero_at_zero && monotone_ok && bound_ok; }
};

inline constexpr std::uint64_t kConeBoundSeed = 0x5eed0c0ffeeULL;

/// Sampling check of the cone-bound properties on [-span, span]^dim with a
/// fixed seed. The map form exists so tests can probe arbitrary callables.
ConeBoundReport validate_cone_bounded(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& map,
    int dim, double bound, int samples, double span,
    std::uint64_t seed = kConeBoundSeed);

ConeBoundReport validate_cone_bounded(const Nonlinearity& sigma, int samples,
                                      double span,
                                      std::uint64_t seed = kConeBoundSeed);

}  // namespace cascade
