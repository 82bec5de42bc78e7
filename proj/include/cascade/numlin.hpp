#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "cascade/errors.hpp"

namespace cascade::numlin {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;

/// Builds a matrix from row-major data, rejecting NaN/Inf entries and
/// size mismatches.
Mat make_matrix(Eigen::Index rows, Eigen::Index cols,
                const std::vector<double>& row_major);

/// Kronecker product a ⊗ b.
Mat kron(const Mat& a, const Mat& b);

/// Column-major vectorization, so that vec(A X B) = (Bᵀ ⊗ A) vec(X).
Vec vec(const Mat& x);
Mat unvec(const Vec& v, Eigen::Index rows, Eigen::Index cols);

struct Spectrum {
  enum class Source { exact, discretized };

  std::vector<std::complex<double>> eigenvalues;
  Source source = Source::exact;

  /// True when every eigenvalue satisfies Re λ < -margin.
  bool is_hurwitz(double margin = 0.0) const;
};

/// Solves PA + AᵀP = -I for the symmetric P via the Kronecker
/// linearization ((I ⊗ Aᵀ) + (Aᵀ ⊗ I)) vec(P) = -vec(I).
///
/// The caller is expected to have checked that A is Hurwitz; a singular
/// Kronecker system (eigenvalue pair of A summing to zero) raises
/// SingularSystemError.
Mat solve_lyapunov(const Mat& a);

/// exp(tX) by scaling-and-squaring with a degree-13 Padé core.
/// Throws NumericalError when the result overflows.
Mat mat_exp(const Mat& x, double t);

/// Eigenvalues of a real square matrix (real Schur iteration),
/// sorted by (Re, Im); conjugate pairs are both present.
Spectrum eig(const Mat& x);

/// Number of singular values above tol * (largest singular value).
Eigen::Index numerical_rank(const Mat& x, double tol = 1e-9);

/// Real 2x-embedding [[Re, -Im], [Im, Re]] of a complex matrix.
Mat complex_embedding(const CMat& x);

/// Rank of a complex matrix via its real embedding (half the embedded rank).
Eigen::Index numerical_rank_complex(const CMat& x, double tol = 1e-9);

}  // namespace cascade::numlin
