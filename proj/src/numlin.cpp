#include "cascade/numlin.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace cascade::numlin {

Mat make_matrix(Eigen::Index rows, Eigen::Index cols,
                const std::vector<double>& row_major) {
  if (rows < 0 || cols < 0) {
    throw ValidationError("make_matrix: negative dimensions");
  }
  if (static_cast<Eigen::Index>(row_major.size()) != rows * cols) {
    throw DimensionError("make_matrix: entry count " +
                         std::to_string(row_major.size()) +
                         " does not equal rows*cols = " +
                         std::to_string(rows * cols));
  }
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double v = row_major[static_cast<size_t>(i * cols + j)];
      if (!std::isfinite(v)) {
        throw ValidationError("make_matrix: non-finite entry at (" +
                              std::to_string(i) + "," + std::to_string(j) +
                              ")");
      }
      m(i, j) = v;
    }
  }
  return m;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Vec vec(const Mat& x) {
  return Eigen::Map<const Vec>(x.data(), x.size());
}

Mat unvec(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) {
    throw DimensionError("unvec: size mismatch");
  }
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

bool Spectrum::is_hurwitz(double margin) const {
  return std::all_of(eigenvalues.begin(), eigenvalues.end(),
                     [margin](const std::complex<double>& l) {
                       return l.real() < -margin;
                     });
}

Mat solve_lyapunov(const Mat& a) {
  if (a.rows() != a.cols()) {
    throw DimensionError("solve_lyapunov: matrix must be square");
  }
  const Eigen::Index n = a.rows();
  if (n == 0) {
    throw DimensionError("solve_lyapunov: empty matrix");
  }
  const Mat id = Mat::Identity(n, n);
  const Mat at = a.transpose();
  const Mat system = kron(id, at) + kron(at, id);
  Eigen::FullPivLU<Mat> lu(system);
  if (!lu.isInvertible()) {
    throw SingularSystemError(
        "solve_lyapunov: Kronecker system is singular (an eigenvalue pair of "
        "A sums to zero, so A is not Hurwitz)");
  }
  const Vec p = lu.solve(-vec(id));
  Mat pm = unvec(p, n, n);
  pm = 0.5 * (pm + pm.transpose()).eval();
  return pm;
}

Mat mat_exp(const Mat& x, double t) {
  if (x.rows() != x.cols()) {
    throw DimensionError("mat_exp: matrix must be square");
  }
  if (!std::isfinite(t) || !x.allFinite()) {
    throw NumericalError("mat_exp: non-finite input");
  }
  const Eigen::Index n = x.rows();
  if (n == 0) return Mat(0, 0);

  Mat a = t * x;
  // Infinity norm drives the scaling so that the Padé core sees a small
  // argument; theta is the degree-13 accuracy radius.
  const double theta13 = 5.371920351148152;
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > theta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
    a *= std::ldexp(1.0, -squarings);
  }

  static const double b[] = {64764752532480000.0, 32382376266240000.0,
                             7771770303897600.0,  1187353796428800.0,
                             129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,
                             1323241920.0,        40840800.0,
                             960960.0,            16380.0,
                             182.0,               1.0};
  const Mat id = Mat::Identity(n, n);
  const Mat a2 = a * a;
  const Mat a4 = a2 * a2;
  const Mat a6 = a4 * a2;
  const Mat u =
      a * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 +
           b[5] * a4 + b[3] * a2 + b[1] * id);
  const Mat v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 +
                b[4] * a4 + b[2] * a2 + b[0] * id;

  Eigen::PartialPivLU<Mat> lu(v - u);
  Mat f = lu.solve(v + u);
  for (int i = 0; i < squarings; ++i) {
    f = (f * f).eval();
    if (!f.allFinite()) break;
  }
  if (!f.allFinite()) {
    throw NumericalError("mat_exp: overflow, t*norm(X) too large");
  }
  return f;
}

Spectrum eig(const Mat& x) {
  if (x.rows() != x.cols()) {
    throw DimensionError("eig: matrix must be square");
  }
  if (x.rows() == 0) {
    throw DimensionError("eig: empty matrix");
  }
  Eigen::EigenSolver<Mat> solver(x, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig: QR iteration did not converge");
  }
  Spectrum s;
  s.source = Spectrum::Source::exact;
  s.eigenvalues.reserve(static_cast<size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    s.eigenvalues.push_back(solver.eigenvalues()(i));
  }
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(),
            [](const std::complex<double>& a, const std::complex<double>& b) {
              if (a.real() != b.real()) return a.real() < b.real();
              return a.imag() < b.imag();
            });
  return s;
}

Eigen::Index numerical_rank(const Mat& x, double tol) {
  if (x.size() == 0) {
    throw DimensionError("numerical_rank: empty matrix");
  }
  if (!(tol > 0)) {
    throw ValidationError("numerical_rank: tolerance must be positive");
  }
  Eigen::JacobiSVD<Mat> svd(x);
  const auto& s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  if (smax <= 0.0) return 0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * smax) ++rank;
  }
  return rank;
}

Mat complex_embedding(const CMat& x) {
  Mat out(2 * x.rows(), 2 * x.cols());
  out.topLeftCorner(x.rows(), x.cols()) = x.real();
  out.topRightCorner(x.rows(), x.cols()) = -x.imag();
  out.bottomLeftCorner(x.rows(), x.cols()) = x.imag();
  out.bottomRightCorner(x.rows(), x.cols()) = x.real();
  return out;
}

Eigen::Index numerical_rank_complex(const CMat& x, double tol) {
  return numerical_rank(complex_embedding(x), tol) / 2;
}

}  // namespace cascade::numlin
