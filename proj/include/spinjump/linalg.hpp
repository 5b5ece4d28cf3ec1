#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

namespace spinjump {

using Complex = std::complex<double>;

// Dense complex matrices and vectors over the spin bases (dim <= 4).
// The fixed capacity keeps per-step temporaries off the heap in the
// trajectory loops.
using Mat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;
using Vec = Eigen::Matrix<Complex, Eigen::Dynamic, 1, 0, 4, 1>;

// Superoperators act on column-stacked density matrices (dim^2 <= 16).
using SuperMat = Eigen::MatrixXcd;
using SuperVec = Eigen::VectorXcd;

inline constexpr Complex kImag{0.0, 1.0};

struct NumericalError : std::runtime_error {
  long step_index;
  NumericalError(const std::string& what, long step)
      : std::runtime_error(what), step_index(step) {}
};

template <class M>
double max_abs(const Eigen::MatrixBase<M>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

template <class A, class B>
double max_abs_diff(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return max_abs((a - b).eval());
}

template <class M>
auto hermitize(const Eigen::MatrixBase<M>& m) {
  return ((m + m.adjoint()) / 2.0).eval();
}

template <class M>
double hermiticity_defect(const Eigen::MatrixBase<M>& m) {
  return max_abs((m - m.adjoint()).eval());
}

// Largest singular value; used for stability/step-size bounds.
template <class M>
double operator_norm(const M& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

// exp(A) via truncated Taylor series with scaling and squaring.
// Accurate to ~1e-12 relative for the matrix sizes used here.
template <class M>
M expm(const M& a) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw std::invalid_argument("expm: matrix must be square");
  double norm = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) norm = std::max(norm, a.row(i).cwiseAbs().sum());
  int squarings = 0;
  M b = a;
  if (norm > 0.5) {
    squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    b *= std::ldexp(1.0, -squarings);
  }
  M result = M::Identity(n, n);
  M term = M::Identity(n, n);
  for (int k = 1; k <= 40; ++k) {
    term = (term * b / static_cast<double>(k)).eval();
    result += term;
    if (max_abs(term) < 1e-17) break;
  }
  for (int i = 0; i < squarings; ++i) result = (result * result).eval();
  return result;
}

// Fourth-order truncated exponential series; valid for ||A|| dt <= 1e-2.
template <class M>
M expm_order4(const M& a) {
  const Eigen::Index n = a.rows();
  M a2 = a * a;
  M a3 = a2 * a;
  M a4 = a3 * a;
  return M::Identity(n, n) + a + a2 / 2.0 + a3 / 6.0 + a4 / 24.0;
}

inline SuperMat kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  SuperMat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace spinjump
