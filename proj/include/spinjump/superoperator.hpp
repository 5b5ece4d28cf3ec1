#pragma once

#include <stdexcept>
#include <vector>

#include "spinjump/linalg.hpp"

namespace spinjump {

/// dim^2 x dim^2 generator acting on column-stacked density matrices.
struct Superoperator {
  int dim = 0;
  SuperMat matrix;
};

inline SuperVec vectorize(const Mat& rho) {
  SuperVec v(rho.size());
  for (Eigen::Index j = 0; j < rho.cols(); ++j)
    for (Eigen::Index i = 0; i < rho.rows(); ++i) v(j * rho.rows() + i) = rho(i, j);
  return v;
}

inline Mat unvectorize(const SuperVec& v, int dim) {
  Mat rho(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i < dim; ++i) rho(i, j) = v(j * dim + i);
  return rho;
}

inline Mat apply_superoperator(const Superoperator& s, const Mat& rho) {
  if (rho.rows() != s.dim || rho.cols() != s.dim)
    throw std::invalid_argument("apply_superoperator: dimension mismatch");
  return unvectorize(SuperVec(s.matrix * vectorize(rho)), s.dim);
}

namespace detail {
inline SuperMat eye_kron(const Mat& a, bool a_on_left) {
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(a.rows(), a.rows());
  const Eigen::MatrixXcd ad = a;
  // vec(A rho) = (I (x) A) vec(rho); vec(rho A) = (A^T (x) I) vec(rho)
  return a_on_left ? kron(id, ad) : kron(ad.transpose(), id);
}
}  // namespace detail

/// Jump part of the generator: sum_i L_i . L_i^dag, identified with the
/// terms bilinear in the density matrix.
inline Superoperator jump_superoperator(const std::vector<Mat>& lindblads, int dim) {
  Superoperator s{dim, SuperMat::Zero(dim * dim, dim * dim)};
  for (const Mat& l : lindblads) {
    if (l.rows() != dim || l.cols() != dim)
      throw std::invalid_argument("jump_superoperator: dimension mismatch");
    s.matrix += kron(l.conjugate(), Eigen::MatrixXcd(l));
  }
  return s;
}

/// Full Lindblad generator in vectorized form:
/// -i[H, .] + sum_i (L_i . L_i^dag - 1/2 {L_i^dag L_i, .}).
inline Superoperator lindblad_superoperator(const Mat& h, const std::vector<Mat>& lindblads) {
  const int dim = static_cast<int>(h.rows());
  if (h.cols() != dim) throw std::invalid_argument("lindblad_superoperator: H must be square");
  Superoperator s{dim, SuperMat::Zero(dim * dim, dim * dim)};
  s.matrix = -kImag * (detail::eye_kron(h, true) - detail::eye_kron(h, false));
  for (const Mat& l : lindblads) {
    if (l.rows() != dim || l.cols() != dim)
      throw std::invalid_argument("lindblad_superoperator: dimension mismatch");
    s.matrix += kron(l.conjugate(), Eigen::MatrixXcd(l));
    const Mat ldl = l.adjoint() * l;
    s.matrix -= 0.5 * (detail::eye_kron(ldl, true) + detail::eye_kron(ldl, false));
  }
  return s;
}

/// Direct (non-vectorized) evaluation of the same generator; the
/// independent route used to cross-check the superoperator construction.
inline Mat lindblad_rhs(const Mat& rho, const Mat& h, const std::vector<Mat>& lindblads) {
  Mat out = -kImag * (h * rho - rho * h);
  for (const Mat& l : lindblads) {
    const Mat ldl = l.adjoint() * l;
    out += l * rho * l.adjoint() - 0.5 * (ldl * rho + rho * ldl);
  }
  return out;
}

namespace detail {

// Closed uniform-grid quadrature weights over [0, m*tau] using only grid
// nodes 0..m: composite Simpson, a 3/8 block for odd interval counts, and
// the trapezoid rule for the single-interval case.
inline std::vector<double> quadrature_weights(int m, double tau) {
  std::vector<double> w(static_cast<std::size_t>(m) + 1, 0.0);
  if (m == 0) return w;
  if (m == 1) {
    w[0] = 0.5;
    w[1] = 0.5;
  } else if (m % 2 == 0) {
    for (int j = 0; j + 2 <= m; j += 2) {
      w[j] += 1.0 / 3.0;
      w[j + 1] += 4.0 / 3.0;
      w[j + 2] += 1.0 / 3.0;
    }
  } else if (m == 3) {
    w[0] = 3.0 / 8.0;
    w[1] = 9.0 / 8.0;
    w[2] = 9.0 / 8.0;
    w[3] = 3.0 / 8.0;
  } else {
    for (int j = 0; j + 2 <= m - 3; j += 2) {
      w[j] += 1.0 / 3.0;
      w[j + 1] += 4.0 / 3.0;
      w[j + 2] += 1.0 / 3.0;
    }
    w[m - 3] += 3.0 / 8.0;
    w[m - 2] += 9.0 / 8.0;
    w[m - 1] += 9.0 / 8.0;
    w[m] += 3.0 / 8.0;
  }
  for (double& x : w) x *= tau;
  return w;
}

}  // namespace detail

/// Truncated jump expansion of the propagator e^{Lt}: the sum over jump
/// counts k <= k_max of time-ordered products of between-jump propagators
/// e^{(L-J)(t_i - t_{i-1})} interleaved with J, with the nested integrals
/// evaluated by iterated quadrature on a uniform grid of `quad_points`
/// intervals. Exact as k_max -> infinity; the k = 0 term alone is
/// e^{(L-J)t}.
inline Superoperator dyson_expand(const Superoperator& l, const Superoperator& jop,
                                  double t, int k_max, int quad_points) {
  if (l.dim != jop.dim || l.matrix.rows() != jop.matrix.rows())
    throw std::invalid_argument("dyson_expand: generator dimensions differ");
  if (!(t > 0.0)) throw std::invalid_argument("dyson_expand: t must be positive");
  if (t * operator_norm(l.matrix) > 2.0 * (1.0 + 1e-12))
    throw std::invalid_argument("dyson_expand: t ||L|| must not exceed 2");
  if (quad_points < 16) throw std::invalid_argument("dyson_expand: quad_points >= 16");
  if (k_max < 0) throw std::invalid_argument("dyson_expand: k_max must be >= 0");

  const int g = quad_points;
  const double tau = t / g;
  const SuperMat between = l.matrix - jop.matrix;

  std::vector<SuperMat> no_jump(static_cast<std::size_t>(g) + 1);
  for (int i = 0; i <= g; ++i)
    no_jump[static_cast<std::size_t>(i)] = expm(SuperMat(between * (i * tau)));

  std::vector<std::vector<double>> weights(static_cast<std::size_t>(g) + 1);
  for (int m = 0; m <= g; ++m)
    weights[static_cast<std::size_t>(m)] = detail::quadrature_weights(m, tau);

  std::vector<SuperMat> term = no_jump;  // k = 0: pure between-jump evolution
  SuperMat total = term.back();
  const Eigen::Index n = l.matrix.rows();
  for (int k = 1; k <= k_max; ++k) {
    std::vector<SuperMat> jumped(static_cast<std::size_t>(g) + 1);
    for (int j = 0; j <= g; ++j)
      jumped[static_cast<std::size_t>(j)] = jop.matrix * term[static_cast<std::size_t>(j)];
    std::vector<SuperMat> next(static_cast<std::size_t>(g) + 1, SuperMat::Zero(n, n));
    for (int m = 1; m <= g; ++m) {
      const auto& w = weights[static_cast<std::size_t>(m)];
      SuperMat acc = SuperMat::Zero(n, n);
      for (int j = 0; j <= m; ++j) {
        if (w[static_cast<std::size_t>(j)] != 0.0)
          acc += w[static_cast<std::size_t>(j)] *
                 (no_jump[static_cast<std::size_t>(m - j)] * jumped[static_cast<std::size_t>(j)]);
      }
      next[static_cast<std::size_t>(m)] = acc;
    }
    term = std::move(next);
    total += term.back();
  }
  return Superoperator{l.dim, total};
}

}  // namespace spinjump
