#pragma once

#include <stdexcept>
#include <utility>

#include "spinjump/basis.hpp"
#include "spinjump/linalg.hpp"

namespace spinjump {

inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-9;
inline constexpr double kEigenvalueTol = 1e-9;

/// Hermitian, positive-semidefinite state with trace <= 1. The trace decays
/// below 1 as reactants are consumed. The checked constructor is for states
/// built by callers; `trusted` skips the eigenvalue check and is used by the
/// integrators, whose intermediate states are re-symmetrized each step.
class DensityMatrix {
 public:
  explicit DensityMatrix(Mat m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1)
      throw std::invalid_argument("DensityMatrix: matrix must be square");
    if (hermiticity_defect(m_) > kHermitianTol)
      throw std::invalid_argument("DensityMatrix: not Hermitian within 1e-12");
    const double tr = m_.trace().real();
    if (!(tr >= -kTraceTol && tr <= 1.0 + kTraceTol))
      throw std::invalid_argument("DensityMatrix: trace must lie in [0, 1]");
    Eigen::SelfAdjointEigenSolver<Mat> es(hermitize(m_), Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kEigenvalueTol)
      throw std::invalid_argument("DensityMatrix: negative eigenvalue beyond 1e-9");
  }

  static DensityMatrix trusted(Mat m) { return DensityMatrix(std::move(m), TrustedTag{}); }

  static DensityMatrix pure(const Vec& psi) {
    return DensityMatrix((psi * psi.adjoint()).eval());
  }

  const Mat& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  double trace_real() const { return m_.trace().real(); }

 private:
  struct TrustedTag {};
  DensityMatrix(Mat m, TrustedTag) : m_(std::move(m)) {}
  Mat m_;
};

/// Pure state of the radical pair. The norm may fall below 1 during no-jump
/// propagation, before renormalization.
class PureState {
 public:
  explicit PureState(Vec amplitudes) : v_(std::move(amplitudes)) {
    const double n2 = v_.squaredNorm();
    if (!(n2 > 0.0) || n2 > 1.0 + 2e-9)
      throw std::invalid_argument("PureState: norm must lie in (0, 1]");
  }

  static PureState basis_state(const BasisSpec& basis, int index) {
    Vec v = Vec::Zero(basis.dim);
    v(index) = 1.0;
    return PureState(std::move(v));
  }

  /// (|S> + |T>) / sqrt(2)
  static PureState coherent_st(const BasisSpec& basis) {
    Vec v = Vec::Zero(basis.dim);
    v(kIndexS) = 1.0 / std::sqrt(2.0);
    v(kIndexT) = 1.0 / std::sqrt(2.0);
    return PureState(std::move(v));
  }

  const Vec& amplitudes() const { return v_; }
  int dim() const { return static_cast<int>(v_.size()); }
  double norm() const { return v_.norm(); }
  double squared_norm() const { return v_.squaredNorm(); }

  PureState normalized() const { return PureState(Vec(v_ / v_.norm())); }

  DensityMatrix projector() const { return DensityMatrix::pure(v_); }

 private:
  Vec v_;
};

}  // namespace spinjump
