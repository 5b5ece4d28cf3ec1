#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "spinjump/linalg.hpp"

namespace spinjump {

/// Hilbert-space choices for the radical-pair problem.
///
/// TwoLevelST:          {|S>, |T>}              (dim 2)
/// FourLevelSTProducts: {|S>, |T>, |S0>, |T0>}  (dim 4)
///
/// The ordering is fixed: index 0 = |S>, 1 = |T>, 2 = |S0>, 3 = |T0>.
/// |S0> and |T0> are the shelf states that receive population from the
/// singlet and triplet reaction channels.
enum class BasisKind { TwoLevelST, FourLevelSTProducts };

inline constexpr int kIndexS = 0;
inline constexpr int kIndexT = 1;
inline constexpr int kIndexS0 = 2;
inline constexpr int kIndexT0 = 3;

struct BasisSpec {
  BasisKind kind = BasisKind::TwoLevelST;
  int dim = 2;

  static BasisSpec two_level() { return {BasisKind::TwoLevelST, 2}; }
  static BasisSpec four_level() { return {BasisKind::FourLevelSTProducts, 4}; }
  static BasisSpec from_kind(BasisKind k) {
    return k == BasisKind::TwoLevelST ? two_level() : four_level();
  }
};

/// Q_S = |S><S| embedded in the basis. Hermitian and idempotent.
inline Mat singlet_projector(const BasisSpec& basis) {
  Mat q = Mat::Zero(basis.dim, basis.dim);
  q(kIndexS, kIndexS) = 1.0;
  return q;
}

/// Q_T = |T><T| embedded in the basis. Q_S + Q_T is the identity on the
/// radical-pair {S,T} subspace and Q_S Q_T = 0.
inline Mat triplet_projector(const BasisSpec& basis) {
  Mat q = Mat::Zero(basis.dim, basis.dim);
  q(kIndexT, kIndexT) = 1.0;
  return q;
}

/// Radical-pair Hamiltonian parameters: `j` is the S-T energy separation,
/// `delta` an off-diagonal S<->T coupling. delta = 0 makes H commute with
/// both projectors (no singlet-triplet interconversion).
struct HamiltonianParams {
  double j = 0.0;
  double delta = 0.0;
};

/// H = j |S><S| + delta (|S><T| + |T><S|), embedded in the basis.
inline Mat build_hamiltonian(const HamiltonianParams& params, const BasisSpec& basis) {
  if (!std::isfinite(params.j) || !std::isfinite(params.delta))
    throw std::invalid_argument("build_hamiltonian: parameters must be finite");
  Mat h = Mat::Zero(basis.dim, basis.dim);
  h(kIndexS, kIndexS) = params.j;
  h(kIndexS, kIndexT) = params.delta;
  h(kIndexT, kIndexS) = params.delta;
  return h;
}

/// Reaction rates through the singlet and triplet channels, in 1/time.
struct RatePair {
  double k_s = 0.0;
  double k_t = 0.0;

  void validate() const {
    if (!(k_s >= 0.0) || !std::isfinite(k_s) || !(k_t >= 0.0) || !std::isfinite(k_t))
      throw std::invalid_argument("RatePair: rates must be finite and nonnegative");
  }
};

/// Basis + Hamiltonian + rates; everything a propagation needs.
struct ModelSpec {
  BasisSpec basis;
  HamiltonianParams ham;
  RatePair rates;

  Mat hamiltonian() const { return build_hamiltonian(ham, basis); }
};

/// H_eff = H - (i/2) sum_i L_i^dag L_i. The anti-Hermitian part encodes the
/// accumulated jump probability during jump-free propagation.
inline Mat effective_hamiltonian(const Mat& h, const std::vector<Mat>& lindblads) {
  Mat acc = Mat::Zero(h.rows(), h.cols());
  for (const Mat& l : lindblads) {
    if (l.rows() != h.rows() || l.cols() != h.cols())
      throw std::invalid_argument("effective_hamiltonian: dimension mismatch");
    acc += l.adjoint() * l;
  }
  return h - (kImag / 2.0) * acc;
}

/// H_eff for the traditional unraveling: H - i k_S/2 Q_S - i k_T/2 Q_T.
inline Mat effective_hamiltonian_traditional(const Mat& h, const RatePair& rates,
                                             const BasisSpec& basis) {
  return h - (kImag / 2.0) * (rates.k_s * singlet_projector(basis) +
                              rates.k_t * triplet_projector(basis));
}

/// H_eff for the Jones-Hore unraveling: H - i (k_S+k_T)/2 on the {S,T}
/// subspace (both channels attempt at state-independent rates).
inline Mat effective_hamiltonian_jones_hore(const Mat& h, const RatePair& rates,
                                            const BasisSpec& basis) {
  return h - (kImag * (rates.k_s + rates.k_t) / 2.0) *
                 (singlet_projector(basis) + triplet_projector(basis));
}

/// |S0><S| and |T0><T|: reaction jumps into the shelf states.
inline std::vector<Mat> jump_ops_traditional(const RatePair& rates) {
  const BasisSpec basis = BasisSpec::four_level();
  Mat j1 = Mat::Zero(basis.dim, basis.dim);
  j1(kIndexS0, kIndexS) = std::sqrt(rates.k_s);
  Mat j2 = Mat::Zero(basis.dim, basis.dim);
  j2(kIndexT0, kIndexT) = std::sqrt(rates.k_t);
  return {j1, j2};
}

/// Reaction jumps plus the measurement projectors |T><T| and |S><S|.
/// The measurement operators carry the rate of the opposite channel's
/// attempt: the singlet channel measures at k_s, the triplet at k_t.
inline std::vector<Mat> jump_ops_jones_hore(const RatePair& rates) {
  std::vector<Mat> ops = jump_ops_traditional(rates);
  const BasisSpec basis = BasisSpec::four_level();
  Mat j3 = Mat::Zero(basis.dim, basis.dim);
  j3(kIndexT, kIndexT) = std::sqrt(rates.k_s);
  Mat j4 = Mat::Zero(basis.dim, basis.dim);
  j4(kIndexS, kIndexS) = std::sqrt(rates.k_t);
  ops.push_back(j3);
  ops.push_back(j4);
  return ops;
}

}  // namespace spinjump
