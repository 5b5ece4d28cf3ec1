#pragma once

#include <cmath>
#include <stdexcept>

#include "spinjump/master_eq.hpp"

namespace spinjump {

enum class YieldMethod { OdeFluxIntegration, TrajectoryCounting };

/// Channel-resolved recombination yields plus the unreacted remainder.
struct YieldReport {
  double singlet_yield = 0.0;
  double triplet_yield = 0.0;
  double survival = 0.0;
  YieldMethod method = YieldMethod::OdeFluxIntegration;
};

/// Yields by trapezoid integration of the recorded fluxes; survival is the
/// trace of the final state.
inline YieldReport yields_from_trace(const EvolutionTrace& trace) {
  const std::size_t n = trace.times.size();
  if (n == 0) throw std::invalid_argument("yields_from_trace: empty trace");
  YieldReport report;
  report.method = YieldMethod::OdeFluxIntegration;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = trace.times[k + 1] - trace.times[k];
    report.singlet_yield += 0.5 * dt * (trace.singlet_flux[k] + trace.singlet_flux[k + 1]);
    report.triplet_yield += 0.5 * dt * (trace.triplet_flux[k] + trace.triplet_flux[k + 1]);
  }
  report.survival = trace.states.back().trace_real();
  return report;
}

struct Populations {
  double p_s = 0.0;
  double p_t = 0.0;
  double coherence_mag = 0.0;
};

/// p_S = Tr{Q_S rho}, p_T = Tr{Q_T rho}, and |<S|rho|T>|.
inline Populations populations(const Mat& rho, const Mat& q_s, const Mat& q_t) {
  detail::require_same_dim(rho, q_s, "populations");
  detail::require_same_dim(rho, q_t, "populations");
  Populations p;
  p.p_s = (q_s * rho).trace().real();
  p.p_t = (q_t * rho).trace().real();
  p.coherence_mag = std::abs(rho(kIndexS, kIndexT));
  return p;
}

/// Default averaging window for the time-averaged coherence: ten S-T
/// oscillation periods. Meaningless when the S-T splitting vanishes.
inline double default_tau_max(const HamiltonianParams& params) {
  if (params.j == 0.0)
    throw std::invalid_argument("default_tau_max: requires a nonzero S-T splitting j");
  return 10.0 / std::abs(params.j);
}

/// Time-averaged coherence: |< Tr{rho_ST e^{-iH tau} rho_TS e^{iH tau}} >|
/// averaged over uniform midpoint samples tau in [0, tau_max] and normalized
/// by Tr{rho_SS} Tr{rho_TT}. Uses the factorized propagation of the
/// coherence block; see `factorization_discrepancy` for its validity.
inline double time_averaged_coherence(const Mat& rho, const Mat& h, double tau_max,
                                      int n_samples, const Mat& q_s, const Mat& q_t) {
  if (!(tau_max > 0.0))
    throw std::invalid_argument("time_averaged_coherence: tau_max must be positive");
  if (n_samples < 8)
    throw std::invalid_argument("time_averaged_coherence: need at least 8 samples");
  detail::require_same_dim(rho, h, "time_averaged_coherence");
  const double pop_s = (q_s * rho * q_s).trace().real();
  const double pop_t = (q_t * rho * q_t).trace().real();
  if (pop_s <= kExtinctionGuard || pop_t <= kExtinctionGuard) return 0.0;
  const Mat rho_st = q_s * rho * q_t;
  const Mat rho_ts = q_t * rho * q_s;
  Complex acc = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const double tau = (k + 0.5) * tau_max / n_samples;
    const Mat u = expm(Mat(-kImag * tau * h));
    acc += (rho_st * u * rho_ts * u.adjoint()).trace();
  }
  return std::abs(acc) / (n_samples * pop_s * pop_t);
}

/// Max-entry deviation, over the tau samples, between the factorized
/// propagation e^{-iH tau} rho_TS e^{iH tau} and the exact coherence block
/// Q_T e^{-iH tau} rho e^{iH tau} Q_S. Vanishes iff H commutes with the
/// projectors; grows with the S-T interconversion strength.
inline double factorization_discrepancy(const Mat& rho, const Mat& h, double tau_max,
                                        int n_samples, const Mat& q_s, const Mat& q_t) {
  if (!(tau_max > 0.0))
    throw std::invalid_argument("factorization_discrepancy: tau_max must be positive");
  if (n_samples < 8)
    throw std::invalid_argument("factorization_discrepancy: need at least 8 samples");
  detail::require_same_dim(rho, h, "factorization_discrepancy");
  const Mat rho_ts = q_t * rho * q_s;
  double worst = 0.0;
  for (int k = 0; k < n_samples; ++k) {
    const double tau = (k + 0.5) * tau_max / n_samples;
    const Mat u = expm(Mat(-kImag * tau * h));
    const Mat factorized = u * rho_ts * u.adjoint();
    const Mat exact = q_t * u * rho * u.adjoint() * q_s;
    worst = std::max(worst, max_abs_diff(exact, factorized));
  }
  return worst;
}

}  // namespace spinjump
