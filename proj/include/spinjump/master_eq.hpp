#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spinjump/basis.hpp"
#include "spinjump/linalg.hpp"
#include "spinjump/states.hpp"

namespace spinjump {

/// The four competing master equations for spin-selective recombination.
enum class TheorySelector { Haberkorn, JonesHore, KominisNonReacting, KominisRevised };

inline const char* to_string(TheorySelector t) {
  switch (t) {
    case TheorySelector::Haberkorn: return "haberkorn";
    case TheorySelector::JonesHore: return "jones_hore";
    case TheorySelector::KominisNonReacting: return "kominis_nonreacting";
    case TheorySelector::KominisRevised: return "kominis_revised";
  }
  return "?";
}

// Guard below which a subspace population (or the total trace) is treated
// as extinct in the nonlinear Kominis terms.
inline constexpr double kExtinctionGuard = 1e-14;

// Step-size stability bound for the fixed-step integrator:
// dt * (||H|| + k_S + k_T) must not exceed this.
inline constexpr double kStabilityBound = 1e-2;

namespace detail {
inline void require_same_dim(const Mat& a, const Mat& b, const char* where) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(where) + ": dimension mismatch");
}
}  // namespace detail

/// S-T dephasing generator shared by the Jones-Hore and Kominis equations:
/// rho Q_S + Q_S rho - 2 Q_S rho Q_S. Traceless; damps only the S-T
/// coherence blocks.
inline Mat dephasing_term(const Mat& rho, const Mat& q_s) {
  return rho * q_s + q_s * rho - 2.0 * (q_s * rho * q_s);
}

/// Haberkorn: d(rho)/dt = -i[H,rho] - k_S/2 {Q_S,rho} - k_T/2 {Q_T,rho}.
inline Mat rhs_haberkorn(const Mat& rho, const Mat& h, const RatePair& rates,
                         const Mat& q_s, const Mat& q_t) {
  detail::require_same_dim(rho, h, "rhs_haberkorn");
  detail::require_same_dim(rho, q_s, "rhs_haberkorn");
  detail::require_same_dim(rho, q_t, "rhs_haberkorn");
  return -kImag * (h * rho - rho * h) -
         (rates.k_s / 2.0) * (q_s * rho + rho * q_s) -
         (rates.k_t / 2.0) * (q_t * rho + rho * q_t);
}

/// Jones-Hore: Haberkorn plus S-T dephasing at rate (k_S+k_T)/2.
inline Mat rhs_jones_hore(const Mat& rho, const Mat& h, const RatePair& rates,
                          const Mat& q_s, const Mat& q_t) {
  return rhs_haberkorn(rho, h, rates, q_s, q_t) -
         ((rates.k_s + rates.k_t) / 2.0) * dephasing_term(rho, q_s);
}

/// Kominis non-reacting evolution: measurement-induced dephasing only.
/// Trace-preserving; populations are untouched.
inline Mat rhs_kominis_nonreacting(const Mat& rho, const Mat& h, const RatePair& rates,
                                   const Mat& q_s) {
  detail::require_same_dim(rho, h, "rhs_kominis_nonreacting");
  detail::require_same_dim(rho, q_s, "rhs_kominis_nonreacting");
  return -kImag * (h * rho - rho * h) -
         ((rates.k_s + rates.k_t) / 2.0) * dephasing_term(rho, q_s);
}

/// Scalar S-T coherence: Tr{rho_ST rho_TS} / (Tr{rho_SS} Tr{rho_TT}) with
/// rho_AB = Q_A rho Q_B. Returns 0 when either subspace population is below
/// the extinction guard (a state with no weight in one subspace carries no
/// S-T coherence).
inline double coherence_measure(const Mat& rho, const Mat& q_s, const Mat& q_t) {
  detail::require_same_dim(rho, q_s, "coherence_measure");
  detail::require_same_dim(rho, q_t, "coherence_measure");
  const double pop_s = (q_s * rho * q_s).trace().real();
  const double pop_t = (q_t * rho * q_t).trace().real();
  if (pop_s <= kExtinctionGuard || pop_t <= kExtinctionGuard) return 0.0;
  const Mat rho_st = q_s * rho * q_t;
  const Mat rho_ts = q_t * rho * q_s;
  return (rho_st * rho_ts).trace().real() / (pop_s * pop_t);
}

/// Revised Kominis equation: dephasing plus an interpolation, weighted by
/// the scalar coherence c, between state-selective population removal
/// (c = 0) and removal of the whole density matrix at the total reaction
/// rate (c = 1). c is clamped to [0,1]; `clamp_events`, when given, counts
/// evaluations where the raw measure exceeded 1.
inline Mat rhs_kominis_revised(const Mat& rho, const Mat& h, const RatePair& rates,
                               const Mat& q_s, const Mat& q_t,
                               long* clamp_events = nullptr) {
  Mat out = rhs_kominis_nonreacting(rho, h, rates, q_s);
  detail::require_same_dim(rho, q_t, "rhs_kominis_revised");
  const double tr = rho.trace().real();
  if (tr <= kExtinctionGuard) return out;  // reaction terms vanish with the state
  double c = coherence_measure(rho, q_s, q_t);
  if (c > 1.0) {
    if (clamp_events != nullptr) ++(*clamp_events);
    c = 1.0;
  }
  out -= (1.0 - c) * (rates.k_s * (q_s * rho * q_s) + rates.k_t * (q_t * rho * q_t));
  const double reacted_rate =
      rates.k_s * (q_s * rho).trace().real() + rates.k_t * (q_t * rho).trace().real();
  out -= (c * reacted_rate / tr) * rho;
  return out;
}

/// Uniform-grid record of a master-equation run. Fluxes are the
/// instantaneous reaction rates k_S Tr{Q_S rho} and k_T Tr{Q_T rho},
/// evaluated on the grid states.
struct EvolutionTrace {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  std::vector<double> singlet_flux;
  std::vector<double> triplet_flux;
  long clamp_events = 0;
};

namespace detail {

/// Classical fixed-step RK4 on a matrix ODE. The state is re-symmetrized
/// after every step; NaN/Inf aborts with the offending step index.
template <class Rhs>
EvolutionTrace rk4_evolve(Rhs&& rhs, const RatePair& rates, const BasisSpec& basis,
                          const DensityMatrix& rho0, double t_end, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrate: dt must be positive");
  if (!(t_end >= dt)) throw std::invalid_argument("integrate: t_end must be >= dt");
  const double steps_real = t_end / dt;
  const long n_steps = std::lround(steps_real);
  if (n_steps < 1 || std::abs(steps_real - static_cast<double>(n_steps)) > 1e-6)
    throw std::invalid_argument("integrate: t_end must be an integer multiple of dt");

  const Mat q_s = singlet_projector(basis);
  const Mat q_t = triplet_projector(basis);

  EvolutionTrace trace;
  trace.times.reserve(n_steps + 1);
  trace.states.reserve(n_steps + 1);
  trace.singlet_flux.reserve(n_steps + 1);
  trace.triplet_flux.reserve(n_steps + 1);

  auto record = [&](double t, const Mat& rho) {
    trace.times.push_back(t);
    trace.states.push_back(DensityMatrix::trusted(rho));
    trace.singlet_flux.push_back(rates.k_s * (q_s * rho).trace().real());
    trace.triplet_flux.push_back(rates.k_t * (q_t * rho).trace().real());
  };

  Mat rho = rho0.matrix();
  record(0.0, rho);
  for (long step = 1; step <= n_steps; ++step) {
    const Mat k1 = rhs(rho);
    const Mat k2 = rhs((rho + (dt / 2.0) * k1).eval());
    const Mat k3 = rhs((rho + (dt / 2.0) * k2).eval());
    const Mat k4 = rhs((rho + dt * k3).eval());
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!rho.allFinite())
      throw NumericalError("integrate: non-finite state at step " + std::to_string(step),
                           step);
    if (hermiticity_defect(rho) > kHermitianTol)
      throw NumericalError(
          "integrate: Hermiticity defect beyond 1e-12 at step " + std::to_string(step),
          step);
    rho = hermitize(rho);
    record(static_cast<double>(step) * dt, rho);
  }
  return trace;
}

}  // namespace detail

/// Integrate the selected master equation from rho0 over [0, t_end] on a
/// uniform grid of step dt. Requires dt (||H|| + k_S + k_T) <= 1e-2.
inline EvolutionTrace integrate(TheorySelector theory, const ModelSpec& model,
                                const DensityMatrix& rho0, double t_end, double dt) {
  model.rates.validate();
  const Mat h = model.hamiltonian();
  if (rho0.dim() != model.basis.dim)
    throw std::invalid_argument("integrate: state dimension does not match basis");
  const double scale = operator_norm(h) + model.rates.k_s + model.rates.k_t;
  if (dt * scale > kStabilityBound * (1.0 + 1e-12))
    throw std::invalid_argument(
        "integrate: dt (||H|| + k_S + k_T) = " + std::to_string(dt * scale) +
        " exceeds the stability bound " + std::to_string(kStabilityBound));

  const Mat q_s = singlet_projector(model.basis);
  const Mat q_t = triplet_projector(model.basis);
  const RatePair rates = model.rates;

  long clamp_events = 0;
  EvolutionTrace trace;
  switch (theory) {
    case TheorySelector::Haberkorn:
      trace = detail::rk4_evolve(
          [&](const Mat& r) { return rhs_haberkorn(r, h, rates, q_s, q_t); }, rates,
          model.basis, rho0, t_end, dt);
      break;
    case TheorySelector::JonesHore:
      trace = detail::rk4_evolve(
          [&](const Mat& r) { return rhs_jones_hore(r, h, rates, q_s, q_t); }, rates,
          model.basis, rho0, t_end, dt);
      break;
    case TheorySelector::KominisNonReacting:
      trace = detail::rk4_evolve(
          [&](const Mat& r) { return rhs_kominis_nonreacting(r, h, rates, q_s); },
          rates, model.basis, rho0, t_end, dt);
      break;
    case TheorySelector::KominisRevised:
      trace = detail::rk4_evolve(
          [&](const Mat& r) {
            return rhs_kominis_revised(r, h, rates, q_s, q_t, &clamp_events);
          },
          rates, model.basis, rho0, t_end, dt);
      break;
  }
  trace.clamp_events = clamp_events;
  return trace;
}

}  // namespace spinjump
