#pragma once

#include <atomic>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spinjump/master_eq.hpp"
#include "spinjump/rng.hpp"
#include "spinjump/states.hpp"

namespace spinjump {

/// Outcome of a single trajectory step. SingletProduct, TripletProduct and
/// KominisRemove are terminal; ProjectS/ProjectT collapse the state onto a
/// pure spin state and the trajectory continues.
enum class EventKind { NoJump, SingletProduct, TripletProduct, ProjectS, ProjectT, KominisRemove };

inline bool is_terminal(EventKind kind) {
  return kind == EventKind::SingletProduct || kind == EventKind::TripletProduct ||
         kind == EventKind::KominisRemove;
}

struct TrajectoryEvent {
  EventKind kind = EventKind::NoJump;
  double time = 0.0;
};

/// The three single-molecule unravelings.
enum class SchemeKind { Traditional, JonesHore, Kominis };

inline const char* to_string(SchemeKind s) {
  switch (s) {
    case SchemeKind::Traditional: return "traditional";
    case SchemeKind::JonesHore: return "jones_hore";
    case SchemeKind::Kominis: return "kominis";
  }
  return "?";
}

/// Jump-free propagator over one step: fourth-order truncated series of
/// exp(-i H_eff dt). Valid for dt ||H_eff|| <= 1e-2.
inline Mat no_jump_propagator(const Mat& heff, double dt) {
  return expm_order4(Mat(-kImag * dt * heff));
}

struct NoJumpResult {
  Vec psi;         ///< propagated state, not renormalized
  double delta_p;  ///< 1 - |psi'|^2, the norm decrease absorbed by jumps
};

/// Propagate one step under the non-Hermitian H_eff without a jump. The
/// returned norm decrease delta_p matches dt (k_S <Q_S> + k_T <Q_T>) to
/// O(dt^2) for the traditional H_eff.
inline NoJumpResult no_jump_propagate(const PureState& psi, const Mat& heff, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("no_jump_propagate: dt must be positive");
  if (psi.dim() != heff.rows())
    throw std::invalid_argument("no_jump_propagate: dimension mismatch");
  if (dt * operator_norm(heff) > kStabilityBound * (1.0 + 1e-12))
    throw std::invalid_argument("no_jump_propagate: dt ||H_eff|| exceeds 1e-2");
  NoJumpResult out{Vec(no_jump_propagator(heff, dt) * psi.amplitudes()), 0.0};
  out.delta_p = 1.0 - out.psi.squaredNorm();
  return out;
}

namespace detail {

struct StepContext {
  SchemeKind scheme = SchemeKind::Traditional;
  int dim = 2;
  double dt = 0.0;
  double k_s = 0.0;
  double k_t = 0.0;
  Mat propagator;  // no-jump propagator for one step
};

inline StepContext make_step_context(SchemeKind scheme, const ModelSpec& model, double dt) {
  model.rates.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("trajectory step: dt must be positive");
  if (scheme == SchemeKind::Kominis && model.rates.k_t != 0.0)
    throw std::invalid_argument(
        "Kominis scheme requires k_t = 0 (the scheme is defined only for a dark "
        "triplet channel)");
  const Mat h = model.hamiltonian();
  const double scale = operator_norm(h) + model.rates.k_s + model.rates.k_t;
  if (dt * scale > kStabilityBound * (1.0 + 1e-12))
    throw std::invalid_argument("trajectory step: dt (||H|| + k_S + k_T) exceeds 1e-2");

  StepContext ctx;
  ctx.scheme = scheme;
  ctx.dim = model.basis.dim;
  ctx.dt = dt;
  ctx.k_s = model.rates.k_s;
  ctx.k_t = model.rates.k_t;
  Mat heff;
  switch (scheme) {
    case SchemeKind::Traditional:
      heff = effective_hamiltonian_traditional(h, model.rates, model.basis);
      break;
    case SchemeKind::JonesHore:
      heff = effective_hamiltonian_jones_hore(h, model.rates, model.basis);
      break;
    case SchemeKind::Kominis:
      heff = h;  // the scheme carries no non-Hermitian norm decay
      break;
  }
  ctx.propagator = no_jump_propagator(heff, dt);
  return ctx;
}

inline void collapse_onto(Vec& psi, int index) {
  const Complex amp = psi(index);
  psi.setZero();
  psi(index) = amp / std::abs(amp);
}

/// Advance one step. `psi` must be normalized; `u` is a uniform [0,1) draw.
/// The branch thresholds follow the cumulative probability vector in the
/// scheme's listed order; any 1-ulp rounding leftover at the top of the
/// cumulative sum falls through to the no-jump branch.
inline EventKind core_step(const StepContext& ctx, Vec& psi, double u) {
  const double exp_qs = std::norm(psi(kIndexS));
  const double exp_qt = std::norm(psi(kIndexT));
  switch (ctx.scheme) {
    case SchemeKind::Traditional: {
      // no-jump (state-dependent weight), then singlet and triplet products
      const double p_s = ctx.k_s * exp_qs * ctx.dt;
      const double p_t = ctx.k_t * exp_qt * ctx.dt;
      double c = 1.0 - p_s - p_t;
      if (u >= c) {
        c += p_s;
        if (u < c) return EventKind::SingletProduct;
        c += p_t;
        if (u < c) return EventKind::TripletProduct;
      }
      psi = ctx.propagator * psi;
      psi /= psi.norm();
      return EventKind::NoJump;
    }
    case SchemeKind::JonesHore: {
      // no-jump (state-independent weight), singlet product, collapse to |T>,
      // triplet product, collapse to |S>
      double c = 1.0 - ctx.k_s * ctx.dt - ctx.k_t * ctx.dt;
      if (u >= c) {
        c += ctx.k_s * exp_qs * ctx.dt;
        if (u < c) return EventKind::SingletProduct;
        c += ctx.k_s * exp_qt * ctx.dt;
        if (u < c) {
          collapse_onto(psi, kIndexT);
          return EventKind::ProjectT;
        }
        c += ctx.k_t * exp_qt * ctx.dt;
        if (u < c) return EventKind::TripletProduct;
        c += ctx.k_t * exp_qs * ctx.dt;
        if (u < c) {
          collapse_onto(psi, kIndexS);
          return EventKind::ProjectS;
        }
      }
      psi = ctx.propagator * psi;
      psi /= psi.norm();
      return EventKind::NoJump;
    }
    case SchemeKind::Kominis: {
      // removal (counted as singlet product), then conditional measurement:
      // collapse to |S>, collapse to |T>, or nothing. No norm decay.
      const double p_r = ctx.k_s * exp_qs * ctx.dt;
      if (u < p_r) return EventKind::KominisRemove;
      const double p_nr = 1.0 - p_r;
      double c = p_r + p_nr * ctx.k_s * exp_qs * ctx.dt / 2.0;
      if (u < c) {
        collapse_onto(psi, kIndexS);
        return EventKind::ProjectS;
      }
      c += p_nr * ctx.k_s * exp_qt * ctx.dt / 2.0;
      if (u < c) {
        collapse_onto(psi, kIndexT);
        return EventKind::ProjectT;
      }
      psi = ctx.propagator * psi;
      psi /= psi.norm();
      return EventKind::NoJump;
    }
  }
  return EventKind::NoJump;
}

/// True when no future step can change the state or terminate the
/// trajectory: every terminal branch has exactly zero probability and every
/// reachable branch maps psi to itself. Such trajectories are advanced
/// analytically by the ensemble runner.
inline bool is_stationary(const StepContext& ctx, const Vec& psi) {
  const double exp_qs = std::norm(psi(kIndexS));
  const double exp_qt = std::norm(psi(kIndexT));
  constexpr double tol = 1e-15;

  const bool singlet_open = ctx.k_s * exp_qs * ctx.dt > 0.0;
  const bool triplet_open = ctx.k_t * exp_qt * ctx.dt > 0.0;
  if (ctx.scheme == SchemeKind::Kominis) {
    if (singlet_open) return false;
  } else {
    if (singlet_open || triplet_open) return false;
  }

  Vec prop = ctx.propagator * psi;
  prop /= prop.norm();
  if (max_abs((prop - psi).eval()) > tol) return false;

  auto projection_fixes = [&](int index) {
    Vec proj = psi;
    collapse_onto(proj, index);
    return max_abs((proj - psi).eval()) <= tol;
  };
  if (ctx.scheme == SchemeKind::JonesHore || ctx.scheme == SchemeKind::Kominis) {
    if (ctx.k_s * exp_qt > 0.0 && !projection_fixes(kIndexT)) return false;
    if (ctx.scheme == SchemeKind::JonesHore && ctx.k_t * exp_qs > 0.0 &&
        !projection_fixes(kIndexS)) return false;
    if (ctx.scheme == SchemeKind::Kominis && ctx.k_s * exp_qs > 0.0 &&
        !projection_fixes(kIndexS)) return false;
  }
  return true;
}

}  // namespace detail

/// One step of the traditional unraveling: react through the singlet or
/// triplet channel with the state-dependent first-order probabilities, or
/// propagate jump-free under the traditional H_eff and renormalize.
inline std::pair<PureState, TrajectoryEvent> step_traditional(const PureState& psi,
                                                              const ModelSpec& model,
                                                              double dt, double u,
                                                              double t_now = 0.0) {
  auto ctx = detail::make_step_context(SchemeKind::Traditional, model, dt);
  Vec v = psi.normalized().amplitudes();
  const EventKind kind = detail::core_step(ctx, v, u);
  return {PureState(std::move(v)), TrajectoryEvent{kind, t_now + dt}};
}

/// One step of the Jones-Hore unraveling: five branches — singlet product,
/// measurement collapse to |T>, triplet product, measurement collapse to
/// |S>, or jump-free propagation with the state-independent no-jump weight.
inline std::pair<PureState, TrajectoryEvent> step_jones_hore(const PureState& psi,
                                                             const ModelSpec& model,
                                                             double dt, double u,
                                                             double t_now = 0.0) {
  auto ctx = detail::make_step_context(SchemeKind::JonesHore, model, dt);
  Vec v = psi.normalized().amplitudes();
  const EventKind kind = detail::core_step(ctx, v, u);
  return {PureState(std::move(v)), TrajectoryEvent{kind, t_now + dt}};
}

/// One step of the Kominis single-molecule scheme (defined for k_T = 0):
/// removal with probability k_S <Q_S> dt, else measurement collapse at half
/// the singlet rate, else nothing. Deliberately carries no non-Hermitian
/// norm decay between events; pure |S> states go on to react with
/// certainty and pure |T> states never react.
inline std::pair<PureState, TrajectoryEvent> step_kominis(const PureState& psi,
                                                          const ModelSpec& model,
                                                          double dt, double u,
                                                          double t_now = 0.0) {
  auto ctx = detail::make_step_context(SchemeKind::Kominis, model, dt);
  Vec v = psi.normalized().amplitudes();
  const EventKind kind = detail::core_step(ctx, v, u);
  return {PureState(std::move(v)), TrajectoryEvent{kind, t_now + dt}};
}

/// Ensemble statistics on the record grid. `mean_rho` is the ensemble mean
/// of |psi><psi| over surviving trajectories (reacted trajectories
/// contribute zero once their population has left the radical-pair
/// subspace), so its trace is the surviving fraction. Per-point population
/// means carry empirical standard errors for trajectory/master-equation
/// comparisons.
struct EnsembleResult {
  long n_traj = 0;
  long singlet_count = 0;
  long triplet_count = 0;
  long survivor_count = 0;
  double singlet_yield = 0.0;
  double triplet_yield = 0.0;
  double survival_fraction = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> times;
  std::vector<Mat> mean_rho;
  std::vector<double> mean_ps, se_ps, mean_pt, se_pt;
};

namespace detail {

struct BlockAccum {
  long singlet = 0, triplet = 0, survived = 0;
  std::vector<Mat> rho_sum;
  std::vector<double> ps, ps2, pt, pt2;
  // Difference arrays holding contributions of trajectories frozen in a
  // stationary state; prefix-summed into the main sums on finalize.
  bool any_frozen = false;
  std::vector<Mat> frozen_rho;
  std::vector<double> fps, fps2, fpt, fpt2;
  int dim = 2;

  void init(std::size_t records, int d) {
    dim = d;
    rho_sum.assign(records, Mat::Zero(d, d));
    ps.assign(records, 0.0);
    ps2.assign(records, 0.0);
    pt.assign(records, 0.0);
    pt2.assign(records, 0.0);
  }

  void ensure_frozen(std::size_t records) {
    if (any_frozen) return;
    any_frozen = true;
    frozen_rho.assign(records, Mat::Zero(dim, dim));
    fps.assign(records, 0.0);
    fps2.assign(records, 0.0);
    fpt.assign(records, 0.0);
    fpt2.assign(records, 0.0);
  }

  void add_sample(std::size_t r, const Vec& psi) {
    rho_sum[r] += psi * psi.adjoint();
    const double s = std::norm(psi(kIndexS));
    const double t = std::norm(psi(kIndexT));
    ps[r] += s;
    ps2[r] += s * s;
    pt[r] += t;
    pt2[r] += t * t;
  }

  void add_frozen_from(std::size_t r0, const Vec& psi) {
    ensure_frozen(rho_sum.size());
    if (r0 >= rho_sum.size()) return;
    frozen_rho[r0] += psi * psi.adjoint();
    const double s = std::norm(psi(kIndexS));
    const double t = std::norm(psi(kIndexT));
    fps[r0] += s;
    fps2[r0] += s * s;
    fpt[r0] += t;
    fpt2[r0] += t * t;
  }

  void finalize() {
    if (!any_frozen) return;
    Mat crho = Mat::Zero(dim, dim);
    double cps = 0, cps2 = 0, cpt = 0, cpt2 = 0;
    for (std::size_t r = 0; r < rho_sum.size(); ++r) {
      crho += frozen_rho[r];
      cps += fps[r];
      cps2 += fps2[r];
      cpt += fpt[r];
      cpt2 += fpt2[r];
      rho_sum[r] += crho;
      ps[r] += cps;
      ps2[r] += cps2;
      pt[r] += cpt;
      pt2[r] += cpt2;
    }
    frozen_rho.clear();
    fps.clear();
    fps2.clear();
    fpt.clear();
    fpt2.clear();
    any_frozen = false;
  }
};

inline void run_one_trajectory(const StepContext& ctx, const Vec& psi0, long n_steps,
                               int stride, TrajectoryRng rng, BlockAccum& acc) {
  Vec psi = psi0;
  acc.add_sample(0, psi);
  if (is_stationary(ctx, psi)) {
    acc.add_frozen_from(1, psi);
    ++acc.survived;
    return;
  }
  for (long k = 1; k <= n_steps; ++k) {
    const EventKind kind = core_step(ctx, psi, rng.uniform01());
    if (is_terminal(kind)) {
      if (kind == EventKind::TripletProduct)
        ++acc.triplet;
      else
        ++acc.singlet;  // SingletProduct, or KominisRemove counted as singlet
      return;
    }
    if (k % stride == 0) acc.add_sample(static_cast<std::size_t>(k / stride), psi);
    if (kind != EventKind::NoJump && is_stationary(ctx, psi)) {
      acc.add_frozen_from(static_cast<std::size_t>(k / stride) + 1, psi);
      ++acc.survived;
      return;
    }
  }
  ++acc.survived;
}

}  // namespace detail

/// Run `n_traj` independent trajectories with per-trajectory random
/// substreams derived from (seed, index). Results are bit-identical for a
/// fixed seed regardless of `n_threads`: trajectories are summed within
/// fixed blocks in index order and blocks are combined in block order.
/// `record_stride` thins the record grid (n_steps must be divisible by it).
inline EnsembleResult run_ensemble(SchemeKind scheme, const ModelSpec& model,
                                   const PureState& psi0, long n_traj, double t_end,
                                   double dt, std::uint64_t seed, int record_stride = 1,
                                   int n_threads = 1) {
  if (n_traj < 1) throw std::invalid_argument("run_ensemble: n_traj must be >= 1");
  if (record_stride < 1) throw std::invalid_argument("run_ensemble: record_stride >= 1");
  if (n_threads < 1) throw std::invalid_argument("run_ensemble: n_threads >= 1");
  if (psi0.dim() != model.basis.dim)
    throw std::invalid_argument("run_ensemble: state dimension does not match basis");
  if (std::abs(psi0.norm() - 1.0) > 1e-9)
    throw std::invalid_argument("run_ensemble: initial state must be normalized");
  const double steps_real = t_end / dt;
  const long n_steps = std::lround(steps_real);
  if (n_steps < 1 || std::abs(steps_real - static_cast<double>(n_steps)) > 1e-6)
    throw std::invalid_argument("run_ensemble: t_end must be an integer multiple of dt");
  if (n_steps % record_stride != 0)
    throw std::invalid_argument("run_ensemble: step count must be divisible by record_stride");

  const detail::StepContext ctx = detail::make_step_context(scheme, model, dt);
  const Vec start = psi0.normalized().amplitudes();
  const std::size_t records = static_cast<std::size_t>(n_steps / record_stride) + 1;

  constexpr long kBlockSize = 1024;
  const long n_blocks = (n_traj + kBlockSize - 1) / kBlockSize;
  std::vector<detail::BlockAccum> blocks(static_cast<std::size_t>(n_blocks));

  std::atomic<long> next_block{0};
  auto worker = [&]() {
    for (;;) {
      const long b = next_block.fetch_add(1);
      if (b >= n_blocks) break;
      detail::BlockAccum& acc = blocks[static_cast<std::size_t>(b)];
      acc.init(records, ctx.dim);
      const long lo = b * kBlockSize;
      const long hi = std::min(n_traj, lo + kBlockSize);
      for (long i = lo; i < hi; ++i) {
        detail::run_one_trajectory(ctx, start, n_steps, record_stride,
                                   TrajectoryRng(seed, static_cast<std::uint64_t>(i)),
                                   acc);
      }
      acc.finalize();
    }
  };

  const int threads = static_cast<int>(std::min<long>(n_threads, n_blocks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  EnsembleResult out;
  out.n_traj = n_traj;
  out.seed = seed;
  out.times.resize(records);
  for (std::size_t r = 0; r < records; ++r)
    out.times[r] = static_cast<double>(r) * record_stride * dt;
  out.mean_rho.assign(records, Mat::Zero(ctx.dim, ctx.dim));
  std::vector<double> sum_ps(records, 0.0), sum_ps2(records, 0.0);
  std::vector<double> sum_pt(records, 0.0), sum_pt2(records, 0.0);
  for (const auto& acc : blocks) {
    out.singlet_count += acc.singlet;
    out.triplet_count += acc.triplet;
    out.survivor_count += acc.survived;
    for (std::size_t r = 0; r < records; ++r) {
      out.mean_rho[r] += acc.rho_sum[r];
      sum_ps[r] += acc.ps[r];
      sum_ps2[r] += acc.ps2[r];
      sum_pt[r] += acc.pt[r];
      sum_pt2[r] += acc.pt2[r];
    }
  }

  const double n = static_cast<double>(n_traj);
  out.singlet_yield = static_cast<double>(out.singlet_count) / n;
  out.triplet_yield = static_cast<double>(out.triplet_count) / n;
  out.survival_fraction = static_cast<double>(out.survivor_count) / n;
  out.mean_ps.resize(records);
  out.se_ps.resize(records);
  out.mean_pt.resize(records);
  out.se_pt.resize(records);
  for (std::size_t r = 0; r < records; ++r) {
    out.mean_rho[r] /= n;
    const double mps = sum_ps[r] / n;
    const double mpt = sum_pt[r] / n;
    out.mean_ps[r] = mps;
    out.mean_pt[r] = mpt;
    const double var_s = n > 1.0 ? std::max(0.0, (sum_ps2[r] - n * mps * mps) / (n - 1.0)) : 0.0;
    const double var_t = n > 1.0 ? std::max(0.0, (sum_pt2[r] - n * mpt * mpt) / (n - 1.0)) : 0.0;
    out.se_ps[r] = std::sqrt(var_s / n);
    out.se_pt[r] = std::sqrt(var_t / n);
  }
  return out;
}

/// Partial sum of the Kominis single-molecule yield series for the
/// maximally coherent initial state: per-round reaction weight
/// p_r + p_nr q_S carried by the no-event weight p_nr q_0. Converges to 3/4
/// as dt -> 0, n_terms -> infinity.
inline double kominis_yield_series(double k_s, double dt, long n_terms) {
  if (!(k_s > 0.0) || !(dt > 0.0) || k_s * dt > kStabilityBound * (1.0 + 1e-12))
    throw std::invalid_argument("kominis_yield_series: need 0 < k_s dt <= 1e-2");
  if (n_terms < 1) throw std::invalid_argument("kominis_yield_series: n_terms must be >= 1");
  const double p_r = k_s * dt / 2.0;        // react now, <Q_S> = 1/2
  const double p_nr = 1.0 - p_r;
  const double q_s = k_s * dt / 4.0;        // collapse to |S> given no reaction
  const double q_0 = 1.0 - k_s * dt / 2.0;  // no measurement collapse
  const double per_round = p_r + p_nr * q_s;
  const double carry = p_nr * q_0;
  double sum = 0.0;
  double weight = 1.0;
  for (long i = 0; i < n_terms; ++i) {
    sum += weight * per_round;
    weight *= carry;
  }
  return sum;
}

/// Full four-level Lindblad right-hand side: reaction jumps onto the shelf
/// states plus measurement dephasing, trace-preserving over all four
/// levels. Restricted to the {S,T} block (for states with no radical-pair
/// to shelf coherences) it reproduces the Jones-Hore equation.
inline Mat four_level_rhs(const Mat& rho4, const Mat& h_sys, const RatePair& rates) {
  if (rho4.rows() != 4 || rho4.cols() != 4)
    throw std::invalid_argument("four_level_rhs: state must be 4x4");
  detail::require_same_dim(rho4, h_sys, "four_level_rhs");
  Mat out = -kImag * (h_sys * rho4 - rho4 * h_sys);
  for (const Mat& l : jump_ops_jones_hore(rates)) {
    const Mat ldl = l.adjoint() * l;
    out += l * rho4 * l.adjoint() - 0.5 * (ldl * rho4 + rho4 * ldl);
  }
  return out;
}

/// Integrate the four-level Lindblad model on a uniform grid. Fluxes are
/// recorded with the embedded {S,T} projectors.
inline EvolutionTrace integrate_four_level(const Mat& h_sys, const RatePair& rates,
                                           const DensityMatrix& rho0, double t_end,
                                           double dt) {
  rates.validate();
  if (rho0.dim() != 4)
    throw std::invalid_argument("integrate_four_level: state must be 4x4");
  const double scale = operator_norm(h_sys) + rates.k_s + rates.k_t;
  if (dt * scale > kStabilityBound * (1.0 + 1e-12))
    throw std::invalid_argument(
        "integrate_four_level: dt (||H|| + k_S + k_T) exceeds the stability bound");
  return detail::rk4_evolve(
      [&](const Mat& r) { return four_level_rhs(r, h_sys, rates); }, rates,
      BasisSpec::four_level(), rho0, t_end, dt);
}

}  // namespace spinjump
