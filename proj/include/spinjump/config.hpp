#pragma once

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "spinjump/basis.hpp"
#include "spinjump/jump_engine.hpp"
#include "spinjump/master_eq.hpp"

namespace spinjump {

enum class RunMode { MasterEquation, Trajectories };

/// Initial radical-pair state selector.
struct InitialState {
  enum class Kind { S, T, Coherent, Amplitudes };
  Kind kind = Kind::S;
  Complex amp_s{1.0, 0.0};
  Complex amp_t{0.0, 0.0};

  bool operator==(const InitialState&) const = default;

  PureState realize(const BasisSpec& basis) const {
    switch (kind) {
      case Kind::S: return PureState::basis_state(basis, kIndexS);
      case Kind::T: return PureState::basis_state(basis, kIndexT);
      case Kind::Coherent: return PureState::coherent_st(basis);
      case Kind::Amplitudes: {
        Vec v = Vec::Zero(basis.dim);
        v(kIndexS) = amp_s;
        v(kIndexT) = amp_t;
        return PureState(std::move(v));
      }
    }
    throw std::logic_error("InitialState: unreachable");
  }
};

/// One simulation scenario: either a master-equation run (theory set) or a
/// trajectory ensemble (scheme set).
struct ScenarioConfig {
  RunMode mode = RunMode::MasterEquation;
  TheorySelector theory = TheorySelector::Haberkorn;
  SchemeKind scheme = SchemeKind::Traditional;
  BasisKind basis = BasisKind::TwoLevelST;
  double j = 0.0;
  double delta = 0.0;
  double k_s = 0.0;
  double k_t = 0.0;
  InitialState initial;
  double t_end = 10.0;
  double dt = 1e-3;
  long n_traj = 1000;
  std::uint64_t seed = 1;
  int record_stride = 1;
  int threads = 1;
  std::string output_prefix = "scenario";

  bool operator==(const ScenarioConfig&) const = default;

  ModelSpec model() const {
    return ModelSpec{BasisSpec::from_kind(basis), HamiltonianParams{j, delta},
                     RatePair{k_s, k_t}};
  }
};

struct ParseResult {
  std::optional<ScenarioConfig> config;
  std::vector<std::string> errors;
  bool ok() const { return config.has_value(); }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

inline bool parse_long(std::string_view s, long& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

inline bool parse_u64(std::string_view s, std::uint64_t& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace detail

/// Parse a flat key = value scenario document ('#' starts a comment).
/// Collects every validation error instead of stopping at the first;
/// `config` is set only when the document is fully valid.
inline ParseResult parse_config(std::string_view text) {
  ParseResult result;
  std::vector<std::string>& errors = result.errors;
  ScenarioConfig cfg;
  bool has_theory = false;
  bool has_scheme = false;
  std::map<std::string, int> seen;  // key -> first line

  std::istringstream stream{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back("line " + std::to_string(line_no) + ": expected key = value");
      continue;
    }
    const std::string key{detail::trim(line.substr(0, eq))};
    const std::string value{detail::trim(line.substr(eq + 1))};
    if (key.empty() || value.empty()) {
      errors.push_back("line " + std::to_string(line_no) + ": empty key or value");
      continue;
    }
    if (auto [it, inserted] = seen.emplace(key, line_no); !inserted) {
      errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key +
                       "' (first set on line " + std::to_string(it->second) + ")");
      continue;
    }

    auto bad_value = [&](const std::string& expected) {
      errors.push_back("line " + std::to_string(line_no) + ": key '" + key + "' expects " +
                       expected + ", got '" + value + "'");
    };

    if (key == "theory") {
      has_theory = true;
      cfg.mode = RunMode::MasterEquation;
      if (value == "haberkorn") cfg.theory = TheorySelector::Haberkorn;
      else if (value == "jones_hore") cfg.theory = TheorySelector::JonesHore;
      else if (value == "kominis_nonreacting") cfg.theory = TheorySelector::KominisNonReacting;
      else if (value == "kominis_revised") cfg.theory = TheorySelector::KominisRevised;
      else bad_value("haberkorn | jones_hore | kominis_nonreacting | kominis_revised");
    } else if (key == "scheme") {
      has_scheme = true;
      cfg.mode = RunMode::Trajectories;
      if (value == "traditional") cfg.scheme = SchemeKind::Traditional;
      else if (value == "jones_hore") cfg.scheme = SchemeKind::JonesHore;
      else if (value == "kominis") cfg.scheme = SchemeKind::Kominis;
      else bad_value("traditional | jones_hore | kominis");
    } else if (key == "basis") {
      if (value == "two_level") cfg.basis = BasisKind::TwoLevelST;
      else if (value == "four_level") cfg.basis = BasisKind::FourLevelSTProducts;
      else bad_value("two_level | four_level");
    } else if (key == "J") {
      if (!detail::parse_double(value, cfg.j)) bad_value("a real number");
    } else if (key == "delta") {
      if (!detail::parse_double(value, cfg.delta)) bad_value("a real number");
    } else if (key == "k_s") {
      if (!detail::parse_double(value, cfg.k_s)) bad_value("a real number");
    } else if (key == "k_t") {
      if (!detail::parse_double(value, cfg.k_t)) bad_value("a real number");
    } else if (key == "initial") {
      if (value == "S") cfg.initial = InitialState{InitialState::Kind::S, {1, 0}, {0, 0}};
      else if (value == "T") cfg.initial = InitialState{InitialState::Kind::T, {0, 0}, {1, 0}};
      else if (value == "coherent")
        cfg.initial = InitialState{InitialState::Kind::Coherent,
                                   {1.0 / std::sqrt(2.0), 0},
                                   {1.0 / std::sqrt(2.0), 0}};
      else if (value.rfind("amps:", 0) == 0) {
        std::array<double, 4> parts{};
        std::string rest = value.substr(5);
        std::size_t idx = 0;
        bool good = true;
        for (int i = 0; i < 4; ++i) {
          const auto comma = rest.find(',', idx);
          const bool last = (i == 3);
          const std::string piece{detail::trim(
              last ? std::string_view(rest).substr(idx)
                   : std::string_view(rest).substr(idx, comma - idx))};
          if ((!last && comma == std::string::npos) || !detail::parse_double(piece, parts[static_cast<std::size_t>(i)])) {
            good = false;
            break;
          }
          idx = comma + 1;
        }
        if (!good) {
          bad_value("S | T | coherent | amps:re_s,im_s,re_t,im_t");
        } else {
          cfg.initial = InitialState{InitialState::Kind::Amplitudes,
                                     {parts[0], parts[1]},
                                     {parts[2], parts[3]}};
        }
      } else {
        bad_value("S | T | coherent | amps:re_s,im_s,re_t,im_t");
      }
    } else if (key == "t_end") {
      if (!detail::parse_double(value, cfg.t_end)) bad_value("a real number");
    } else if (key == "dt") {
      if (!detail::parse_double(value, cfg.dt)) bad_value("a real number");
    } else if (key == "n_traj") {
      if (!detail::parse_long(value, cfg.n_traj)) bad_value("an integer");
    } else if (key == "seed") {
      if (!detail::parse_u64(value, cfg.seed)) bad_value("a nonnegative integer");
    } else if (key == "record_stride") {
      long v = 0;
      if (!detail::parse_long(value, v) || v < 1 || v > 1000000)
        bad_value("an integer in [1, 1000000]");
      else cfg.record_stride = static_cast<int>(v);
    } else if (key == "threads") {
      long v = 0;
      if (!detail::parse_long(value, v) || v < 1 || v > 4096)
        bad_value("an integer in [1, 4096]");
      else cfg.threads = static_cast<int>(v);
    } else if (key == "output_prefix") {
      cfg.output_prefix = value;
    } else {
      errors.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }

  // Cross-field validation mirrors the preconditions of the numerical layer,
  // so every reported error names the field and the violated constraint.
  if (!has_theory && !has_scheme)
    errors.push_back("missing required key: one of 'theory' or 'scheme'");
  if (has_theory && has_scheme)
    errors.push_back("keys 'theory' and 'scheme' are mutually exclusive");
  if (!(cfg.k_s >= 0.0) || !std::isfinite(cfg.k_s))
    errors.push_back("k_s must be finite and >= 0");
  if (!(cfg.k_t >= 0.0) || !std::isfinite(cfg.k_t))
    errors.push_back("k_t must be finite and >= 0");
  if (!std::isfinite(cfg.j)) errors.push_back("J must be finite");
  if (!std::isfinite(cfg.delta)) errors.push_back("delta must be finite");
  if (!(cfg.dt > 0.0)) errors.push_back("dt must be > 0");
  if (!(cfg.t_end >= cfg.dt)) errors.push_back("t_end must be >= dt");
  if (cfg.n_traj < 1) errors.push_back("n_traj must be >= 1");
  if (cfg.record_stride < 1) errors.push_back("record_stride must be >= 1");
  if (cfg.threads < 1) errors.push_back("threads must be >= 1");
  if (cfg.output_prefix.find('/') != std::string::npos)
    errors.push_back("output_prefix must not contain '/'");
  if (has_scheme && cfg.scheme == SchemeKind::Kominis && cfg.k_t != 0.0)
    errors.push_back("Kominis scheme requires k_t = 0");
  if (cfg.initial.kind == InitialState::Kind::Amplitudes) {
    const double n = std::sqrt(std::norm(cfg.initial.amp_s) + std::norm(cfg.initial.amp_t));
    if (std::abs(n - 1.0) > 1e-9)
      errors.push_back("initial amplitudes must be normalized within 1e-9 (norm = " +
                       std::to_string(n) + ")");
  }
  if (cfg.dt > 0.0 && std::isfinite(cfg.j) && std::isfinite(cfg.delta)) {
    const double scale =
        operator_norm(build_hamiltonian({cfg.j, cfg.delta}, BasisSpec::from_kind(cfg.basis))) +
        std::max(cfg.k_s, 0.0) + std::max(cfg.k_t, 0.0);
    if (cfg.dt * scale > kStabilityBound * (1.0 + 1e-12))
      errors.push_back("dt (||H|| + k_s + k_t) = " + std::to_string(cfg.dt * scale) +
                       " exceeds the stability bound " + std::to_string(kStabilityBound));
  }
  if (cfg.dt > 0.0 && cfg.t_end >= cfg.dt) {
    const double steps_real = cfg.t_end / cfg.dt;
    const double rounded = std::round(steps_real);
    if (std::abs(steps_real - rounded) > 1e-6)
      errors.push_back("t_end must be an integer multiple of dt");
    else if (static_cast<long>(rounded) % cfg.record_stride != 0)
      errors.push_back("step count t_end/dt must be divisible by record_stride");
  }

  if (errors.empty()) result.config = cfg;
  return result;
}

namespace detail {
inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Emit a document that parses back to an equal config.
inline std::string serialize_config(const ScenarioConfig& cfg) {
  std::string out;
  if (cfg.mode == RunMode::MasterEquation)
    out += std::string("theory = ") + to_string(cfg.theory) + "\n";
  else
    out += std::string("scheme = ") + to_string(cfg.scheme) + "\n";
  out += std::string("basis = ") +
         (cfg.basis == BasisKind::TwoLevelST ? "two_level" : "four_level") + "\n";
  out += "J = " + detail::fmt_double(cfg.j) + "\n";
  out += "delta = " + detail::fmt_double(cfg.delta) + "\n";
  out += "k_s = " + detail::fmt_double(cfg.k_s) + "\n";
  out += "k_t = " + detail::fmt_double(cfg.k_t) + "\n";
  switch (cfg.initial.kind) {
    case InitialState::Kind::S: out += "initial = S\n"; break;
    case InitialState::Kind::T: out += "initial = T\n"; break;
    case InitialState::Kind::Coherent: out += "initial = coherent\n"; break;
    case InitialState::Kind::Amplitudes:
      out += "initial = amps:" + detail::fmt_double(cfg.initial.amp_s.real()) + "," +
             detail::fmt_double(cfg.initial.amp_s.imag()) + "," +
             detail::fmt_double(cfg.initial.amp_t.real()) + "," +
             detail::fmt_double(cfg.initial.amp_t.imag()) + "\n";
      break;
  }
  out += "t_end = " + detail::fmt_double(cfg.t_end) + "\n";
  out += "dt = " + detail::fmt_double(cfg.dt) + "\n";
  out += "n_traj = " + std::to_string(cfg.n_traj) + "\n";
  out += "seed = " + std::to_string(cfg.seed) + "\n";
  out += "record_stride = " + std::to_string(cfg.record_stride) + "\n";
  out += "threads = " + std::to_string(cfg.threads) + "\n";
  out += "output_prefix = " + cfg.output_prefix + "\n";
  return out;
}

}  // namespace spinjump
