#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "engine.hpp"
#include "propagate.hpp"
#include "sequence.hpp"
#include "spin_system.hpp"

namespace zeno {

inline constexpr double gamma_1h = 2.6752218744e8;  // rad s^-1 T^-1
inline constexpr double gamma_ratio_1h_13c = 3.976;  // gamma(1H)/gamma(13C)
inline constexpr double default_j_hz = 195.0;

// ---------------------------------------------------------------------------
// Closed-form references
// ---------------------------------------------------------------------------

// Continuously driven two-level state after accumulated drive angle wt:
// cos(wt/2)|0> + i sin(wt/2)|1>.
inline std::array<cd, 2> rabi_state(double angle) {
  return {cd(std::cos(angle / 2), 0.0), cd(0.0, std::sin(angle / 2))};
}

struct Survival {
  double exact = 1.0;   // [cos^2(pi/2n)]^n
  double approx = 1.0;  // exp(-pi^2/4n), the large-n limit
};

// Probability of still being in |0> after an inverting drive is cut into n
// projectively measured fragments.
inline Survival survival_probability(int n) {
  if (n < 1) throw std::invalid_argument("survival probability needs n >= 1");
  const double c = std::cos(pi / (2.0 * n));
  double exact = 1.0;
  for (int k = 0; k < n; ++k) exact *= c * c;
  return {exact, std::exp(-pi * pi / (4.0 * n))};
}

// Normalized I_z after n rounds of (x-rotation by theta, full transverse
// crush): cos^n(theta).
inline double crush_decay_oracle(double theta, int n) {
  if (n < 0) throw std::invalid_argument("pulse count must be non-negative");
  return std::pow(std::cos(theta), n);
}

// Transverse damping factor induced on the control by one measurement block
// of strength index r acting on a maximally mixed target.
inline double measurement_strength_lambda(int r) {
  if (r < 1) throw std::invalid_argument("strength index must be >= 1");
  return std::cos(pi / (2.0 * r));
}

// z_n of a Bloch vector starting at +z under n rounds of an x-rotation by
// theta followed by transverse damping lambda.
inline std::vector<double> damped_train_curve(double lambda, double theta,
                                              const std::vector<int>& n_values) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("damping factor must lie in [0,1]");
  std::vector<double> out;
  out.reserve(n_values.size());
  int k = 0;
  double y = 0.0, z = 1.0;
  const double c = std::cos(theta), s = std::sin(theta);
  for (const int n : n_values) {
    if (n < k) throw std::invalid_argument("n values must be non-decreasing");
    for (; k < n; ++k) {
      const double y2 = lambda * (y * c - z * s);
      const double z2 = y * s + z * c;
      y = y2;
      z = z2;
    }
    out.push_back(z);
  }
  return out;
}

// Reduced two-level model of the repeated measured rotation: per step the
// control rotates by theta about x, then its coherence is damped by
// cos(pi/2r). Sign conventions match gate_step below.
inline double reduced_channel_oracle(int r, double theta, int n) {
  if (n < 0) throw std::invalid_argument("step count must be non-negative");
  return damped_train_curve(measurement_strength_lambda(r), theta, {n}).back();
}

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

inline SpinSystem one_spin_system() {
  SpinSystem sys;
  sys.spins = {{"H", gamma_1h, 0.0, {}, {}}};
  return sys;
}

// Control = low-gamma spin C, target = H; both offsets sit at +pi*J rad/s so
// a 1/J evolution is the identity up to a global phase.
inline SpinSystem two_spin_system(double j_hz = default_j_hz) {
  if (j_hz <= 0) throw std::invalid_argument("J must be positive");
  SpinSystem sys;
  sys.spins = {{"C", gamma_1h / gamma_ratio_1h_13c, pi * j_hz, {}, {}},
               {"H", gamma_1h, pi * j_hz, {}, {}}};
  sys.j_hz = j_hz;
  return sys;
}

// ---------------------------------------------------------------------------
// One-spin pulse-train experiment
// ---------------------------------------------------------------------------

enum class GradientMode { off, ideal_crush, ensemble };

struct OneSpinConfig {
  double theta = deg2rad(1.0);  // rad, per-pulse flip
  double tau = 1e-3;            // s, inter-pulse delay
  int n_start = 0;
  int n_stop = 400;
  int n_step = 10;
  GradientMode gradients = GradientMode::ideal_crush;
  double crusher_spread = 64 * pi;  // rad of dephasing across the sample per delay
  SampleGeometry geometry{};        // ensemble mode only
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const {
    if (!(tau > 0)) throw std::invalid_argument("tau must be positive");
    if (n_start < 0 || n_stop < n_start || n_step < 1)
      throw std::invalid_argument("bad n range");
    if (gradients == GradientMode::ensemble && crusher_spread <= 0)
      throw std::invalid_argument("crusher spread must be positive");
    geometry.validate();
  }
};

struct ZenoCurve {
  std::vector<int> n;
  std::vector<double> signal;  // <I_z> normalized to the initial polarization
};

namespace detail {
inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

// Crusher areas are whole turns (2*pi of dephasing across the sample), so the
// midpoint position grid averages every leaked coherence to zero exactly.
// This is the strength giving one turn per inter-pulse delay.
inline double one_spin_crusher_unit(const OneSpinConfig& c) {
  return 2.0 * pi / (gamma_1h * c.geometry.length * c.tau);
}

// Turns for window w = 1..n: ceil(spread/2pi) + w. Every window clears the
// configured spread, and no two windows repeat an area: a train of identical
// crushers does not measure -- stimulated-echo pathways refocus across
// windows and near-resonant isochromats spin-lock instead of dephasing.
inline long one_spin_crusher_turns(const OneSpinConfig& c, int w) {
  return static_cast<long>(std::ceil(c.crusher_spread / (2.0 * pi))) + w;
}

// n fractional pulses with inter-pulse delays (optionally carrying crushers),
// a final crush-all standing in for the pre-readout crusher, then I_z readout.
inline std::string one_spin_sequence_text(const OneSpinConfig& c, int n) {
  std::string out;
  out += "# pulse train: " + std::to_string(n) + " fractional pulses\n";
  const std::string pulse =
      "pulse H flip=" + detail::fmt_num(c.theta) + "rad phase=x\n";
  if (c.gradients == GradientMode::ensemble) {
    const double unit = one_spin_crusher_unit(c);
    for (int w = 1; w <= n; ++w) {
      out += pulse;
      out += "delay " + detail::fmt_num(c.tau) + "s gradient=" +
             detail::fmt_num(one_spin_crusher_turns(c, w) * unit) + "\n";
    }
  } else {
    out += "loop " + std::to_string(n) + " {\n";
    out += "  " + pulse;
    out += "  delay " + detail::fmt_num(c.tau) + "s\n";
    if (c.gradients == GradientMode::ideal_crush) out += "  crush all\n";
    out += "}\n";
  }
  out += "crush all\n";
  out += "acquire H op=z\n";
  return out;
}

inline ZenoCurve run_one_spin(const OneSpinConfig& c) {
  c.validate();
  const SpinSystem sys = one_spin_system();
  const DensityMatrix init = initial_state(sys, InitialState::pure_ground);
  ZenoCurve curve;
  for (int n = c.n_start; n <= c.n_stop; n += c.n_step) {
    const auto seq = seq::parse(one_spin_sequence_text(c, n), "<one-spin>");
    const auto tl = seq::compile(seq, sys, "<one-spin>");
    RunResult res;
    if (c.gradients == GradientMode::ensemble) {
      RunConfig rc;
      rc.geometry = c.geometry;
      rc.seed = c.seed;
      rc.workers = c.workers;
      res = run_timeline(sys, tl, init, rc);
    } else {
      res = run_single(sys, tl, init);
    }
    curve.n.push_back(n);
    curve.signal.push_back(res.value / 0.5);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Two-spin variable-strength measurement experiment
// ---------------------------------------------------------------------------

enum class TwoSpinModel { gate_ideal, hamiltonian_ideal, hamiltonian_ensemble };

struct TwoSpinConfig {
  double theta = deg2rad(5.0);
  std::vector<int> r_values{1, 16, 64};
  double j_hz = default_j_hz;
  int n_start = 0;
  int n_stop = 60;
  int n_step = 2;
  TwoSpinModel model = TwoSpinModel::gate_ideal;
  double grad_duration = 5e-4;      // s, each crusher lobe
  double crusher_spread = 64 * pi;  // rad across the sample for the target spin
  SampleGeometry geometry{};        // ensemble model only
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const {
    if (j_hz <= 0) throw std::invalid_argument("J must be positive");
    if (r_values.empty()) throw std::invalid_argument("need at least one r");
    for (const int r : r_values)
      if (r < 1) throw std::invalid_argument("strength index must be >= 1");
    if (n_start < 0 || n_stop < n_start || n_step < 1)
      throw std::invalid_argument("bad n range");
    if (!(grad_duration > 0) || grad_duration > 0.5 / j_hz)
      throw std::invalid_argument("crusher lobe must fit in half a 1/J window");
    geometry.validate();
  }

  std::vector<int> n_values() const {
    std::vector<int> out;
    for (int n = n_start; n <= n_stop; n += n_step) out.push_back(n);
    return out;
  }
};

struct TwoSpinResult {
  std::vector<int> r_values;
  std::vector<ZenoCurve> curves;  // parallel to r_values
};

// Measurement gate of strength index r: identity on the control-|0> block,
// Rx(pi/r) on the control-|1> block. r=1 is a CNOT up to the local phase of
// Rx(pi) = -i sigma_x; entry magnitudes match CNOT exactly.
inline Mat controlled_rx(int r) {
  if (r < 1) throw std::invalid_argument("strength index must be >= 1");
  Mat b = Mat::Identity(4, 4);
  b.block(2, 2, 2, 2) = pulse_unitary_2x2(pi / r, 0.0);
  return b;
}

// One bracketed iteration of the circuit model: theta-rotation (x) on the
// control, the controlled rotation, then an ideal crush of the target.
inline void gate_step(const SpinSystem& sys, DensityMatrix& dm, const Mat& block,
                      double theta) {
  apply_pulse(sys, dm, PulseSpec{0, theta, 0.0});
  apply_unitary(dm, block);
  crush(sys, dm, 1);
}

inline void gate_step(const SpinSystem& sys, DensityMatrix& dm, int r,
                      double theta) {
  gate_step(sys, dm, controlled_rx(r), theta);
}

inline ZenoCurve run_gate_model(const TwoSpinConfig& c, int r) {
  const SpinSystem sys = two_spin_system(c.j_hz);
  DensityMatrix dm =
      initial_state(sys, InitialState::control_polarized_target_mixed);
  const Mat block = controlled_rx(r);
  const Mat iz = build_operator(sys, ProductOperator::single(sys, 0, Axis::z));
  ZenoCurve curve;
  int k = 0;
  for (const int n : c.n_values()) {
    for (; k < n; ++k) gate_step(sys, dm, block, c.theta);
    curve.n.push_back(n);
    curve.signal.push_back(expectation(dm, iz) / 0.5);
  }
  return curve;
}

// Lobe strength for one whole turn of net target dephasing from a bipolar
// pair straddling a 180 on the target: the target keeps 2*gamma_t*G*delta*z
// of phase while the control refocuses.
inline double two_spin_crusher_unit(const TwoSpinConfig& c) {
  return pi / (gamma_1h * c.grad_duration * c.geometry.length);
}

// Whole-turn pair areas incremented per window, as in the one-spin train.
inline long two_spin_crusher_turns(const TwoSpinConfig& c, int w) {
  return static_cast<long>(std::ceil(c.crusher_spread / (2.0 * pi))) + w;
}

// One iteration (loop body):
//   theta pulse on the control,
//   tilted 1/(2rJ) evolution bracketed by +-90(y) on the target,
//   a z-correction of -pi/2r on the control,
//   a 1/J window with a mid-point 180 on the target carrying the bipolar
//   crusher pair, closed by a second 180 and a -pi z-correction that undo
//   everything the window did to the deterministic evolution.
// z-rotations are composed from x/y pulses: Rz(b) = [-90(x), b(y), +90(x)].
inline std::string two_spin_sequence_text(const TwoSpinConfig& c, int r, int n) {
  const double t_r = 1.0 / (2.0 * r * c.j_hz);
  const double t_g = 1.0 / c.j_hz;
  const double shoulder = t_g / 2 - c.grad_duration;
  const bool ensemble = c.model == TwoSpinModel::hamiltonian_ensemble;
  const std::string delta = detail::fmt_num(c.grad_duration);

  auto rz_c = [](double beta) {
    std::string s;
    s += "  pulse C flip=-90deg phase=x\n";
    s += "  pulse C flip=" + detail::fmt_num(beta) + "rad phase=y\n";
    s += "  pulse C flip=90deg phase=x\n";
    return s;
  };

  auto body = [&](double g) {
    std::string s;
    s += "  pulse C flip=" + detail::fmt_num(c.theta) + "rad phase=x\n";
    s += "  pulse H flip=90deg phase=y\n";
    s += "  delay " + detail::fmt_num(t_r) + "s\n";
    s += "  pulse H flip=-90deg phase=y\n";
    s += rz_c(-pi / (2.0 * r));
    s += "  delay " + detail::fmt_num(shoulder) + "s\n";
    s += "  delay " + delta + "s" +
         (ensemble ? " gradient=" + detail::fmt_num(g) : "") + "\n";
    s += "  pulse H flip=180deg phase=x\n";
    s += "  delay " + delta + "s" +
         (ensemble ? " gradient=" + detail::fmt_num(-g) : "") + "\n";
    s += "  delay " + detail::fmt_num(shoulder) + "s\n";
    s += "  pulse H flip=180deg phase=x\n";
    s += rz_c(-pi);
    if (c.model == TwoSpinModel::hamiltonian_ideal) s += "  crush H\n";
    return s;
  };

  std::string out;
  out += "# variable-strength measurement train: r=" + std::to_string(r) +
         ", n=" + std::to_string(n) + "\n";
  if (ensemble) {
    const double unit = two_spin_crusher_unit(c);
    for (int w = 1; w <= n; ++w)
      out += body(two_spin_crusher_turns(c, w) * unit);
  } else {
    out += "loop " + std::to_string(n) + " {\n";
    out += body(0.0);
    out += "}\n";
  }
  out += "acquire C op=z\n";
  return out;
}

inline ZenoCurve run_hamiltonian_model(const TwoSpinConfig& c, int r) {
  const SpinSystem sys = two_spin_system(c.j_hz);
  const DensityMatrix init =
      initial_state(sys, InitialState::control_polarized_target_mixed);
  ZenoCurve curve;
  for (const int n : c.n_values()) {
    const auto seq = seq::parse(two_spin_sequence_text(c, r, n), "<two-spin>");
    const auto tl = seq::compile(seq, sys, "<two-spin>");
    RunResult res;
    if (c.model == TwoSpinModel::hamiltonian_ensemble) {
      RunConfig rc;
      rc.geometry = c.geometry;
      rc.seed = c.seed;
      rc.workers = c.workers;
      res = run_timeline(sys, tl, init, rc);
    } else {
      res = run_single(sys, tl, init);
    }
    curve.n.push_back(n);
    curve.signal.push_back(res.value / 0.5);
  }
  return curve;
}

inline TwoSpinResult run_two_spin(const TwoSpinConfig& c) {
  c.validate();
  TwoSpinResult out;
  out.r_values = c.r_values;
  for (const int r : c.r_values)
    out.curves.push_back(c.model == TwoSpinModel::gate_ideal
                             ? run_gate_model(c, r)
                             : run_hamiltonian_model(c, r));
  return out;
}

}  // namespace zeno
