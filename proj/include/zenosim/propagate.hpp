#pragma once

#include <cmath>
#include <stdexcept>

#include "spin_system.hpp"

namespace zeno {

struct PulseSpec {
  int spin = 0;
  double flip = 0.0;   // rad
  double phase = 0.0;  // rad, in the transverse plane (0 = x, pi/2 = y)
  double b1_scale = 1.0;
};

// U = exp(-i * flip * (cos(phase) I_x + sin(phase) I_y)).
// Sign convention: a flip=pi/2, phase=x pulse on |0> yields <I_y> = -1/2.
inline Mat pulse_unitary_2x2(double flip, double phase) {
  const double c = std::cos(flip / 2.0);
  const double s = std::sin(flip / 2.0);
  Mat u(2, 2);
  u(0, 0) = cd(c, 0);
  u(0, 1) = cd(0, -s) * std::polar(1.0, -phase);
  u(1, 0) = cd(0, -s) * std::polar(1.0, phase);
  u(1, 1) = cd(c, 0);
  return u;
}

inline Mat pulse_unitary(const SpinSystem& sys, const PulseSpec& p) {
  if (p.spin < 0 || p.spin >= sys.n_spins())
    throw std::invalid_argument("pulse addresses a spin outside the system");
  if (!std::isfinite(p.flip) || !std::isfinite(p.phase))
    throw std::invalid_argument("pulse flip and phase must be finite");
  const Mat u = pulse_unitary_2x2(p.flip * p.b1_scale, p.phase);
  if (sys.n_spins() == 1) return u;
  return p.spin == 0 ? kron(u, identity(2)) : kron(identity(2), u);
}

inline void apply_unitary(DensityMatrix& dm, const Mat& u) {
  dm.m = u * dm.m * u.adjoint();
}

inline void apply_pulse(const SpinSystem& sys, DensityMatrix& dm, const PulseSpec& p) {
  apply_unitary(dm, pulse_unitary(sys, p));
}

// Exact free evolution under the diagonal Hamiltonian: rho_ab picks up
// exp(-i (E_a - E_b) t). extra0/extra1 add per-spin offsets (rad/s), used for
// gradient fields.
inline void free_evolve(const SpinSystem& sys, DensityMatrix& dm, double duration,
                        double extra0 = 0.0, double extra1 = 0.0) {
  if (duration < 0 || !std::isfinite(duration))
    throw std::invalid_argument("evolution duration must be non-negative");
  const auto e = hamiltonian_energies(sys, extra0, extra1);
  const int d = dm.dim();
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      if (r == c) continue;
      dm.m(r, c) *= std::polar(1.0, -(e[r] - e[c]) * duration);
    }
}

namespace detail {
inline int spin_bit(const SpinSystem& sys, int spin) {
  return sys.n_spins() - 1 - spin;
}
}  // namespace detail

// Scales every element that is off-diagonal in the computational basis of
// `spin` by lambda. lambda=0 is the ideal crusher limit.
inline void phase_damp(const SpinSystem& sys, DensityMatrix& dm, int spin,
                       double lambda) {
  if (spin < 0 || spin >= sys.n_spins())
    throw std::invalid_argument("phase damping addresses a spin outside the system");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("phase damping factor must lie in [0,1]");
  const int bit = detail::spin_bit(sys, spin);
  const int d = dm.dim();
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      if (((r >> bit) & 1) != ((c >> bit) & 1)) dm.m(r, c) *= lambda;
}

// Projective-measurement emulation: zeroes coherences of `spin`, or all
// off-diagonal elements when spin is -1. Idempotent.
inline void crush(const SpinSystem& sys, DensityMatrix& dm, int spin = -1) {
  if (spin >= 0) {
    phase_damp(sys, dm, spin, 0.0);
    return;
  }
  const int d = dm.dim();
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c)
      if (r != c) dm.m(r, c) = cd(0);
}

// Phenomenological relaxation. T2: per-spin coherence sectors decay as
// exp(-t/T2). T1: the I_z deviation of each spin decays toward the maximally
// mixed value (high-temperature equilibrium) as exp(-t/T1). Spins without
// T1/T2 are untouched.
inline void relax(const SpinSystem& sys, DensityMatrix& dm, double duration) {
  if (duration < 0 || !std::isfinite(duration))
    throw std::invalid_argument("relaxation duration must be non-negative");
  const int d = dm.dim();
  for (int i = 0; i < sys.n_spins(); ++i) {
    const auto& sp = sys.spins[i];
    if (sp.t2) {
      const double f = std::exp(-duration / *sp.t2);
      const int bit = detail::spin_bit(sys, i);
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          if (((r >> bit) & 1) != ((c >> bit) & 1)) dm.m(r, c) *= f;
    }
    if (sp.t1) {
      const Mat iz = build_operator(sys, ProductOperator::single(sys, i, Axis::z));
      const double z = expectation(dm, iz);
      const double dz = z * (std::exp(-duration / *sp.t1) - 1.0);
      dm.m += (4.0 * dz / d) * iz;  // Tr(I_z^2) = d/4
    }
  }
}

struct ChannelSpec {
  enum class Kind { crush, phase_damp, relax };
  Kind kind = Kind::crush;
  int spin = -1;          // crush/phase_damp target; -1 = all (crush only)
  double lambda = 0.0;    // phase_damp
  double duration = 0.0;  // relax
};

inline void apply_channel(const SpinSystem& sys, DensityMatrix& dm,
                          const ChannelSpec& ch) {
  switch (ch.kind) {
    case ChannelSpec::Kind::crush:
      crush(sys, dm, ch.spin);
      break;
    case ChannelSpec::Kind::phase_damp:
      phase_damp(sys, dm, ch.spin, ch.lambda);
      break;
    case ChannelSpec::Kind::relax:
      relax(sys, dm, ch.duration);
      break;
  }
}

}  // namespace zeno
