#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ensemble.hpp"
#include "propagate.hpp"
#include "sequence.hpp"
#include "spin_system.hpp"
#include "util.hpp"

namespace zeno {

struct RunConfig {
  SampleGeometry geometry{};
  std::uint64_t seed = 0;
  int workers = 0;  // 0 = ZENOSIM_WORKERS or hardware default
};

struct RunResult {
  double value = 0.0;  // ensemble average of the acquired observable
  int n_members = 1;
};

namespace detail {

// rho_ab *= p_a conj(p_b) with p_k = exp(-i E_k t): elementwise free evolution
// under a diagonal Hamiltonian, one phase per level.
inline void apply_level_phases(DensityMatrix& dm, const std::array<cd, 4>& p) {
  const int d = dm.dim();
  if (d == 2) {
    const cd f = p[0] * std::conj(p[1]);
    dm.m(0, 1) *= f;
    dm.m(1, 0) *= std::conj(f);
    return;
  }
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      if (r == c) continue;
      dm.m(r, c) *= p[r] * std::conj(p[c]);
    }
}

inline std::array<cd, 4> level_phases(const std::array<double, 4>& e, int dim,
                                      double t) {
  std::array<cd, 4> p{};
  for (int k = 0; k < dim; ++k) p[k] = std::polar(1.0, -e[k] * t);
  return p;
}

// Hamiltonian energies seen by one isochromat during a gradient: chemical
// shifts and J plus gamma_i * G * z on each spin.
inline std::array<double, 4> member_energies(const SpinSystem& sys, double gradient,
                                             double position) {
  const double g0 = sys.spins[0].gamma * gradient * position;
  const double g1 =
      sys.n_spins() == 2 ? sys.spins[1].gamma * gradient * position : 0.0;
  return hamiltonian_energies(sys, g0, g1);
}

inline void apply_unitary_fast(DensityMatrix& dm, const Mat& u, Mat& tmp) {
  if (dm.dim() == 2) {
    const cd a = u(0, 0), b = u(0, 1), c = u(1, 0), d = u(1, 1);
    const cd r00 = dm.m(0, 0), r01 = dm.m(0, 1);
    const cd r10 = dm.m(1, 0), r11 = dm.m(1, 1);
    const cd t00 = a * r00 + b * r10, t01 = a * r01 + b * r11;
    const cd t10 = c * r00 + d * r10, t11 = c * r01 + d * r11;
    dm.m(0, 0) = t00 * std::conj(a) + t01 * std::conj(b);
    dm.m(0, 1) = t00 * std::conj(c) + t01 * std::conj(d);
    dm.m(1, 0) = t10 * std::conj(a) + t11 * std::conj(b);
    dm.m(1, 1) = t10 * std::conj(c) + t11 * std::conj(d);
    return;
  }
  tmp.noalias() = u * dm.m;
  dm.m.noalias() = tmp * u.adjoint();
}

// Flat event stream with all per-event data interned into small side tables,
// so the per-member walk stays cache-resident.
struct CompiledEvent {
  seq::Event::Kind kind = seq::Event::Kind::delay;
  int spin = -1;  // crush target (-1 = all)
  int sig = -1;   // pulse/delay signature index
  bool has_gradient = false;
  double duration = 0.0;
  double gradient = 0.0;
};

struct PulseKey {
  int spin;
  double flip;
  double phase;
  bool operator==(const PulseKey&) const = default;
};

struct GradKey {
  double duration;
  double gradient;
  bool operator==(const GradKey&) const = default;
};

struct PlainKey {
  double duration;
  bool operator==(const PlainKey&) const = default;
};

template <class Key>
inline int intern(std::vector<Key>& keys, const Key& k) {
  for (size_t i = 0; i < keys.size(); ++i)
    if (keys[i] == k) return static_cast<int>(i);
  keys.push_back(k);
  return static_cast<int>(keys.size()) - 1;
}

}  // namespace detail

// Runs a compiled timeline over an isochromat ensemble and returns the
// ensemble-averaged acquired observable. Deterministic in (seed, geometry):
// every member draws from its own stream and contributions are reduced
// pairwise over a fixed member order, so the worker count never changes the
// result bit for bit.
inline RunResult run_timeline(const SpinSystem& sys, const seq::EventTimeline& tl,
                              const DensityMatrix& init, const RunConfig& cfg) {
  sys.validate();
  cfg.geometry.validate();
  validate_state(init);
  if (init.dim() != sys.dim())
    throw std::invalid_argument("initial state dimension does not match system");
  if (tl.events.empty() || tl.events.back().kind != seq::Event::Kind::acquire)
    throw std::invalid_argument("timeline must end with an acquire");

  const int dim = sys.dim();
  bool has_relax = false;
  for (const auto& sp : sys.spins)
    if (sp.t1 || sp.t2) has_relax = true;

  std::vector<detail::CompiledEvent> evs;
  evs.reserve(tl.events.size());
  std::vector<detail::PulseKey> pulse_keys;
  std::vector<detail::GradKey> grad_keys;
  std::vector<detail::PlainKey> plain_keys;
  Mat acquire_op;
  for (const auto& e : tl.events) {
    detail::CompiledEvent ce;
    ce.kind = e.kind;
    ce.spin = e.spin;
    switch (e.kind) {
      case seq::Event::Kind::pulse:
        ce.sig = detail::intern(pulse_keys, {e.spin, e.flip, e.phase});
        break;
      case seq::Event::Kind::delay:
        ce.duration = e.duration;
        if (e.gradient && *e.gradient != 0.0) {
          ce.has_gradient = true;
          ce.gradient = *e.gradient;
          ce.sig = detail::intern(grad_keys, {e.duration, *e.gradient});
        } else {
          ce.sig = detail::intern(plain_keys, {e.duration});
        }
        break;
      case seq::Event::Kind::crush:
        break;
      case seq::Event::Kind::acquire:
        acquire_op = build_operator(sys, ProductOperator::single(sys, e.spin, e.op));
        break;
    }
    evs.push_back(ce);
  }

  std::vector<Mat> pulse_u(pulse_keys.size());
  for (size_t s = 0; s < pulse_keys.size(); ++s)
    pulse_u[s] = pulse_unitary(sys, PulseSpec{pulse_keys[s].spin, pulse_keys[s].flip,
                                              pulse_keys[s].phase, 1.0});
  const auto base_energies = hamiltonian_energies(sys);
  std::vector<std::array<cd, 4>> plain_phases(plain_keys.size());
  for (size_t s = 0; s < plain_keys.size(); ++s)
    plain_phases[s] =
        detail::level_phases(base_energies, dim, plain_keys[s].duration);

  const std::vector<Isochromat> members = init_members(cfg.geometry, cfg.seed);
  const size_t n = members.size();
  std::vector<double> slot(n, 0.0);
  // With diffusion off, positions are frozen, so per-member gradient phases
  // are computed once per distinct (duration, gradient) pair. With diffusion
  // on, gradients are resolved in substeps: phase at the current position for
  // dt, then a diffusion step.
  const bool substep = cfg.geometry.diffusion > 0.0;
  const int n_sub = cfg.geometry.gradient_substeps;

  parallel_for(n, cfg.workers, [&](size_t lo, size_t hi) {
    std::vector<std::array<cd, 4>> gcache(grad_keys.size());
    std::vector<Mat> ucache(pulse_keys.size());
    Mat tmp(dim, dim);
    for (size_t i = lo; i < hi; ++i) {
      Isochromat m = members[i];
      DensityMatrix dm = init;
      if (!substep)
        for (size_t s = 0; s < grad_keys.size(); ++s)
          gcache[s] = detail::level_phases(
              detail::member_energies(sys, grad_keys[s].gradient, m.position), dim,
              grad_keys[s].duration);
      const bool scaled = m.b1_scale != 1.0;
      if (scaled)
        for (size_t s = 0; s < pulse_keys.size(); ++s)
          ucache[s] = pulse_unitary(
              sys, PulseSpec{pulse_keys[s].spin, pulse_keys[s].flip,
                             pulse_keys[s].phase, m.b1_scale});
      for (const auto& ce : evs) {
        switch (ce.kind) {
          case seq::Event::Kind::pulse:
            detail::apply_unitary_fast(dm, scaled ? ucache[ce.sig] : pulse_u[ce.sig],
                                       tmp);
            break;
          case seq::Event::Kind::delay: {
            if (ce.duration > 0.0) {
              if (!ce.has_gradient) {
                detail::apply_level_phases(dm, plain_phases[ce.sig]);
                // No position-dependent phase accumulates inside a plain
                // delay, so one draw of the net displacement is exact.
                diffuse_member(m, cfg.geometry, ce.duration);
              } else if (!substep) {
                detail::apply_level_phases(dm, gcache[ce.sig]);
              } else {
                const double dt = ce.duration / n_sub;
                for (int k = 0; k < n_sub; ++k) {
                  detail::apply_level_phases(
                      dm, detail::level_phases(
                              detail::member_energies(sys, ce.gradient, m.position),
                              dim, dt));
                  diffuse_member(m, cfg.geometry, dt);
                }
              }
              // Relaxation factors scale populations and coherence sectors
              // elementwise, so they commute with the diagonal evolution and
              // a single application per delay is exact.
              if (has_relax) relax(sys, dm, ce.duration);
            }
            break;
          }
          case seq::Event::Kind::crush:
            crush(sys, dm, ce.spin);
            break;
          case seq::Event::Kind::acquire:
            slot[i] = m.weight * expectation(dm, acquire_op);
            break;
        }
      }
    }
  });
  return RunResult{pairwise_sum(slot), static_cast<int>(n)};
}

// Single idealized spin packet at the sample center (gradients have no effect
// there); the common path for gradient-free simulations.
inline RunResult run_single(const SpinSystem& sys, const seq::EventTimeline& tl,
                            const DensityMatrix& init) {
  RunConfig cfg;
  cfg.geometry.n_isochromats = 1;
  cfg.workers = 1;
  return run_timeline(sys, tl, init, cfg);
}

}  // namespace zeno
