#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "propagate.hpp"
#include "rng.hpp"
#include "spin_system.hpp"
#include "util.hpp"

namespace zeno {

struct SampleGeometry {
  double length = 0.01;    // m, sample spans [-length/2, +length/2]
  double diffusion = 0.0;  // m^2/s
  int n_isochromats = 1;
  double b1_spread = 0.0;      // relative Gaussian sigma of B1; 0 = off
  int gradient_substeps = 32;  // time resolution of diffusion inside gradients

  void validate() const {
    if (length <= 0) throw std::invalid_argument("sample length must be positive");
    if (diffusion < 0) throw std::invalid_argument("diffusion must be non-negative");
    if (n_isochromats < 1)
      throw std::invalid_argument("need at least one isochromat");
    if (b1_spread < 0) throw std::invalid_argument("b1 spread must be non-negative");
    if (gradient_substeps < 1)
      throw std::invalid_argument("gradient substeps must be positive");
  }
};

struct Isochromat {
  double position = 0.0;  // m
  double b1_scale = 1.0;
  double weight = 1.0;
  RngStream rng;  // private stream keyed by (seed, index)
  DensityMatrix state;
};

struct Ensemble {
  std::vector<Isochromat> members;
  std::uint64_t seed = 0;
};

// Members sit at uniform grid cell midpoints; with n=4 and length 1 the
// positions are {-0.375, -0.125, 0.125, 0.375}. The deterministic grid keeps
// the no-diffusion crusher exactly analyzable as a geometric series. B1
// scales, when spread is on, come from a separate stream domain so they do
// not perturb the diffusion draws.
inline std::vector<Isochromat> init_members(const SampleGeometry& geom,
                                            std::uint64_t seed) {
  geom.validate();
  const int n = geom.n_isochromats;
  std::vector<Isochromat> members(n);
  for (int i = 0; i < n; ++i) {
    auto& m = members[i];
    m.position = geom.length * ((i + 0.5) / n - 0.5);
    m.weight = 1.0 / n;
    m.rng = member_stream(seed, i, 0);
    if (geom.b1_spread > 0) {
      RngStream b1 = member_stream(seed, i, 1);
      m.b1_scale = 1.0 + geom.b1_spread * gaussian(b1);
    }
  }
  return members;
}

inline Ensemble init_ensemble(const SampleGeometry& geom, const SpinSystem& sys,
                              InitialState kind, std::uint64_t seed) {
  sys.validate();
  Ensemble ens;
  ens.seed = seed;
  ens.members = init_members(geom, seed);
  const DensityMatrix init = initial_state(sys, kind);
  for (auto& m : ens.members) m.state = init;
  return ens;
}

inline double reflect_into(double pos, double half_length) {
  while (pos < -half_length || pos > half_length) {
    if (pos > half_length) pos = 2 * half_length - pos;
    if (pos < -half_length) pos = -2 * half_length - pos;
  }
  return pos;
}

// Random-walk step: position += Gaussian(0, sqrt(2 D t)), reflected at the
// sample boundaries.
inline void diffuse_member(Isochromat& m, const SampleGeometry& geom, double t) {
  if (geom.diffusion == 0.0 || t == 0.0) return;
  m.position += gaussian(m.rng) * std::sqrt(2.0 * geom.diffusion * t);
  m.position = reflect_into(m.position, geom.length / 2);
}

inline void diffuse(Ensemble& ens, const SampleGeometry& geom, double t) {
  if (t < 0) throw std::invalid_argument("diffusion interval must be non-negative");
  for (auto& m : ens.members) diffuse_member(m, geom, t);
}

// One crusher lobe: constant gradient over a fixed interval, optionally with
// a 180(x) on one spin at the midpoint (the echo arrangement).
struct GradientEvent {
  double strength = 0.0;  // T/m, signed
  double duration = 0.0;  // s
  std::optional<int> concurrent_180_target;
};

// Pure gradient dephasing: spin i of each member accumulates a z-rotation of
// gamma_i * strength * position * duration. Positions are held fixed;
// chemical shift and J evolution are composed separately by the caller (they
// commute with the gradient term).
inline void apply_gradient(const SpinSystem& sys, Ensemble& ens,
                           const GradientEvent& ev) {
  if (!(ev.duration > 0))
    throw std::invalid_argument("gradient event duration must be positive");
  const double half = ev.concurrent_180_target ? ev.duration / 2 : ev.duration;
  for (auto& m : ens.members) {
    auto dephase = [&](double t) {
      const double w0 = sys.spins[0].gamma * ev.strength * m.position;
      const double w1 =
          sys.n_spins() == 2 ? sys.spins[1].gamma * ev.strength * m.position : 0.0;
      const int d = m.state.dim();
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
          if (r == c) continue;
          auto level = [&](int k) {
            if (d == 2) return 0.5 * w0 * (k == 0 ? 1 : -1);
            return 0.5 * w0 * ((k & 2) ? -1 : 1) + 0.5 * w1 * ((k & 1) ? -1 : 1);
          };
          m.state.m(r, c) *= std::polar(1.0, -(level(r) - level(c)) * t);
        }
    };
    dephase(half);
    if (ev.concurrent_180_target) {
      apply_pulse(sys, m.state, PulseSpec{*ev.concurrent_180_target, pi, 0.0});
      dephase(half);
    }
  }
}

// Weighted ensemble mean of an observable, reduced with pairwise summation so
// the value is independent of evaluation order and worker count.
inline double average(const Ensemble& ens, const Mat& op) {
  if (ens.members.empty()) throw std::invalid_argument("ensemble is empty");
  std::vector<double> vals(ens.members.size());
  for (size_t i = 0; i < ens.members.size(); ++i)
    vals[i] = ens.members[i].weight * expectation(ens.members[i].state, op);
  return pairwise_sum(vals);
}

inline double average(const SpinSystem& sys, const Ensemble& ens,
                      const ProductOperator& op) {
  return average(ens, build_operator(sys, op));
}

// Stejskal-Tanner attenuation for an echo of two lobes of duration delta with
// onsets `spacing` apart: exp(-g^2 G^2 d^2 D (S - d/3)). Analytic cross-check
// for the Monte Carlo model; not used by the simulator itself.
inline double echo_attenuation(double gamma, double strength, double delta,
                               double diffusion, double spacing) {
  return std::exp(-gamma * gamma * strength * strength * delta * delta *
                  diffusion * (spacing - delta / 3.0));
}

}  // namespace zeno
