#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace zeno {

using cd = std::complex<double>;

// All states and operators in this library are 2x2 or 4x4; the bounded dynamic
// size keeps storage on the stack while allowing one type for both system sizes.
using Mat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

inline constexpr double pi = 3.14159265358979323846;

inline double deg2rad(double deg) { return deg * pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / pi; }

enum class Axis { x, y, z };

// 1/2-Pauli convention: I_z = diag(1/2,-1/2), |0> is the +1/2 eigenstate.
inline Mat half_pauli(Axis a) {
  Mat m(2, 2);
  switch (a) {
    case Axis::x:
      m << cd(0), cd(0.5), cd(0.5), cd(0);
      break;
    case Axis::y:
      m << cd(0), cd(0, -0.5), cd(0, 0.5), cd(0);
      break;
    case Axis::z:
      m << cd(0.5), cd(0), cd(0), cd(-0.5);
      break;
  }
  return m;
}

inline Mat identity(int dim) { return Mat::Identity(dim, dim); }

inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

struct SpinSpecies {
  std::string label;
  double gamma = 0.0;   // gyromagnetic ratio, rad s^-1 T^-1
  double offset = 0.0;  // rotating-frame offset, rad/s
  std::optional<double> t1;  // s
  std::optional<double> t2;  // s
};

struct SpinSystem {
  std::vector<SpinSpecies> spins;
  std::optional<double> j_hz;  // scalar coupling, Hz; required iff two spins

  int n_spins() const { return static_cast<int>(spins.size()); }
  int dim() const { return 1 << n_spins(); }

  int index_of(const std::string& label) const {
    for (int i = 0; i < n_spins(); ++i)
      if (spins[i].label == label) return i;
    return -1;
  }

  void validate() const {
    if (spins.empty() || spins.size() > 2)
      throw std::invalid_argument("spin system must have one or two spins");
    if (spins.size() == 2 && spins[0].label == spins[1].label)
      throw std::invalid_argument("spin labels must be distinct");
    if (spins.size() == 2 && !j_hz)
      throw std::invalid_argument("two-spin system requires a J coupling");
    if (spins.size() == 1 && j_hz)
      throw std::invalid_argument("one-spin system cannot carry a J coupling");
    for (const auto& s : spins) {
      if (s.label.empty()) throw std::invalid_argument("spin label must be non-empty");
      if (s.t1 && *s.t1 <= 0) throw std::invalid_argument("t1 must be positive");
      if (s.t2 && *s.t2 <= 0) throw std::invalid_argument("t2 must be positive");
    }
  }
};

// Product operator: scalar prefactor times a tensor product with one optional
// half-Pauli factor per spin (empty = identity factor). Spin 0 is the first
// (most significant) Kronecker factor.
struct ProductOperator {
  double prefactor = 1.0;
  std::vector<std::optional<Axis>> axes;

  static ProductOperator single(const SpinSystem& sys, int spin, Axis a) {
    ProductOperator op;
    op.axes.assign(sys.n_spins(), std::nullopt);
    op.axes.at(spin) = a;
    return op;
  }
};

inline Mat build_operator(const SpinSystem& sys, const ProductOperator& op) {
  if (static_cast<int>(op.axes.size()) != sys.n_spins())
    throw std::invalid_argument("product operator arity does not match system");
  Mat out = op.axes[0] ? half_pauli(*op.axes[0]) : identity(2);
  for (int i = 1; i < sys.n_spins(); ++i)
    out = kron(out, op.axes[i] ? half_pauli(*op.axes[i]) : identity(2));
  return op.prefactor * out;
}

// H = sum_i offset_i I_z(i) + 2*pi*J I_z(0) I_z(1); diagonal by construction
// (weak coupling), so propagators reduce to per-level phases.
inline Mat build_hamiltonian(const SpinSystem& sys) {
  Mat h = sys.spins[0].offset *
          build_operator(sys, ProductOperator::single(sys, 0, Axis::z));
  if (sys.n_spins() == 2) {
    h += sys.spins[1].offset *
         build_operator(sys, ProductOperator::single(sys, 1, Axis::z));
    ProductOperator zz;
    zz.axes = {Axis::z, Axis::z};
    h += 2.0 * pi * *sys.j_hz * build_operator(sys, zz);
  }
  return h;
}

// Diagonal of H with optional per-spin offset shifts (rad/s), e.g. a gradient
// field seen by one isochromat. Index bit layout: state of spin i sits in bit
// (n_spins-1-i), matching the Kronecker order above.
inline std::array<double, 4> hamiltonian_energies(const SpinSystem& sys,
                                                  double extra0 = 0.0,
                                                  double extra1 = 0.0) {
  std::array<double, 4> e{};
  const int n = sys.n_spins();
  const double w0 = sys.spins[0].offset + extra0;
  if (n == 1) {
    e[0] = 0.5 * w0;
    e[1] = -0.5 * w0;
    return e;
  }
  const double w1 = sys.spins[1].offset + extra1;
  const double jr = 2.0 * pi * *sys.j_hz;
  for (int k = 0; k < 4; ++k) {
    const double m0 = (k & 2) ? -0.5 : 0.5;
    const double m1 = (k & 1) ? -0.5 : 0.5;
    e[k] = w0 * m0 + w1 * m1 + jr * m0 * m1;
  }
  return e;
}

struct DensityMatrix {
  Mat m;

  int dim() const { return static_cast<int>(m.rows()); }
  int n_spins() const { return dim() == 2 ? 1 : 2; }
};

// Hermiticity within 1e-12, unit trace within 1e-12, eigenvalues >= -1e-10.
inline void validate_state(const DensityMatrix& dm) {
  const Mat& m = dm.m;
  if (m.rows() != m.cols() || (m.rows() != 2 && m.rows() != 4))
    throw std::invalid_argument("density matrix must be 2x2 or 4x4");
  if ((m - m.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("density matrix is not Hermitian");
  if (std::abs(m.trace() - cd(1.0)) > 1e-12)
    throw std::invalid_argument("density matrix trace is not 1");
  Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw std::invalid_argument("density matrix has a negative eigenvalue");
}

inline DensityMatrix make_state(const Mat& m) {
  DensityMatrix dm{m};
  validate_state(dm);
  return dm;
}

enum class InitialState { pure_ground, iz_polarized, control_polarized_target_mixed };

// epsilon scales the I_z deviation of the iz-polarized state; the default 1
// gives the pure ground state for one spin. Signals are normalized downstream,
// so the physical polarization scale cancels.
inline DensityMatrix initial_state(const SpinSystem& sys, InitialState kind,
                                   double epsilon = 1.0, int control_spin = 0) {
  const int d = sys.dim();
  Mat m = Mat::Zero(d, d);
  switch (kind) {
    case InitialState::pure_ground:
      m(0, 0) = 1.0;
      break;
    case InitialState::iz_polarized: {
      m = identity(d) / static_cast<double>(d);
      for (int i = 0; i < sys.n_spins(); ++i)
        m += epsilon * build_operator(sys, ProductOperator::single(sys, i, Axis::z));
      break;
    }
    case InitialState::control_polarized_target_mixed: {
      if (sys.n_spins() != 2)
        throw std::invalid_argument("control-polarized state requires two spins");
      Mat ground(2, 2), mixed(2, 2);
      ground << cd(1), cd(0), cd(0), cd(0);
      mixed << cd(0.5), cd(0), cd(0), cd(0.5);
      m = control_spin == 0 ? kron(ground, mixed) : kron(mixed, ground);
      break;
    }
  }
  return make_state(m);
}

inline double expectation(const DensityMatrix& dm, const Mat& op,
                          double imag_tol = 1e-10) {
  const cd v = (dm.m * op).trace();
  if (std::abs(v.imag()) > imag_tol)
    throw std::runtime_error("expectation value has a non-real part: state is broken");
  return v.real();
}

inline double expectation(const SpinSystem& sys, const DensityMatrix& dm,
                          const ProductOperator& op) {
  return expectation(dm, build_operator(sys, op));
}

inline DensityMatrix partial_trace(const DensityMatrix& dm, int keep_spin) {
  if (dm.dim() != 4) throw std::invalid_argument("partial trace requires two spins");
  Mat out = Mat::Zero(2, 2);
  // Bit 1 holds spin 0, bit 0 holds spin 1.
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int t = 0; t < 2; ++t) {
        const int row = keep_spin == 0 ? (a << 1) | t : (t << 1) | a;
        const int col = keep_spin == 0 ? (b << 1) | t : (t << 1) | b;
        out(a, b) += dm.m(row, col);
      }
  return DensityMatrix{out};
}

}  // namespace zeno
