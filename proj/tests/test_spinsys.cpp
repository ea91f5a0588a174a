#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "zenosim/experiments.hpp"
#include "zenosim/spin_system.hpp"

using namespace zeno;

namespace {
double max_abs_diff(const Mat& a, const Mat& b) {
  return (a - b).cwiseAbs().maxCoeff();
}
}  // namespace

TEST_CASE("half-Pauli operators satisfy the angular momentum algebra") {
  const Mat ix = half_pauli(Axis::x);
  const Mat iy = half_pauli(Axis::y);
  const Mat iz = half_pauli(Axis::z);
  CHECK(max_abs_diff(Mat(ix * iy - iy * ix), Mat(cd(0, 1) * iz)) < 1e-15);
  CHECK(max_abs_diff(Mat(ix * ix), Mat(0.25 * identity(2))) < 1e-15);
  CHECK(iz(0, 0) == cd(0.5));
  CHECK(iz(1, 1) == cd(-0.5));
}

TEST_CASE("spin system validation") {
  SpinSystem one = one_spin_system();
  CHECK_NOTHROW(one.validate());

  SpinSystem two = two_spin_system();
  CHECK_NOTHROW(two.validate());
  CHECK(two.index_of("C") == 0);
  CHECK(two.index_of("H") == 1);
  CHECK(two.index_of("X") == -1);

  SECTION("duplicate labels rejected") {
    two.spins[1].label = "C";
    CHECK_THROWS_AS(two.validate(), std::invalid_argument);
  }
  SECTION("two spins need a J coupling") {
    two.j_hz.reset();
    CHECK_THROWS_AS(two.validate(), std::invalid_argument);
  }
  SECTION("one spin cannot carry J") {
    one.j_hz = 10.0;
    CHECK_THROWS_AS(one.validate(), std::invalid_argument);
  }
  SECTION("empty and oversized systems rejected") {
    SpinSystem none;
    CHECK_THROWS_AS(none.validate(), std::invalid_argument);
    SpinSystem three = two;
    three.spins.push_back({"N", 1.0, 0.0});
    CHECK_THROWS_AS(three.validate(), std::invalid_argument);
  }
}

TEST_CASE("build_operator embeds single-spin operators in Kronecker order") {
  const SpinSystem sys = two_spin_system();

  const Mat iz0 = build_operator(sys, ProductOperator::single(sys, 0, Axis::z));
  const Mat iz1 = build_operator(sys, ProductOperator::single(sys, 1, Axis::z));
  CHECK(iz0(0, 0) == cd(0.5));
  CHECK(iz0(1, 1) == cd(0.5));
  CHECK(iz0(2, 2) == cd(-0.5));
  CHECK(iz0(3, 3) == cd(-0.5));
  CHECK(iz1(0, 0) == cd(0.5));
  CHECK(iz1(1, 1) == cd(-0.5));
  CHECK(iz1(2, 2) == cd(0.5));
  CHECK(iz1(3, 3) == cd(-0.5));

  ProductOperator zz;
  zz.prefactor = 2.0;
  zz.axes = {Axis::z, Axis::z};
  const Mat two_izz = build_operator(sys, zz);
  CHECK(max_abs_diff(two_izz, Mat(2.0 * iz0 * iz1)) < 1e-15);

  ProductOperator wrong;
  wrong.axes = {Axis::z};
  CHECK_THROWS_AS(build_operator(sys, wrong), std::invalid_argument);
}

TEST_CASE("Hamiltonian diagonal matches the dense construction") {
  SpinSystem sys = two_spin_system(195.0);
  sys.spins[0].offset = 100.0;
  sys.spins[1].offset = -250.0;

  const Mat h = build_hamiltonian(sys);
  const auto e = hamiltonian_energies(sys);
  for (int k = 0; k < 4; ++k) CHECK(std::abs(h(k, k) - cd(e[k])) < 1e-12);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (r != c) CHECK(std::abs(h(r, c)) == 0.0);

  SECTION("per-spin extra offsets shift like real offsets") {
    SpinSystem shifted = sys;
    shifted.spins[0].offset += 321.0;
    shifted.spins[1].offset -= 55.5;
    const auto via_extra = hamiltonian_energies(sys, 321.0, -55.5);
    const auto direct = hamiltonian_energies(shifted);
    for (int k = 0; k < 4; ++k)
      CHECK(std::abs(via_extra[k] - direct[k]) < 1e-12);
  }
}

TEST_CASE("initial states") {
  const SpinSystem one = one_spin_system();
  const SpinSystem two = two_spin_system();

  SECTION("pure ground state") {
    const auto dm = initial_state(two, InitialState::pure_ground);
    CHECK(dm.m(0, 0) == cd(1.0));
    CHECK(std::abs(dm.m.trace() - cd(1.0)) < 1e-15);
  }
  SECTION("one-spin iz-polarized with epsilon 1 is the ground state") {
    const auto dm = initial_state(one, InitialState::iz_polarized, 1.0);
    CHECK(std::abs(dm.m(0, 0) - cd(1.0)) < 1e-15);
    CHECK(std::abs(dm.m(1, 1)) < 1e-15);
  }
  SECTION("two-spin iz-polarized is PSD only up to epsilon 1/4") {
    CHECK_NOTHROW(initial_state(two, InitialState::iz_polarized, 0.25));
    CHECK_THROWS_AS(initial_state(two, InitialState::iz_polarized, 0.3),
                    std::invalid_argument);
  }
  SECTION("control polarized, target maximally mixed") {
    const auto dm = initial_state(two, InitialState::control_polarized_target_mixed);
    CHECK(std::abs(dm.m(0, 0) - cd(0.5)) < 1e-15);
    CHECK(std::abs(dm.m(1, 1) - cd(0.5)) < 1e-15);
    CHECK(std::abs(dm.m(2, 2)) < 1e-15);
    CHECK(std::abs(dm.m(3, 3)) < 1e-15);
    CHECK_THROWS_AS(initial_state(one, InitialState::control_polarized_target_mixed),
                    std::invalid_argument);
  }
}

TEST_CASE("state validation rejects broken density matrices") {
  Mat bad_trace(2, 2);
  bad_trace << cd(0.6), cd(0), cd(0), cd(0.6);
  CHECK_THROWS_AS(validate_state(DensityMatrix{bad_trace}), std::invalid_argument);

  Mat non_hermitian(2, 2);
  non_hermitian << cd(0.5), cd(0.3), cd(0), cd(0.5);
  CHECK_THROWS_AS(validate_state(DensityMatrix{non_hermitian}), std::invalid_argument);

  Mat negative(2, 2);
  negative << cd(1.5), cd(0), cd(0), cd(-0.5);
  CHECK_THROWS_AS(validate_state(DensityMatrix{negative}), std::invalid_argument);

  Mat fine(2, 2);
  fine << cd(0.75), cd(0.1), cd(0.1), cd(0.25);
  CHECK_NOTHROW(validate_state(DensityMatrix{fine}));
}

TEST_CASE("expectation values") {
  const SpinSystem one = one_spin_system();
  const auto ground = initial_state(one, InitialState::pure_ground);
  CHECK(expectation(ground, half_pauli(Axis::z)) == 0.5);
  CHECK(expectation(one, ground, ProductOperator::single(one, 0, Axis::z)) == 0.5);

  SECTION("a non-real expectation is reported, not silently truncated") {
    Mat m(2, 2);
    m << cd(0.5), cd(0, -0.5), cd(0, 0.5), cd(0.5);  // rho = 1/2 + I_y
    const Mat raising = half_pauli(Axis::x) + cd(0, 1) * half_pauli(Axis::y);
    CHECK_THROWS_AS(expectation(DensityMatrix{m}, raising), std::runtime_error);
  }
}

TEST_CASE("partial trace") {
  const SpinSystem two = two_spin_system();

  SECTION("product states factor back out") {
    Mat rho_c(2, 2), rho_t(2, 2);
    rho_c << cd(0.8), cd(0.1, 0.2), cd(0.1, -0.2), cd(0.2);
    rho_t << cd(0.5), cd(0, 0.3), cd(0, -0.3), cd(0.5);
    const DensityMatrix dm{kron(rho_c, rho_t)};
    CHECK(max_abs_diff(partial_trace(dm, 0).m, rho_c) < 1e-15);
    CHECK(max_abs_diff(partial_trace(dm, 1).m, rho_t) < 1e-15);
  }
  SECTION("Bell state traces to the maximally mixed state") {
    Mat bell = Mat::Zero(4, 4);
    bell(0, 0) = bell(0, 3) = bell(3, 0) = bell(3, 3) = cd(0.5);
    const Mat half = 0.5 * identity(2);
    CHECK(max_abs_diff(partial_trace(DensityMatrix{bell}, 0).m, half) < 1e-15);
    CHECK(max_abs_diff(partial_trace(DensityMatrix{bell}, 1).m, half) < 1e-15);
  }
  CHECK_THROWS_AS(partial_trace(initial_state(one_spin_system(),
                                              InitialState::pure_ground), 0),
                  std::invalid_argument);
}
