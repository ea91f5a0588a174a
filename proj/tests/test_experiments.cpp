#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "zenosim/engine.hpp"
#include "zenosim/experiments.hpp"

using namespace zeno;

TEST_CASE("survival probability after n projective measurements") {
  CHECK_THROWS_AS(survival_probability(0), std::invalid_argument);

  const auto s1 = survival_probability(1);
  CHECK(std::abs(s1.exact) < 1e-30);

  const auto s10 = survival_probability(10);
  CHECK(s10.exact == Catch::Approx(0.780546).margin(1e-5));
  CHECK(s10.approx == Catch::Approx(0.78134).margin(1e-5));

  const auto s100 = survival_probability(100);
  CHECK(s100.exact == Catch::Approx(0.975627).margin(1e-6));

  SECTION("monotone approach to certainty") {
    double prev = 0.0;
    for (int n = 1; n <= 64; n *= 2) {
      const double p = survival_probability(n).exact;
      CHECK(p >= prev);
      prev = p;
    }
    CHECK(survival_probability(4096).exact > 0.999);
  }
  SECTION("approximation quality improves with n") {
    for (int n : {10, 100, 1000})
      CHECK(std::abs(survival_probability(n).exact -
                     survival_probability(n).approx) < 1e-3);
  }
}

TEST_CASE("rabi state amplitudes") {
  const auto half = rabi_state(pi / 2);
  CHECK(std::norm(half[0]) == Catch::Approx(0.5));
  CHECK(std::norm(half[1]) == Catch::Approx(0.5));
  const auto full = rabi_state(pi);
  CHECK(std::norm(full[0]) < 1e-30);
  CHECK(std::norm(full[1]) == Catch::Approx(1.0));
}

TEST_CASE("analytic decay oracles") {
  SECTION("ideal crush train is a pure power law") {
    CHECK(crush_decay_oracle(deg2rad(5), 20) == Catch::Approx(0.92658).margin(1e-5));
    CHECK(crush_decay_oracle(deg2rad(1), 0) == 1.0);
  }
  SECTION("measurement strength interpolates crusher off/on") {
    CHECK(measurement_strength_lambda(1) == Catch::Approx(0.0).margin(1e-15));
    CHECK(measurement_strength_lambda(2) == Catch::Approx(std::cos(pi / 4)));
    CHECK(measurement_strength_lambda(1 << 20) == Catch::Approx(1.0).margin(1e-10));
    CHECK_THROWS_AS(measurement_strength_lambda(0), std::invalid_argument);
  }
  SECTION("damped train limits") {
    std::vector<int> ns;
    for (int n = 0; n <= 50; ++n) ns.push_back(n);
    const double theta = deg2rad(5);
    const auto free_curve = damped_train_curve(1.0, theta, ns);
    const auto crushed = damped_train_curve(0.0, theta, ns);
    for (int n : ns) {
      CHECK(free_curve[n] == Catch::Approx(std::cos(n * theta)).margin(1e-12));
      CHECK(crushed[n] == Catch::Approx(std::pow(std::cos(theta), n)).margin(1e-12));
    }
  }
  SECTION("reduced channel oracle matches the recursion") {
    const double theta = deg2rad(5);
    std::vector<int> ns{0, 1, 2, 7, 30};
    const auto curve = damped_train_curve(measurement_strength_lambda(16), theta, ns);
    for (size_t i = 0; i < ns.size(); ++i)
      CHECK(reduced_channel_oracle(16, theta, ns[i]) ==
            Catch::Approx(curve[i]).margin(1e-14));
  }
}

TEST_CASE("standard systems") {
  const SpinSystem one = one_spin_system();
  CHECK(one.n_spins() == 1);
  CHECK(one.spins[0].gamma == gamma_1h);
  CHECK(one.spins[0].offset == 0.0);

  const SpinSystem two = two_spin_system(195.0);
  CHECK(two.spins[0].label == "C");
  CHECK(two.spins[1].label == "H");
  CHECK(two.spins[1].gamma / two.spins[0].gamma == Catch::Approx(gamma_ratio_1h_13c));
  CHECK(two.spins[0].offset == Catch::Approx(pi * 195.0));
  CHECK(two.spins[1].offset == Catch::Approx(pi * 195.0));
  CHECK(two.j_hz == 195.0);
}

TEST_CASE("one-spin generator emits parseable text") {
  OneSpinConfig cfg;
  cfg.n_stop = 40;

  SECTION("off mode has no gradients or crushers inside the loop") {
    cfg.gradients = GradientMode::off;
    const std::string text = one_spin_sequence_text(cfg, 3);
    CHECK(text.find("gradient") == std::string::npos);
    const auto tl = seq::compile(seq::parse(text), one_spin_system());
    int pulses = 0, delays = 0;
    for (const auto& e : tl.events) {
      pulses += e.kind == seq::Event::Kind::pulse;
      delays += e.kind == seq::Event::Kind::delay;
    }
    CHECK(pulses == 3);
    CHECK(delays == 3);
    CHECK(tl.events.back().kind == seq::Event::Kind::acquire);
  }
  SECTION("ideal mode crushes after every delay") {
    cfg.gradients = GradientMode::ideal_crush;
    const auto tl =
        seq::compile(seq::parse(one_spin_sequence_text(cfg, 4)), one_spin_system());
    int crushes = 0;
    for (const auto& e : tl.events) crushes += e.kind == seq::Event::Kind::crush;
    CHECK(crushes == 5);  // one per iteration plus the pre-readout crusher
  }
  SECTION("ensemble mode carries gradient delays") {
    cfg.gradients = GradientMode::ensemble;
    const auto tl =
        seq::compile(seq::parse(one_spin_sequence_text(cfg, 2)), one_spin_system());
    int grads = 0;
    for (const auto& e : tl.events)
      grads += e.kind == seq::Event::Kind::delay && e.gradient.has_value();
    CHECK(grads == 2);
  }
}

TEST_CASE("one-spin curves against analytic forms") {
  OneSpinConfig cfg;
  cfg.n_start = 0;
  cfg.n_stop = 30;
  cfg.n_step = 1;

  SECTION("no gradients: pure rotation") {
    cfg.gradients = GradientMode::off;
    const ZenoCurve curve = run_one_spin(cfg);
    REQUIRE(curve.n.size() == 31);
    for (size_t i = 0; i < curve.n.size(); ++i)
      CHECK(curve.signal[i] ==
            Catch::Approx(std::cos(curve.n[i] * cfg.theta)).margin(1e-12));
  }
  SECTION("ideal crushers: power-law survival") {
    cfg.gradients = GradientMode::ideal_crush;
    const ZenoCurve curve = run_one_spin(cfg);
    for (size_t i = 0; i < curve.n.size(); ++i)
      CHECK(curve.signal[i] ==
            Catch::Approx(crush_decay_oracle(cfg.theta, curve.n[i])).margin(1e-12));
  }
}

TEST_CASE("measurement gate") {
  SECTION("r-th root composes back to the full gate") {
    for (int r : {2, 3, 8}) {
      Mat acc = identity(4);
      for (int k = 0; k < r; ++k) acc = Mat(controlled_rx(r) * acc);
      CHECK((acc - controlled_rx(1)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SECTION("entry magnitudes of the full gate match CNOT") {
    const Mat g = controlled_rx(1);
    Mat cnot_abs = Mat::Zero(4, 4);
    cnot_abs(0, 0) = cnot_abs(1, 1) = cnot_abs(2, 3) = cnot_abs(3, 2) = 1.0;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        CHECK(std::abs(g(r, c)) == Catch::Approx(std::abs(cnot_abs(r, c))).margin(1e-14));
  }
  SECTION("weak limit approaches the identity") {
    CHECK((controlled_rx(1 << 20) - identity(4)).cwiseAbs().maxCoeff() < 1e-5);
  }
  SECTION("reduced control channel is phase damping of strength cos(pi/2r)") {
    const SpinSystem sys = two_spin_system();
    for (int r : {1, 2, 4, 16}) {
      DensityMatrix dm = initial_state(sys, InitialState::control_polarized_target_mixed);
      apply_pulse(sys, dm, {0, deg2rad(40), 0.0, 1.0});
      DensityMatrix control_ref = partial_trace(dm, 0);

      apply_unitary(dm, controlled_rx(r));
      crush(sys, dm, 1);
      const DensityMatrix control = partial_trace(dm, 0);

      phase_damp(one_spin_system(), control_ref, 0,
                 measurement_strength_lambda(r));
      CHECK((control.m - control_ref.m).cwiseAbs().maxCoeff() < 1e-13);

      // the target is mixed again after the crush
      const DensityMatrix target = partial_trace(dm, 1);
      CHECK((target.m - Mat(0.5 * identity(2))).cwiseAbs().maxCoeff() < 1e-13);
    }
  }
  SECTION("one gate-model step with the full CNOT") {
    const SpinSystem sys = two_spin_system();
    DensityMatrix dm = initial_state(sys, InitialState::control_polarized_target_mixed);
    gate_step(sys, dm, 1, deg2rad(5));
    const Mat iz0 = build_operator(sys, ProductOperator::single(sys, 0, Axis::z));
    CHECK(expectation(dm, iz0) == Catch::Approx(0.5 * std::cos(deg2rad(5))).margin(1e-14));
    const DensityMatrix control = partial_trace(dm, 0);
    CHECK(std::abs(control.m(0, 1)) < 1e-14);
  }
}

TEST_CASE("gate model curves") {
  TwoSpinConfig cfg;
  cfg.n_stop = 40;
  cfg.n_step = 1;

  SECTION("r=1 reproduces the ideal-crush law") {
    const ZenoCurve curve = run_gate_model(cfg, 1);
    for (size_t i = 0; i < curve.n.size(); ++i)
      CHECK(curve.signal[i] ==
            Catch::Approx(std::pow(std::cos(cfg.theta), curve.n[i])).margin(1e-13));
  }
  SECTION("general r matches the reduced-channel recursion") {
    for (int r : {2, 16, 64}) {
      const ZenoCurve curve = run_gate_model(cfg, r);
      for (size_t i = 0; i < curve.n.size(); ++i)
        CHECK(curve.signal[i] ==
              Catch::Approx(reduced_channel_oracle(r, cfg.theta, curve.n[i]))
                  .margin(1e-13));
    }
  }
}

TEST_CASE("two-spin generator text") {
  TwoSpinConfig cfg;

  SECTION("ideal model text compiles and balances its windows") {
    cfg.model = TwoSpinModel::hamiltonian_ideal;
    const std::string text = two_spin_sequence_text(cfg, 16, 3);
    const auto tl = seq::compile(seq::parse(text), two_spin_system(cfg.j_hz));
    CHECK(tl.events.back().kind == seq::Event::Kind::acquire);
    CHECK(tl.events.back().spin == 0);
    // 3 iterations, each 1/(2rJ) + 1/J long
    const double expected = 3 * (0.5 / (16 * cfg.j_hz) + 1.0 / cfg.j_hz);
    CHECK(tl.total_duration == Catch::Approx(expected).epsilon(1e-12));
  }
  SECTION("ensemble model text carries bipolar gradients") {
    cfg.model = TwoSpinModel::hamiltonian_ensemble;
    const std::string text = two_spin_sequence_text(cfg, 16, 2);
    const auto tl = seq::compile(seq::parse(text), two_spin_system(cfg.j_hz));
    double net = 0.0;
    int lobes = 0;
    for (const auto& e : tl.events)
      if (e.kind == seq::Event::Kind::delay && e.gradient) {
        net += *e.gradient * e.duration;
        ++lobes;
      }
    CHECK(lobes == 4);
    CHECK(std::abs(net) < 1e-15);  // bipolar pairs cancel for the control
    CHECK(text.find("crush") == std::string::npos);
  }
}

TEST_CASE("Hamiltonian model agrees with the gate model") {
  TwoSpinConfig cfg;
  cfg.n_stop = 12;
  cfg.n_step = 1;
  cfg.model = TwoSpinModel::hamiltonian_ideal;
  for (int r : {1, 4, 16}) {
    const ZenoCurve ham = run_hamiltonian_model(cfg, r);
    TwoSpinConfig gate_cfg = cfg;
    gate_cfg.model = TwoSpinModel::gate_ideal;
    const ZenoCurve gate = run_gate_model(gate_cfg, r);
    for (size_t i = 0; i < ham.n.size(); ++i)
      CHECK(ham.signal[i] == Catch::Approx(gate.signal[i]).margin(1e-8));
  }
}

TEST_CASE("run_two_spin dispatches per r value") {
  TwoSpinConfig cfg;
  cfg.r_values = {1, 16};
  cfg.n_stop = 10;
  const TwoSpinResult res = run_two_spin(cfg);
  REQUIRE(res.r_values == std::vector<int>{1, 16});
  REQUIRE(res.curves.size() == 2);
  CHECK(res.curves[0].signal[5] ==
        Catch::Approx(reduced_channel_oracle(1, cfg.theta, res.curves[0].n[5]))
            .margin(1e-13));
}

TEST_CASE("config validation") {
  SECTION("one-spin") {
    OneSpinConfig cfg;
    cfg.tau = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.n_step = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
  SECTION("two-spin") {
    TwoSpinConfig cfg;
    cfg.r_values = {0};
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.grad_duration = 1.0;  // would not fit inside the 1/J window
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.j_hz = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  }
}
