#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "zenosim/analysis.hpp"
#include "zenosim/engine.hpp"
#include "zenosim/experiments.hpp"
#include "zenosim/sequence.hpp"
#include "zenosim/system_file.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt15(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

long long to_int(const std::string& s, const char* what) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw std::invalid_argument(std::string("invalid integer for ") + what +
                                ": '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

struct Range {
  int start = 0, stop = 0, step = 1;
};

// "start:stop:step", stop inclusive when aligned with step; a bare integer
// means a single point.
Range parse_range(const std::string& text) {
  const auto parts = split(text, ':');
  Range r;
  if (parts.size() == 1) {
    r.start = r.stop = static_cast<int>(to_int(parts[0], "n"));
    return r;
  }
  if (parts.size() != 3)
    throw std::invalid_argument("range must be start:stop:step, got '" + text +
                                "'");
  r.start = static_cast<int>(to_int(parts[0], "range start"));
  r.stop = static_cast<int>(to_int(parts[1], "range stop"));
  r.step = static_cast<int>(to_int(parts[2], "range step"));
  if (r.step < 1 || r.stop < r.start || r.start < 0)
    throw std::invalid_argument("range must satisfy 0 <= start <= stop, step >= 1");
  return r;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (const auto& part : split(text, ','))
    out.push_back(static_cast<int>(to_int(part, what)));
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw zeno::seq::SeqError(path, {1, 1}, "cannot open file");
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

// Deferred writes: everything is computed and staged first, then committed,
// so a failing run leaves no partial output files behind.
struct OutputSet {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string path, std::string content) {
    files.emplace_back(std::move(path), std::move(content));
  }
  void commit() const {
    for (const auto& [path, content] : files) zeno::write_text_file(path, content);
  }
};

struct Manifest {
  std::vector<std::pair<std::string, std::string>> kv;
  void set(const std::string& k, const std::string& v) { kv.emplace_back(k, v); }
  void set(const std::string& k, double v) { set(k, fmt(v)); }
  void set(const std::string& k, int v) { set(k, std::to_string(v)); }
  void set(const std::string& k, std::uint64_t v) { set(k, std::to_string(v)); }
  std::string text() const {
    std::string out;
    for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
    return out;
  }
};

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return dir.back() == '/' ? dir + name : dir + "/" + name;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

struct RunFlags {
  std::string seq_path;
  std::string system_path;
  std::string out_path;
  std::string init = "ground";  // ground | iz | control-mixed
  int isochromats = 1;
  std::uint64_t seed = 1;
  int workers = 0;
  double length = 0.01;
  double diffusion = 0.0;
  double b1_spread = 0.0;
  int substeps = 32;
  bool check_strobe = false;
};

zeno::InitialState init_kind(const std::string& name) {
  if (name == "ground") return zeno::InitialState::pure_ground;
  if (name == "iz") return zeno::InitialState::iz_polarized;
  if (name == "control-mixed")
    return zeno::InitialState::control_polarized_target_mixed;
  throw std::invalid_argument("unknown --init '" + name +
                              "' (ground, iz, control-mixed)");
}

void cmd_run(const RunFlags& fl) {
  const zeno::SpinSystem sys = zeno::load_system_file(fl.system_path);
  const auto seqn = zeno::seq::parse(read_file(fl.seq_path), fl.seq_path);
  const auto timeline = zeno::seq::compile(seqn, sys, fl.seq_path);

  if (fl.check_strobe) {
    const auto report = zeno::seq::check_stroboscopic(timeline, sys);
    for (const auto& w : report.windows) {
      if (w.j_ok && w.offsets_ok) continue;
      std::fprintf(stderr,
                   "strobe: %s:%d:%d: delay of %gs is not an evolution-period "
                   "multiple (%s)\n",
                   fl.seq_path.c_str(), w.pos.line, w.pos.col, w.duration,
                   !w.j_ok ? "J coupling" : "offset");
    }
    if (report.all_ok) std::fprintf(stderr, "strobe: all delay windows aligned\n");
  }

  zeno::RunConfig cfg;
  cfg.geometry.n_isochromats = fl.isochromats;
  cfg.geometry.length = fl.length;
  cfg.geometry.diffusion = fl.diffusion;
  cfg.geometry.b1_spread = fl.b1_spread;
  cfg.geometry.gradient_substeps = fl.substeps;
  cfg.seed = fl.seed;
  cfg.workers = fl.workers;

  const auto result =
      zeno::run_timeline(sys, timeline, zeno::initial_state(sys, init_kind(fl.init)), cfg);
  std::printf("value %.15g\n", result.value);

  if (!fl.out_path.empty()) {
    OutputSet out;
    std::string csv = "key,value\n";
    csv += "value," + fmt15(result.value) + "\n";
    csv += "isochromats," + std::to_string(result.n_members) + "\n";
    out.add(fl.out_path, csv);

    Manifest m;
    m.set("tool", std::string("zenosim ") + kVersion);
    m.set("subcommand", "run");
    m.set("seq", fl.seq_path);
    m.set("system", fl.system_path);
    m.set("init", fl.init);
    m.set("isochromats", fl.isochromats);
    m.set("seed", fl.seed);
    m.set("workers", fl.workers);
    m.set("length", fl.length);
    m.set("diffusion", fl.diffusion);
    m.set("b1_spread", fl.b1_spread);
    m.set("substeps", fl.substeps);
    m.set("out", fl.out_path);
    out.add(fl.out_path + ".manifest", m.text());
    out.commit();
  }
}

// ---------------------------------------------------------------------------
// experiment zeno1 / zeno2
// ---------------------------------------------------------------------------

struct Zeno1Flags {
  double theta_deg = 1.0;
  double tau_ms = 1.0;
  std::string n_range = "0:400:10";
  std::string gradients = "ideal";  // off | ideal | ensemble
  int isochromats = 10000;
  std::uint64_t seed = 1;
  int workers = 0;
  double length = 0.01;
  double diffusion = 0.0;
  int substeps = 32;
  std::string outdir = ".";
};

zeno::GradientMode gradient_mode(const std::string& name) {
  if (name == "off") return zeno::GradientMode::off;
  if (name == "ideal") return zeno::GradientMode::ideal_crush;
  if (name == "ensemble") return zeno::GradientMode::ensemble;
  throw std::invalid_argument("unknown --gradients '" + name +
                              "' (off, ideal, ensemble)");
}

void cmd_zeno1(const Zeno1Flags& fl) {
  zeno::OneSpinConfig cfg;
  cfg.theta = zeno::deg2rad(fl.theta_deg);
  cfg.tau = fl.tau_ms * 1e-3;
  const Range nr = parse_range(fl.n_range);
  cfg.n_start = nr.start;
  cfg.n_stop = nr.stop;
  cfg.n_step = nr.step;
  cfg.gradients = gradient_mode(fl.gradients);
  cfg.geometry.n_isochromats = fl.isochromats;
  cfg.geometry.length = fl.length;
  cfg.geometry.diffusion = fl.diffusion;
  cfg.geometry.gradient_substeps = fl.substeps;
  cfg.seed = fl.seed;
  cfg.workers = fl.workers;

  const zeno::ZenoCurve curve = zeno::run_one_spin(cfg);

  zeno::DecayFit fit;
  if (cfg.gradients == zeno::GradientMode::off) {
    fit = zeno::fit_cosine(curve);
    std::printf("zeno1 %s: fitted theta %.15g deg (period %.6g steps)\n",
                fl.gradients.c_str(), zeno::rad2deg(fit.theta),
                2 * zeno::pi / fit.theta);
  } else {
    fit = zeno::fit_exponential(curve);
    std::printf("zeno1 %s: fitted k %.15g per step\n", fl.gradients.c_str(),
                fit.k);
  }

  OutputSet out;
  const std::string stem = "zeno1_" + fl.gradients;
  out.add(join_path(fl.outdir, stem + ".csv"), zeno::emit_csv(curve));
  out.add(join_path(fl.outdir, stem + "_fit.csv"), zeno::emit_csv(fit));

  Manifest m;
  m.set("tool", std::string("zenosim ") + kVersion);
  m.set("subcommand", "experiment zeno1");
  m.set("theta_deg", fl.theta_deg);
  m.set("tau_ms", fl.tau_ms);
  m.set("n", fl.n_range);
  m.set("gradients", fl.gradients);
  m.set("crusher_spread", cfg.crusher_spread);
  m.set("isochromats", fl.isochromats);
  m.set("seed", fl.seed);
  m.set("workers", fl.workers);
  m.set("length", fl.length);
  m.set("diffusion", fl.diffusion);
  m.set("substeps", fl.substeps);
  m.set("outputs", stem + ".csv;" + stem + "_fit.csv");
  out.add(join_path(fl.outdir, stem + "_manifest.txt"), m.text());
  out.commit();
}

struct Zeno2Flags {
  std::string r_list = "1,16,64";
  double theta_deg = 5.0;
  double j_hz = zeno::default_j_hz;
  std::string n_range = "0:60:2";
  std::string model = "gate";  // gate | hamiltonian | ensemble
  double diffusion = 0.0;
  double grad_us = 500.0;
  int isochromats = 256;
  std::uint64_t seed = 1;
  int workers = 0;
  double length = 0.01;
  int substeps = 32;
  std::string outdir = ".";
};

zeno::TwoSpinModel two_spin_model(const std::string& name) {
  if (name == "gate") return zeno::TwoSpinModel::gate_ideal;
  if (name == "hamiltonian") return zeno::TwoSpinModel::hamiltonian_ideal;
  if (name == "ensemble") return zeno::TwoSpinModel::hamiltonian_ensemble;
  throw std::invalid_argument("unknown --model '" + name +
                              "' (gate, hamiltonian, ensemble)");
}

void cmd_zeno2(const Zeno2Flags& fl) {
  zeno::TwoSpinConfig cfg;
  cfg.theta = zeno::deg2rad(fl.theta_deg);
  cfg.r_values = parse_int_list(fl.r_list, "r");
  cfg.j_hz = fl.j_hz;
  const Range nr = parse_range(fl.n_range);
  cfg.n_start = nr.start;
  cfg.n_stop = nr.stop;
  cfg.n_step = nr.step;
  cfg.model = two_spin_model(fl.model);
  cfg.grad_duration = fl.grad_us * 1e-6;
  cfg.geometry.n_isochromats = fl.isochromats;
  cfg.geometry.length = fl.length;
  cfg.geometry.diffusion = fl.diffusion;
  cfg.geometry.gradient_substeps = fl.substeps;
  cfg.seed = fl.seed;
  cfg.workers = fl.workers;

  const zeno::TwoSpinResult result = zeno::run_two_spin(cfg);

  OutputSet out;
  std::string summary = "r,theta,k\n";
  std::string outputs;
  for (size_t i = 0; i < result.r_values.size(); ++i) {
    const int r = result.r_values[i];
    const auto& curve = result.curves[i];
    const std::string name = "zeno2_" + fl.model + "_r" + std::to_string(r) + ".csv";
    out.add(join_path(fl.outdir, name), zeno::emit_csv(curve));
    outputs += (outputs.empty() ? "" : ";") + name;

    double theta_fit = std::numeric_limits<double>::quiet_NaN();
    double k_fit = std::numeric_limits<double>::quiet_NaN();
    try {
      theta_fit = zeno::fit_cosine(curve).theta;
    } catch (const std::invalid_argument&) {
    }
    try {
      k_fit = zeno::fit_exponential(curve).k;
    } catch (const std::invalid_argument&) {
    }
    summary += std::to_string(r) + "," + fmt15(theta_fit) + "," + fmt15(k_fit) + "\n";
    std::printf("zeno2 %s r=%d: fitted theta %.15g deg, k %.15g per step\n",
                fl.model.c_str(), r, zeno::rad2deg(theta_fit), k_fit);
  }
  const std::string fit_name = "zeno2_" + fl.model + "_fit.csv";
  out.add(join_path(fl.outdir, fit_name), summary);
  outputs += ";" + fit_name;

  Manifest m;
  m.set("tool", std::string("zenosim ") + kVersion);
  m.set("subcommand", "experiment zeno2");
  m.set("r", fl.r_list);
  m.set("theta_deg", fl.theta_deg);
  m.set("j_hz", fl.j_hz);
  m.set("n", fl.n_range);
  m.set("model", fl.model);
  m.set("grad_us", fl.grad_us);
  m.set("crusher_spread", cfg.crusher_spread);
  m.set("isochromats", fl.isochromats);
  m.set("seed", fl.seed);
  m.set("workers", fl.workers);
  m.set("length", fl.length);
  m.set("diffusion", fl.diffusion);
  m.set("substeps", fl.substeps);
  m.set("outputs", outputs);
  out.add(join_path(fl.outdir, "zeno2_" + fl.model + "_manifest.txt"), m.text());
  out.commit();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zenosim: pulse-train spin simulator for quantum Zeno experiments"};
  app.set_version_flag("--version", std::string("zenosim ") + kVersion);
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "simulate a .seq pulse program");
  run->add_option("seq", run_flags.seq_path, "pulse program file")->required();
  run->add_option("--system", run_flags.system_path, "spin system description file")
      ->required();
  run->add_option("--init", run_flags.init,
                  "initial state: ground, iz, control-mixed");
  run->add_option("--isochromats", run_flags.isochromats, "ensemble size");
  run->add_option("--seed", run_flags.seed, "RNG seed");
  run->add_option("--workers", run_flags.workers,
                  "worker threads (0 = ZENOSIM_WORKERS or hardware)");
  run->add_option("--length", run_flags.length, "sample length in m");
  run->add_option("--diffusion", run_flags.diffusion,
                  "diffusion coefficient in m^2/s");
  run->add_option("--b1-spread", run_flags.b1_spread,
                  "fractional B1 inhomogeneity (std dev)");
  run->add_option("--substeps", run_flags.substeps,
                  "diffusion substeps per gradient interval");
  run->add_option("--out", run_flags.out_path, "write result CSV here");
  run->add_flag("--check-strobe", run_flags.check_strobe,
                "report delay windows that break stroboscopic alignment");
  run->callback([&] { cmd_run(run_flags); });

  auto* experiment = app.add_subcommand("experiment", "run a named experiment");
  experiment->require_subcommand(1);

  Zeno1Flags z1;
  auto* zeno1 = experiment->add_subcommand(
      "zeno1", "one-spin pulse train with optional crusher gradients");
  zeno1->add_option("--theta-deg", z1.theta_deg, "per-pulse flip angle in degrees");
  zeno1->add_option("--tau-ms", z1.tau_ms, "inter-pulse delay in ms");
  zeno1->add_option("--n", z1.n_range, "pulse counts start:stop:step");
  zeno1->add_option("--gradients", z1.gradients, "off, ideal, ensemble");
  zeno1->add_option("--isochromats", z1.isochromats, "ensemble size");
  zeno1->add_option("--seed", z1.seed, "RNG seed");
  zeno1->add_option("--workers", z1.workers, "worker threads");
  zeno1->add_option("--length", z1.length, "sample length in m");
  zeno1->add_option("--diffusion", z1.diffusion, "diffusion coefficient in m^2/s");
  zeno1->add_option("--substeps", z1.substeps, "diffusion substeps per gradient");
  zeno1->add_option("--outdir", z1.outdir, "output directory");
  zeno1->callback([&] { cmd_zeno1(z1); });

  Zeno2Flags z2;
  auto* zeno2 = experiment->add_subcommand(
      "zeno2", "two-spin variable-strength measurement train");
  zeno2->add_option("--r", z2.r_list, "measurement strength indices, comma separated");
  zeno2->add_option("--theta-deg", z2.theta_deg, "control flip angle in degrees");
  zeno2->add_option("--j-hz", z2.j_hz, "scalar coupling in Hz");
  zeno2->add_option("--n", z2.n_range, "iteration counts start:stop:step");
  zeno2->add_option("--model", z2.model, "gate, hamiltonian, ensemble");
  zeno2->add_option("--diffusion", z2.diffusion, "diffusion coefficient in m^2/s");
  zeno2->add_option("--grad-us", z2.grad_us, "crusher lobe duration in microseconds");
  zeno2->add_option("--isochromats", z2.isochromats, "ensemble size");
  zeno2->add_option("--seed", z2.seed, "RNG seed");
  zeno2->add_option("--workers", z2.workers, "worker threads");
  zeno2->add_option("--length", z2.length, "sample length in m");
  zeno2->add_option("--substeps", z2.substeps, "diffusion substeps per gradient");
  zeno2->add_option("--outdir", z2.outdir, "output directory");
  zeno2->callback([&] { cmd_zeno2(z2); });

  auto* oracle = app.add_subcommand("oracle", "print analytic reference values");
  oracle->require_subcommand(1);

  double eq1_angle_deg = 90.0;
  auto* eq1 = oracle->add_subcommand("eq1", "post-pulse state of one spin");
  eq1->add_option("--angle-deg", eq1_angle_deg, "pulse flip angle in degrees");
  eq1->callback([&] {
    const auto amps = zeno::rabi_state(zeno::deg2rad(eq1_angle_deg));
    const double up = std::norm(amps[0]);
    const double down = std::norm(amps[1]);
    std::printf("p_up %.15g\np_down %.15g\niz %.15g\n", up, down, (up - down) / 2);
  });

  int eq2_n = 1;
  auto* eq2 = oracle->add_subcommand("eq2", "survival probability after n projections");
  eq2->add_option("--n", eq2_n, "number of projective measurements")->required();
  eq2->callback([&] {
    const auto s = zeno::survival_probability(eq2_n);
    std::printf("exact %.15g\napprox %.15g\n", s.exact, s.approx);
  });

  double crush_theta_deg = 1.0;
  int crush_n = 1;
  auto* crush_cmd = oracle->add_subcommand("crush", "ideal-crush train amplitude");
  crush_cmd->add_option("--theta-deg", crush_theta_deg, "flip angle in degrees");
  crush_cmd->add_option("--n", crush_n, "number of pulses")->required();
  crush_cmd->callback([&] {
    std::printf("value %.15g\n",
                zeno::crush_decay_oracle(zeno::deg2rad(crush_theta_deg), crush_n));
  });

  int ch_r = 1, ch_n = 1;
  double ch_theta_deg = 5.0;
  auto* channel = oracle->add_subcommand("channel", "reduced control-spin channel");
  channel->add_option("--r", ch_r, "measurement strength index")->required();
  channel->add_option("--theta-deg", ch_theta_deg, "flip angle in degrees");
  channel->add_option("--n", ch_n, "number of iterations")->required();
  channel->callback([&] {
    std::printf("value %.15g\n",
                zeno::reduced_channel_oracle(ch_r, zeno::deg2rad(ch_theta_deg), ch_n));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const zeno::seq::SeqError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
