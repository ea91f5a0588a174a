#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "experiments.hpp"

namespace zeno {

enum class FitModel { cosine, exponential };

struct DecayFit {
  FitModel model = FitModel::cosine;
  double theta = 0.0;  // rad per step (cosine model)
  double k = 0.0;      // decay rate per step (exponential model)
  double amplitude = 0.0;
  double rms_residual = 0.0;
  int excluded = 0;  // exponential model: non-positive points dropped
};

namespace detail {

// Least-squares cost of A*cos(theta*n) with the amplitude profiled out.
inline double cosine_cost(const std::vector<int>& n, const std::vector<double>& s,
                          double theta, double* amplitude = nullptr) {
  double sc = 0.0, cc = 0.0, ss = 0.0;
  for (size_t i = 0; i < n.size(); ++i) {
    const double c = std::cos(theta * n[i]);
    sc += s[i] * c;
    cc += c * c;
    ss += s[i] * s[i];
  }
  if (cc < 1e-300) {
    if (amplitude) *amplitude = 0.0;
    return ss;
  }
  if (amplitude) *amplitude = sc / cc;
  return ss - sc * sc / cc;
}

}  // namespace detail

// Global grid search over theta in [0, pi] followed by golden-section
// refinement and a Gauss-Newton polish. Strided sample grids admit alias
// frequencies with identical cost; ties resolve to the smallest theta in
// the alias family.
inline DecayFit fit_cosine(const ZenoCurve& curve) {
  const auto& n = curve.n;
  const auto& s = curve.signal;
  if (n.size() != s.size() || n.size() < 4)
    throw std::invalid_argument("cosine fit needs at least 4 points");
  const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
  if (*mn == *mx)
    throw std::invalid_argument("cosine fit is degenerate on constant data");

  const int grid = 8000;
  double best_theta = 0.0;
  double best_cost = detail::cosine_cost(n, s, 0.0);
  for (int i = 1; i <= grid; ++i) {
    const double theta = pi * i / grid;
    const double cost = detail::cosine_cost(n, s, theta);
    if (cost < best_cost) {
      best_cost = cost;
      best_theta = theta;
    }
  }

  const double h = pi / grid;
  double a = std::max(0.0, best_theta - h);
  double b = std::min(pi, best_theta + h);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = detail::cosine_cost(n, s, c1);
  double f2 = detail::cosine_cost(n, s, c2);
  for (int it = 0; it < 160; ++it) {
    if (f1 < f2) {
      b = c2;
      c2 = c1;
      f2 = f1;
      c1 = b - gr * (b - a);
      f1 = detail::cosine_cost(n, s, c1);
    } else {
      a = c1;
      c1 = c2;
      f1 = f2;
      c2 = a + gr * (b - a);
      f2 = detail::cosine_cost(n, s, c2);
    }
  }

  // Gauss-Newton polish on the raw residuals. The profiled cost above loses
  // accuracy to cancellation once the bracket is tighter than ~1e-9, so the
  // final digits come from the residual form, which is a sum of squares and
  // does not cancel.
  auto sse_at = [&](double th, double* amp_out) {
    double sc = 0.0, cc = 0.0;
    for (size_t i = 0; i < n.size(); ++i) {
      const double c = std::cos(th * n[i]);
      sc += s[i] * c;
      cc += c * c;
    }
    const double amp = cc < 1e-300 ? 0.0 : sc / cc;
    double sse = 0.0;
    for (size_t i = 0; i < n.size(); ++i) {
      const double r = s[i] - amp * std::cos(th * n[i]);
      sse += r * r;
    }
    if (amp_out) *amp_out = amp;
    return sse;
  };

  struct Polished {
    double theta, amp, sse;
  };
  auto polish = [&](double theta0) {
    Polished r{theta0, 0.0, 0.0};
    r.sse = sse_at(r.theta, &r.amp);
    for (int it = 0; it < 40; ++it) {
      double gj = 0.0, jj = 0.0;
      for (size_t i = 0; i < n.size(); ++i) {
        const double c = std::cos(r.theta * n[i]);
        const double j = -r.amp * n[i] * std::sin(r.theta * n[i]);
        gj += (s[i] - r.amp * c) * j;
        jj += j * j;
      }
      if (jj == 0.0) break;
      double step = std::clamp(gj / jj, -h, h);
      bool moved = false;
      for (int half = 0; half < 20 && std::abs(step) > 0.0; ++half) {
        const double cand = r.theta + step;
        if (cand > 0.0 && cand < pi) {
          double cand_amp = 0.0;
          const double cand_sse = sse_at(cand, &cand_amp);
          if (cand_sse <= r.sse) {
            r.theta = cand;
            r.amp = cand_amp;
            r.sse = cand_sse;
            moved = true;
            break;
          }
        }
        step /= 2;
      }
      if (!moved || std::abs(step) < 1e-15 * std::max(r.theta, 1e-6)) break;
    }
    return r;
  };

  Polished best = polish((a + b) / 2);

  // Samples on a stride-g grid cannot distinguish theta from the family
  // sign*theta + 2*pi*k/g (amplitude sign soaks up the parity); canonicalize
  // to the smallest member whose residual matches the optimum.
  long g = 0;
  for (size_t i = 1; i < n.size(); ++i) {
    const long long d = static_cast<long long>(n[i]) - n[0];
    g = std::gcd(g, static_cast<long>(d < 0 ? -d : d));
  }
  if (g > 1 && g <= 10000) {
    double ss = 0.0;
    for (double v : s) ss += v * v;
    const double slack = 1e-9 * best.sse + 1e-12 * (1.0 + ss);
    double pick = best.theta;
    for (int sign = -1; sign <= 1; sign += 2)
      for (long k = -g; k <= g; ++k) {
        const double cand = sign * best.theta + 2.0 * pi * k / g;
        if (!(cand > 0.0 && cand <= pi) || cand >= pick) continue;
        if (sse_at(cand, nullptr) <= best.sse + slack) pick = cand;
      }
    if (pick < best.theta) best = polish(pick);
  }

  DecayFit fit;
  fit.model = FitModel::cosine;
  fit.theta = best.theta;
  fit.amplitude = best.amp;
  fit.rms_residual = std::sqrt(best.sse / static_cast<double>(n.size()));
  return fit;
}

// Least-squares fit of A*exp(-k*n): log-linear initial estimate on the
// positive points, then Gauss-Newton with step halving.
inline DecayFit fit_exponential(const ZenoCurve& curve) {
  if (curve.n.size() != curve.signal.size())
    throw std::invalid_argument("curve arrays disagree in length");
  std::vector<double> x, y;
  DecayFit fit;
  fit.model = FitModel::exponential;
  for (size_t i = 0; i < curve.n.size(); ++i) {
    if (curve.signal[i] > 0.0) {
      x.push_back(curve.n[i]);
      y.push_back(curve.signal[i]);
    } else {
      ++fit.excluded;
    }
  }
  const size_t m = x.size();
  if (m < 3)
    throw std::invalid_argument("exponential fit needs at least 3 positive points");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < m; ++i) {
    const double ly = std::log(y[i]);
    sx += x[i];
    sy += ly;
    sxx += x[i] * x[i];
    sxy += x[i] * ly;
  }
  const double det = m * sxx - sx * sx;
  if (det == 0.0)
    throw std::invalid_argument("exponential fit is degenerate (single n value)");
  double k = -(m * sxy - sx * sy) / det;
  double amp = std::exp((sy - (-k) * sx) / m);

  auto cost_of = [&](double a0, double k0) {
    double c = 0.0;
    for (size_t i = 0; i < m; ++i) {
      const double r = y[i] - a0 * std::exp(-k0 * x[i]);
      c += r * r;
    }
    return c;
  };
  double cost = cost_of(amp, k);
  for (int iter = 0; iter < 60; ++iter) {
    double g0 = 0, g1 = 0, h00 = 0, h01 = 0, h11 = 0;
    for (size_t i = 0; i < m; ++i) {
      const double e = std::exp(-k * x[i]);
      const double r = y[i] - amp * e;
      const double da = e;
      const double dk = -amp * x[i] * e;
      g0 += da * r;
      g1 += dk * r;
      h00 += da * da;
      h01 += da * dk;
      h11 += dk * dk;
    }
    const double hdet = h00 * h11 - h01 * h01;
    if (hdet == 0.0) break;
    double step_a = (h11 * g0 - h01 * g1) / hdet;
    double step_k = (h00 * g1 - h01 * g0) / hdet;
    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30; ++half) {
      const double na = amp + scale * step_a;
      const double nk = k + scale * step_k;
      const double nc = cost_of(na, nk);
      if (nc <= cost) {
        amp = na;
        k = nk;
        accepted = nc < cost;
        cost = nc;
        break;
      }
      scale /= 2;
    }
    if (!accepted) break;
    if (std::abs(scale * step_k) < 1e-16 * std::max(1.0, std::abs(k)) &&
        std::abs(scale * step_a) < 1e-16 * std::max(1.0, std::abs(amp)))
      break;
  }

  fit.k = k;
  fit.amplitude = amp;
  fit.rms_residual = std::sqrt(cost / static_cast<double>(m));
  return fit;
}

// ---------------------------------------------------------------------------
// CSV emission: deterministic bytes, >= 12 significant digits.
// ---------------------------------------------------------------------------

namespace detail {
inline std::string fmt_csv(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}
}  // namespace detail

inline std::string emit_csv(const ZenoCurve& curve) {
  if (curve.n.size() != curve.signal.size())
    throw std::invalid_argument("curve arrays disagree in length");
  std::string out = "n,signal\n";
  for (size_t i = 0; i < curve.n.size(); ++i)
    out += std::to_string(curve.n[i]) + "," + detail::fmt_csv(curve.signal[i]) +
           "\n";
  return out;
}

inline std::string emit_csv(const DecayFit& fit) {
  std::string out;
  if (fit.model == FitModel::cosine) {
    out += "model,cosine\n";
    out += "theta," + detail::fmt_csv(fit.theta) + "\n";
  } else {
    out += "model,exponential\n";
    out += "k," + detail::fmt_csv(fit.k) + "\n";
    out += "excluded," + std::to_string(fit.excluded) + "\n";
  }
  out += "amplitude," + detail::fmt_csv(fit.amplitude) + "\n";
  out += "rms_residual," + detail::fmt_csv(fit.rms_residual) + "\n";
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << content;
  f.flush();
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

template <class T>
inline void emit_csv(const T& value, const std::string& path) {
  write_text_file(path, emit_csv(value));
}

}  // namespace zeno
