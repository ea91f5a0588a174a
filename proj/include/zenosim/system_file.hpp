#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sequence.hpp"
#include "spin_system.hpp"

namespace zeno {

// Spin-system description files.
//
//   # comment
//   spin C gamma=6.7282802e7 offset=612.61 t1=1.5s t2=200ms
//   spin H gamma=2.6752218744e8 offset=612.61
//   j 195
//
// One `spin` line per spin (gamma required; offset in rad/s, t1/t2 with a
// time unit optional), at most one `j` line in Hz. Diagnostics carry
// file:line:column positions like the sequence parser.

namespace detail {

struct SysTok {
  std::string text;
  int col = 1;
};

inline std::vector<SysTok> sys_split(const std::string& line) {
  std::vector<SysTok> out;
  size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    out.push_back({line.substr(i, j - i), static_cast<int>(i) + 1});
    i = j;
  }
  return out;
}

inline double sys_number(const std::string& s, const std::string& file,
                         seq::SourcePos pos, const std::string& what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || p != last)
    throw seq::SeqError(file, pos, "invalid number for " + what + ": '" + s + "'");
  return v;
}

inline double sys_duration(const std::string& s, const std::string& file,
                           seq::SourcePos pos, const std::string& what) {
  size_t unit_at = s.size();
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    const bool numeric = (c >= '0' && c <= '9') || c == '+' || c == '-' ||
                         c == '.' || c == 'e' || c == 'E';
    if (!numeric) {
      unit_at = i;
      break;
    }
  }
  if (unit_at == s.size())
    throw seq::SeqError(file, pos, what + " needs a time unit (s, ms, us)");
  const std::string num = s.substr(0, unit_at);
  const std::string unit = s.substr(unit_at);
  const double v = sys_number(num, file, pos, what);
  if (unit == "s") return v;
  if (unit == "ms") return v * 1e-3;
  if (unit == "us") return v * 1e-6;
  throw seq::SeqError(file, pos,
                      "unknown unit '" + unit + "' for " + what + " (use s, ms, us)");
}

}  // namespace detail

inline SpinSystem parse_system_text(const std::string& text,
                                    const std::string& file = "<system>") {
  SpinSystem sys;
  bool have_j = false;
  seq::SourcePos j_pos{1, 1};

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const size_t hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    const auto toks = detail::sys_split(line);
    if (toks.empty()) continue;
    const seq::SourcePos line_pos{line_no, toks[0].col};

    if (toks[0].text == "spin") {
      if (toks.size() < 2)
        throw seq::SeqError(file, line_pos, "spin line needs a label");
      SpinSpecies spin;
      spin.label = toks[1].text;
      for (const auto& existing : sys.spins)
        if (existing.label == spin.label)
          throw seq::SeqError(file, {line_no, toks[1].col},
                              "duplicate spin label '" + spin.label + "'");
      bool have_gamma = false;
      for (size_t t = 2; t < toks.size(); ++t) {
        const seq::SourcePos pos{line_no, toks[t].col};
        const size_t eq = toks[t].text.find('=');
        if (eq == std::string::npos || eq == 0)
          throw seq::SeqError(file, pos,
                              "expected key=value, got '" + toks[t].text + "'");
        const std::string key = toks[t].text.substr(0, eq);
        const std::string value = toks[t].text.substr(eq + 1);
        if (key == "gamma") {
          spin.gamma = detail::sys_number(value, file, pos, "gamma");
          have_gamma = true;
        } else if (key == "offset") {
          spin.offset = detail::sys_number(value, file, pos, "offset");
        } else if (key == "t1") {
          spin.t1 = detail::sys_duration(value, file, pos, "t1");
        } else if (key == "t2") {
          spin.t2 = detail::sys_duration(value, file, pos, "t2");
        } else {
          throw seq::SeqError(file, pos, "unknown spin attribute '" + key + "'");
        }
      }
      if (!have_gamma)
        throw seq::SeqError(file, line_pos, "spin '" + spin.label + "' needs gamma=");
      sys.spins.push_back(spin);
    } else if (toks[0].text == "j") {
      if (have_j)
        throw seq::SeqError(file, line_pos,
                            "duplicate j line (first at line " +
                                std::to_string(j_pos.line) + ")");
      if (toks.size() != 2)
        throw seq::SeqError(file, line_pos, "j line needs exactly one value (Hz)");
      sys.j_hz = detail::sys_number(toks[1].text, file, {line_no, toks[1].col},
                                    "j coupling");
      have_j = true;
      j_pos = line_pos;
    } else {
      throw seq::SeqError(file, line_pos,
                          "unknown directive '" + toks[0].text +
                              "' (expected spin or j)");
    }
  }

  if (sys.spins.empty())
    throw seq::SeqError(file, {1, 1}, "system file defines no spins");
  if (have_j && sys.n_spins() != 2)
    throw seq::SeqError(file, j_pos, "j coupling requires exactly two spins");
  try {
    sys.validate();
  } catch (const seq::SeqError&) {
    throw;
  } catch (const std::exception& e) {
    throw seq::SeqError(file, {1, 1}, e.what());
  }
  return sys;
}

inline SpinSystem load_system_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw seq::SeqError(path, {1, 1}, "cannot open system file");
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_system_text(buf.str(), path);
}

}  // namespace zeno
