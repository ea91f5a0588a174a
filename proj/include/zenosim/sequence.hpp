#pragma once

#include <charconv>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "spin_system.hpp"

namespace zeno::seq {

struct SourcePos {
  int line = 1;
  int col = 1;
};

class SeqError : public std::runtime_error {
 public:
  SeqError(const std::string& file, SourcePos pos, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(pos.line) + ":" +
                           std::to_string(pos.col) + ": " + msg),
        pos_(pos),
        message_(msg) {}
  SourcePos pos() const { return pos_; }
  const std::string& message() const { return message_; }

 private:
  SourcePos pos_;
  std::string message_;
};

struct PulseStmt {
  std::string spin;
  double flip = 0.0;   // rad
  double phase = 0.0;  // rad
  SourcePos pos;
};

struct DelayStmt {
  double duration = 0.0;  // s
  std::optional<double> gradient;  // T/m
  SourcePos pos;
};

struct CrushStmt {
  std::optional<std::string> spin;  // empty = all
  SourcePos pos;
};

struct AcquireStmt {
  std::string spin;
  Axis op = Axis::z;
  SourcePos pos;
};

struct LoopStmt;

using Stmt = std::variant<PulseStmt, DelayStmt, CrushStmt, AcquireStmt, LoopStmt>;

struct LoopStmt {
  long count = 0;
  std::vector<Stmt> body;
  SourcePos pos;
};

struct Sequence {
  std::vector<Stmt> stmts;
};

inline constexpr int max_loop_depth = 16;

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace detail {

struct Token {
  enum class Kind { ident, number, eq, lbrace, rbrace };
  Kind kind = Kind::ident;
  std::string text;
  double value = 0.0;
  std::string unit;  // letters attached to a number, e.g. "ms"
  SourcePos pos;
};

inline bool ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool ident_char(char c) {
  return ident_start(c) || (c >= '0' && c <= '9');
}
inline bool digit(char c) { return c >= '0' && c <= '9'; }

inline std::vector<Token> tokenize_line(const std::string& file,
                                        const std::string& line, int lineno) {
  std::vector<Token> out;
  size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') break;
    const SourcePos pos{lineno, static_cast<int>(i) + 1};
    if (c == '=') {
      out.push_back({Token::Kind::eq, "=", 0, "", pos});
      ++i;
      continue;
    }
    if (c == '{') {
      out.push_back({Token::Kind::lbrace, "{", 0, "", pos});
      ++i;
      continue;
    }
    if (c == '}') {
      out.push_back({Token::Kind::rbrace, "}", 0, "", pos});
      ++i;
      continue;
    }
    const bool neg_ident = c == '-' && i + 1 < line.size() && ident_start(line[i + 1]);
    if (ident_start(c) || neg_ident) {
      size_t j = i + (neg_ident ? 1 : 0);
      while (j < line.size() && ident_char(line[j])) ++j;
      out.push_back({Token::Kind::ident, line.substr(i, j - i), 0, "", pos});
      i = j;
      continue;
    }
    if (digit(c) || c == '.' || ((c == '-' || c == '+') && i + 1 < line.size() &&
                                 (digit(line[i + 1]) || line[i + 1] == '.'))) {
      size_t j = i;
      if (line[j] == '-' || line[j] == '+') ++j;
      while (j < line.size() && (digit(line[j]) || line[j] == '.')) ++j;
      if (j < line.size() && (line[j] == 'e' || line[j] == 'E')) {
        size_t k = j + 1;
        if (k < line.size() && (line[k] == '-' || line[k] == '+')) ++k;
        if (k < line.size() && digit(line[k])) {
          j = k;
          while (j < line.size() && digit(line[j])) ++j;
        }
      }
      const std::string numtext = line.substr(i, j - i);
      double value = 0.0;
      const auto res =
          std::from_chars(numtext.data(), numtext.data() + numtext.size(), value);
      if (res.ec != std::errc() || res.ptr != numtext.data() + numtext.size())
        throw SeqError(file, pos, "invalid number '" + numtext + "'");
      size_t u = j;
      while (u < line.size() && ident_char(line[u])) ++u;
      Token t{Token::Kind::number, numtext, value, line.substr(j, u - j), pos};
      out.push_back(t);
      i = u;
      continue;
    }
    throw SeqError(file, pos, std::string("unexpected character '") + c + "'");
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
 public:
  Parser(std::string text, std::string file)
      : text_(std::move(text)), file_(std::move(file)) {}

  Sequence parse() {
    Sequence seq;
    std::vector<std::vector<Stmt>*> stack{&seq.stmts};
    std::vector<SourcePos> loop_pos;
    int lineno = 0;
    size_t start = 0;
    int acquires_seen = 0;
    while (start <= text_.size()) {
      size_t end = text_.find('\n', start);
      if (end == std::string::npos) end = text_.size();
      const std::string line = text_.substr(start, end - start);
      ++lineno;
      start = end + 1;
      auto toks = tokenize_line(file_, line, lineno);
      if (toks.empty()) {
        if (end == text_.size()) break;
        continue;
      }
      if (toks[0].kind == Token::Kind::rbrace) {
        if (toks.size() > 1)
          throw SeqError(file_, toks[1].pos, "unexpected token after '}'");
        if (stack.size() == 1)
          throw SeqError(file_, toks[0].pos, "unmatched '}'");
        stack.pop_back();
        loop_pos.pop_back();
        if (end == text_.size()) break;
        continue;
      }
      if (toks[0].kind != Token::Kind::ident)
        throw SeqError(file_, toks[0].pos,
                       "expected a statement (pulse, delay, crush, acquire, loop)");
      const std::string& kw = toks[0].text;
      if (kw == "pulse") {
        stack.back()->push_back(parse_pulse(toks));
      } else if (kw == "delay") {
        stack.back()->push_back(parse_delay(toks));
      } else if (kw == "crush") {
        stack.back()->push_back(parse_crush(toks));
      } else if (kw == "acquire") {
        if (++acquires_seen > 1)
          throw SeqError(file_, toks[0].pos, "duplicate acquire");
        stack.back()->push_back(parse_acquire(toks));
      } else if (kw == "loop") {
        if (static_cast<int>(stack.size()) > max_loop_depth)
          throw SeqError(file_, toks[0].pos, "loop nesting deeper than 16");
        LoopStmt loop = parse_loop_header(toks);
        stack.back()->push_back(loop);
        auto& stored = std::get<LoopStmt>(stack.back()->back());
        stack.push_back(&stored.body);
        loop_pos.push_back(loop.pos);
      } else {
        throw SeqError(file_, toks[0].pos,
                       "unknown statement '" + kw +
                           "' (expected pulse, delay, crush, acquire, or loop)");
      }
      if (end == text_.size()) break;
    }
    if (stack.size() > 1)
      throw SeqError(file_, loop_pos.back(), "unclosed loop (missing '}')");
    return seq;
  }

 private:
  std::string text_;
  std::string file_;

  [[noreturn]] void fail(SourcePos pos, const std::string& msg) const {
    throw SeqError(file_, pos, msg);
  }

  const Token& need(const std::vector<Token>& t, size_t i,
                    const std::string& what) const {
    if (i >= t.size()) {
      SourcePos pos = t.back().pos;
      pos.col += static_cast<int>(t.back().text.size());
      fail(pos, "expected " + what);
    }
    return t[i];
  }

  std::string expect_label(const std::vector<Token>& t, size_t i,
                           const std::string& what) const {
    const Token& tok = need(t, i, what);
    if (tok.kind != Token::Kind::ident)
      fail(tok.pos, "expected " + what + ", got '" + tok.text + "'");
    return tok.text;
  }

  void expect_key(const std::vector<Token>& t, size_t i,
                  const std::string& key) const {
    const Token& tok = need(t, i, key + "=<value>");
    if (tok.kind != Token::Kind::ident || tok.text != key)
      fail(tok.pos, "expected '" + key + "', got '" + tok.text + "'");
    const Token& eq = need(t, i + 1, "'=' after '" + key + "'");
    if (eq.kind != Token::Kind::eq)
      fail(eq.pos, "expected '=' after '" + key + "', got '" + eq.text + "'");
  }

  void no_trailing(const std::vector<Token>& t, size_t i) const {
    if (i < t.size()) fail(t[i].pos, "unexpected token '" + t[i].text + "'");
  }

  // number-with-unit helpers ------------------------------------------------

  double take_angle(const std::vector<Token>& t, size_t& i,
                    const std::string& what) const {
    const Token& tok = need(t, i, what);
    if (tok.kind != Token::Kind::number)
      fail(tok.pos, "expected " + what + ", got '" + tok.text + "'");
    ++i;
    std::string unit = tok.unit;
    SourcePos upos = tok.pos;
    if (unit.empty() && i < t.size() && t[i].kind == Token::Kind::ident) {
      unit = t[i].text;
      upos = t[i].pos;
      ++i;
    }
    if (unit.empty())
      fail(tok.pos, "missing unit on angle (expected deg or rad)");
    if (unit == "deg") return deg2rad(tok.value);
    if (unit == "rad") return tok.value;
    fail(upos, "unknown unit '" + unit + "' (expected deg or rad)");
  }

  double take_duration(const std::vector<Token>& t, size_t& i) const {
    const Token& tok = need(t, i, "duration with unit (s, ms, us)");
    if (tok.kind != Token::Kind::number)
      fail(tok.pos, "expected a duration, got '" + tok.text + "'");
    ++i;
    std::string unit = tok.unit;
    SourcePos upos = tok.pos;
    if (unit.empty() && i < t.size() && t[i].kind == Token::Kind::ident) {
      unit = t[i].text;
      upos = t[i].pos;
      ++i;
    }
    if (unit.empty())
      fail(tok.pos, "missing unit on duration (expected s, ms, or us)");
    double scale = 0.0;
    if (unit == "s")
      scale = 1.0;
    else if (unit == "ms")
      scale = 1e-3;
    else if (unit == "us")
      scale = 1e-6;
    else
      fail(upos, "unknown unit '" + unit + "' (expected s, ms, or us)");
    if (tok.value < 0) fail(tok.pos, "duration must be non-negative");
    return tok.value * scale;
  }

  double take_phase(const std::vector<Token>& t, size_t& i) const {
    const Token& tok = need(t, i, "phase (x, y, -x, -y, or an angle)");
    if (tok.kind == Token::Kind::ident) {
      ++i;
      if (tok.text == "x") return 0.0;
      if (tok.text == "y") return pi / 2;
      if (tok.text == "-x") return pi;
      if (tok.text == "-y") return -pi / 2;
      fail(tok.pos, "invalid phase '" + tok.text +
                        "' (expected x, y, -x, -y, or an angle)");
    }
    return take_angle(t, i, "phase angle");
  }

  // statements ---------------------------------------------------------------

  PulseStmt parse_pulse(const std::vector<Token>& t) const {
    PulseStmt p;
    p.pos = t[0].pos;
    size_t i = 1;
    p.spin = expect_label(t, i++, "a spin label");
    expect_key(t, i, "flip");
    i += 2;
    p.flip = take_angle(t, i, "flip angle");
    expect_key(t, i, "phase");
    i += 2;
    p.phase = take_phase(t, i);
    no_trailing(t, i);
    return p;
  }

  DelayStmt parse_delay(const std::vector<Token>& t) const {
    DelayStmt d;
    d.pos = t[0].pos;
    size_t i = 1;
    d.duration = take_duration(t, i);
    if (i < t.size()) {
      expect_key(t, i, "gradient");
      i += 2;
      const Token& tok = need(t, i, "gradient strength (T/m)");
      if (tok.kind != Token::Kind::number || !tok.unit.empty())
        fail(tok.pos, "expected a plain number for gradient (T/m), got '" +
                          tok.text + tok.unit + "'");
      d.gradient = tok.value;
      ++i;
    }
    no_trailing(t, i);
    return d;
  }

  CrushStmt parse_crush(const std::vector<Token>& t) const {
    CrushStmt c;
    c.pos = t[0].pos;
    size_t i = 1;
    if (i < t.size()) {
      const std::string label = expect_label(t, i++, "a spin label or 'all'");
      if (label != "all") c.spin = label;
    }
    no_trailing(t, i);
    return c;
  }

  AcquireStmt parse_acquire(const std::vector<Token>& t) const {
    AcquireStmt a;
    a.pos = t[0].pos;
    size_t i = 1;
    a.spin = expect_label(t, i++, "a spin label");
    if (i < t.size()) {
      expect_key(t, i, "op");
      i += 2;
      const Token& tok = need(t, i, "op axis (x, y, or z)");
      if (tok.kind != Token::Kind::ident ||
          (tok.text != "x" && tok.text != "y" && tok.text != "z"))
        fail(tok.pos, "invalid op '" + tok.text + "' (expected x, y, or z)");
      a.op = tok.text == "x" ? Axis::x : tok.text == "y" ? Axis::y : Axis::z;
      ++i;
    }
    no_trailing(t, i);
    return a;
  }

  LoopStmt parse_loop_header(const std::vector<Token>& t) const {
    LoopStmt l;
    l.pos = t[0].pos;
    size_t i = 1;
    const Token& count = need(t, i, "a non-negative loop count");
    if (count.kind != Token::Kind::number || !count.unit.empty() ||
        count.value < 0 || count.value != static_cast<long>(count.value) ||
        count.text.find('.') != std::string::npos)
      fail(count.pos, "expected a non-negative integer loop count, got '" +
                          count.text + count.unit + "'");
    l.count = static_cast<long>(count.value);
    ++i;
    const Token& brace = need(t, i, "'{' after loop count");
    if (brace.kind != Token::Kind::lbrace)
      fail(brace.pos, "expected '{' after loop count, got '" + brace.text + "'");
    ++i;
    no_trailing(t, i);
    return l;
  }
};

}  // namespace detail

inline Sequence parse(const std::string& text, const std::string& file = "<seq>") {
  return detail::Parser(text, file).parse();
}

// ---------------------------------------------------------------------------
// Canonical printer: values are preserved exactly (round-trippable doubles),
// angles in rad, durations in s, phases named when they are exact axes.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string phase_text(double phase) {
  if (phase == 0.0) return "x";
  if (phase == pi / 2) return "y";
  if (phase == pi) return "-x";
  if (phase == -pi / 2) return "-y";
  return fmt_g(phase) + "rad";
}

inline void print_stmts(const std::vector<Stmt>& stmts, int indent,
                        std::string& out) {
  const std::string pad(2 * indent, ' ');
  for (const auto& st : stmts) {
    if (const auto* p = std::get_if<PulseStmt>(&st)) {
      out += pad + "pulse " + p->spin + " flip=" + fmt_g(p->flip) +
             "rad phase=" + phase_text(p->phase) + "\n";
    } else if (const auto* d = std::get_if<DelayStmt>(&st)) {
      out += pad + "delay " + fmt_g(d->duration) + "s";
      if (d->gradient) out += " gradient=" + fmt_g(*d->gradient);
      out += "\n";
    } else if (const auto* c = std::get_if<CrushStmt>(&st)) {
      out += pad + "crush " + (c->spin ? *c->spin : std::string("all")) + "\n";
    } else if (const auto* a = std::get_if<AcquireStmt>(&st)) {
      out += pad + "acquire " + a->spin + " op=";
      out += a->op == Axis::x ? 'x' : a->op == Axis::y ? 'y' : 'z';
      out += "\n";
    } else if (const auto* l = std::get_if<LoopStmt>(&st)) {
      out += pad + "loop " + std::to_string(l->count) + " {\n";
      print_stmts(l->body, indent + 1, out);
      out += pad + "}\n";
    }
  }
}

}  // namespace detail

inline std::string print(const Sequence& s) {
  std::string out;
  detail::print_stmts(s.stmts, 0, out);
  return out;
}

inline bool ast_equal(const Stmt& a, const Stmt& b);

inline bool ast_equal(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (!ast_equal(a[i], b[i])) return false;
  return true;
}

inline bool ast_equal(const Stmt& a, const Stmt& b) {
  if (a.index() != b.index()) return false;
  if (const auto* p = std::get_if<PulseStmt>(&a)) {
    const auto& q = std::get<PulseStmt>(b);
    return p->spin == q.spin && p->flip == q.flip && p->phase == q.phase;
  }
  if (const auto* d = std::get_if<DelayStmt>(&a)) {
    const auto& e = std::get<DelayStmt>(b);
    return d->duration == e.duration && d->gradient == e.gradient;
  }
  if (const auto* c = std::get_if<CrushStmt>(&a)) {
    return c->spin == std::get<CrushStmt>(b).spin;
  }
  if (const auto* q = std::get_if<AcquireStmt>(&a)) {
    const auto& r = std::get<AcquireStmt>(b);
    return q->spin == r.spin && q->op == r.op;
  }
  const auto& l = std::get<LoopStmt>(a);
  const auto& m = std::get<LoopStmt>(b);
  return l.count == m.count && ast_equal(l.body, m.body);
}

inline bool ast_equal(const Sequence& a, const Sequence& b) {
  return ast_equal(a.stmts, b.stmts);
}

// ---------------------------------------------------------------------------
// Compiler: unrolls loops into a flat event list and validates against a
// spin system.
// ---------------------------------------------------------------------------

struct Event {
  enum class Kind { pulse, delay, crush, acquire };
  Kind kind = Kind::pulse;
  int spin = -1;  // crush: -1 means all spins
  double flip = 0.0;
  double phase = 0.0;
  double duration = 0.0;
  std::optional<double> gradient;
  Axis op = Axis::z;
  SourcePos pos;
};

struct EventTimeline {
  std::vector<Event> events;
  double total_duration = 0.0;
};

namespace detail {

inline constexpr size_t max_events = 10'000'000;

inline int resolve_spin(const SpinSystem& sys, const std::string& label,
                        const std::string& file, SourcePos pos) {
  const int idx = sys.index_of(label);
  if (idx < 0) throw SeqError(file, pos, "unknown spin label '" + label + "'");
  return idx;
}

inline void compile_stmts(const std::vector<Stmt>& stmts, const SpinSystem& sys,
                          const std::string& file, EventTimeline& tl) {
  for (const auto& st : stmts) {
    if (tl.events.size() > max_events)
      throw SeqError(file, SourcePos{1, 1}, "sequence expands to too many events");
    if (const auto* p = std::get_if<PulseStmt>(&st)) {
      Event e;
      e.kind = Event::Kind::pulse;
      e.spin = resolve_spin(sys, p->spin, file, p->pos);
      e.flip = p->flip;
      e.phase = p->phase;
      e.pos = p->pos;
      tl.events.push_back(e);
    } else if (const auto* d = std::get_if<DelayStmt>(&st)) {
      Event e;
      e.kind = Event::Kind::delay;
      e.duration = d->duration;
      e.gradient = d->gradient;
      e.pos = d->pos;
      tl.total_duration += d->duration;
      tl.events.push_back(e);
    } else if (const auto* c = std::get_if<CrushStmt>(&st)) {
      Event e;
      e.kind = Event::Kind::crush;
      e.spin = c->spin ? resolve_spin(sys, *c->spin, file, c->pos) : -1;
      e.pos = c->pos;
      tl.events.push_back(e);
    } else if (const auto* a = std::get_if<AcquireStmt>(&st)) {
      Event e;
      e.kind = Event::Kind::acquire;
      e.spin = resolve_spin(sys, a->spin, file, a->pos);
      e.op = a->op;
      e.pos = a->pos;
      tl.events.push_back(e);
    } else {
      const auto& l = std::get<LoopStmt>(st);
      for (long k = 0; k < l.count; ++k) compile_stmts(l.body, sys, file, tl);
    }
  }
}

}  // namespace detail

inline EventTimeline compile(const Sequence& s, const SpinSystem& sys,
                             const std::string& file = "<seq>") {
  sys.validate();
  EventTimeline tl;
  detail::compile_stmts(s.stmts, sys, file, tl);
  int acquires = 0;
  SourcePos second{1, 1};
  for (const auto& e : tl.events)
    if (e.kind == Event::Kind::acquire && ++acquires == 2) second = e.pos;
  if (acquires == 0)
    throw SeqError(file, SourcePos{1, 1}, "sequence must contain an acquire");
  if (acquires > 1) throw SeqError(file, second, "duplicate acquire");
  if (tl.events.back().kind != Event::Kind::acquire)
    throw SeqError(file, tl.events.back().pos,
                   "acquire must be the last event of the sequence");
  return tl;
}

// ---------------------------------------------------------------------------
// Stroboscopic advisory check. For each inter-pulse window (merged run of
// delays between pulses), verifies that window*J and window*line-frequency are
// integers within 1e-9 relative, where the line frequencies of spin i are
// (offset_i +- pi*J)/2pi (just offset_i/2pi for one spin). Integer windows are
// exactly the free evolutions that reduce to the identity up to global phase.
// ---------------------------------------------------------------------------

struct StroboWindow {
  double duration = 0.0;
  bool j_ok = true;
  bool offsets_ok = true;
  SourcePos pos;
};

struct StroboReport {
  std::vector<StroboWindow> windows;
  bool all_ok = true;
};

namespace detail {

inline bool near_integer(double x) {
  return std::abs(x - std::round(x)) <= 1e-9 * std::max(1.0, std::abs(x));
}

}  // namespace detail

inline StroboReport check_stroboscopic(const EventTimeline& tl,
                                       const SpinSystem& sys) {
  StroboReport rep;
  const double j = sys.n_spins() == 2 ? *sys.j_hz : 0.0;
  StroboWindow cur;
  bool open = false;
  auto close = [&] {
    if (!open || cur.duration == 0.0) {
      open = false;
      return;
    }
    cur.j_ok = j == 0.0 || detail::near_integer(cur.duration * j);
    cur.offsets_ok = true;
    for (const auto& sp : sys.spins) {
      if (sys.n_spins() == 2) {
        for (const double line : {sp.offset + pi * j, sp.offset - pi * j})
          if (!detail::near_integer(cur.duration * line / (2 * pi)))
            cur.offsets_ok = false;
      } else if (!detail::near_integer(cur.duration * sp.offset / (2 * pi))) {
        cur.offsets_ok = false;
      }
    }
    if (!cur.j_ok || !cur.offsets_ok) rep.all_ok = false;
    rep.windows.push_back(cur);
    open = false;
  };
  for (const auto& e : tl.events) {
    if (e.kind == Event::Kind::delay) {
      if (!open) {
        cur = StroboWindow{};
        cur.pos = e.pos;
        open = true;
      }
      cur.duration += e.duration;
    } else if (e.kind == Event::Kind::pulse) {
      close();
    }
  }
  close();
  return rep;
}

}  // namespace zeno::seq
