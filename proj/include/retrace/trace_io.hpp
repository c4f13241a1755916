#ifndef RETRACE_TRACE_IO_HPP
#define RETRACE_TRACE_IO_HPP

#include <map>
#include <string>
#include <string_view>

#include "retrace/lexer.hpp"
#include "retrace/result.hpp"
#include "retrace/trace.hpp"

namespace retrace {

/// Renders an event in the trace grammar, given name lookups for
/// compartments and for procedures of the callee.
template <class CompName, class ProcName>
std::string format_event_with(const Event& e, CompName&& comp, ProcName&& proc) {
  if (e.kind == EventKind::Call)
    return "call " + comp(e.src) + " -> " + comp(e.dst) + "." + proc(e.dst, e.proc) +
           " (" + std::to_string(e.payload) + ")";
  return "ret " + comp(e.src) + " -> " + comp(e.dst) + " (" + std::to_string(e.payload) + ")";
}

inline std::string format_event(const TraceSet& s, const Event& e) {
  return format_event_with(
      e, [&](CompartmentId c) { return s.names[c.value]; },
      [&](CompartmentId c, ProcedureId p) { return s.procedures[c.value][p.value]; });
}

/// Canonical text form of a trace set; parse_trace_set inverts it.
inline std::string format_trace_set(const TraceSet& s) {
  std::string out;
  for (std::uint32_t i = 0; i < s.names.size(); ++i) {
    out += "compartment " + s.names[i] + " ";
    out += s.roles[i] == Role::Context ? "context" : "program";
    out += " {";
    for (const std::string& p : s.procedures[i]) out += " " + p;
    out += s.procedures[i].empty() ? "}" : " }";
    out += "\n";
  }
  out += "main " + s.names[s.main.value] + "\n";
  for (const Trace& m : s.traces) {
    out += "\ntrace {\n";
    for (const Event& e : m) out += "  " + format_event(s, e) + "\n";
    out += "}\n";
  }
  return out;
}

namespace detail {

class TraceSetParser {
 public:
  explicit TraceSetParser(std::string_view text) : lex_(text, "#") {}

  Result<TraceSet, ParseError> run() {
    bool have_main = false;
    while (lex_.peek().kind != Token::Kind::End) {
      Token t = lex_.next();
      if (t.kind != Token::Kind::Ident)
        return fail(t, "expected 'compartment', 'main' or 'trace'");
      if (t.text == "compartment") {
        if (auto r = parse_compartment(); !r) return Result<TraceSet, ParseError>::err(r.error());
      } else if (t.text == "main") {
        if (have_main) return fail(t, "duplicate main declaration");
        Token name = lex_.next();
        if (name.kind != Token::Kind::Ident) return fail(name, "expected compartment name");
        auto it = comp_ids_.find(name.text);
        if (it == comp_ids_.end()) return fail(name, "undeclared compartment '" + name.text + "'");
        set_.main = it->second;
        have_main = true;
      } else if (t.text == "trace") {
        if (auto r = parse_trace(); !r) return Result<TraceSet, ParseError>::err(r.error());
      } else {
        return fail(t, "unknown directive '" + t.text + "'");
      }
    }
    if (!have_main) {
      Token t = lex_.peek();
      return fail(t, "missing main declaration");
    }
    return Result<TraceSet, ParseError>::ok(std::move(set_));
  }

 private:
  Result<TraceSet, ParseError> fail(const Token& t, std::string detail) {
    return Result<TraceSet, ParseError>::err(ParseError{t.line, t.col, std::move(detail)});
  }
  Result<void, ParseError> failv(const Token& t, std::string detail) {
    return Result<void, ParseError>::err(ParseError{t.line, t.col, std::move(detail)});
  }

  Result<void, ParseError> expect_punct(std::string_view p) {
    Token t = lex_.next();
    if (t.kind != Token::Kind::Punct || t.text != p)
      return failv(t, "expected '" + std::string(p) + "'");
    return Result<void, ParseError>::ok();
  }

  Result<void, ParseError> parse_compartment() {
    Token name = lex_.next();
    if (name.kind != Token::Kind::Ident) return failv(name, "expected compartment name");
    if (comp_ids_.count(name.text))
      return failv(name, "duplicate compartment '" + name.text + "'");
    Token role = lex_.next();
    if (role.kind != Token::Kind::Ident || (role.text != "context" && role.text != "program"))
      return failv(role, "expected role 'context' or 'program'");
    if (auto r = expect_punct("{"); !r) return r;
    std::vector<std::string> procs;
    while (true) {
      Token t = lex_.next();
      if (t.kind == Token::Kind::Punct && t.text == "}") break;
      if (t.kind != Token::Kind::Ident) return failv(t, "expected procedure name or '}'");
      if (t.text == "internal") return failv(t, "'internal' is a reserved procedure name");
      for (const std::string& p : procs)
        if (p == t.text) return failv(t, "duplicate procedure '" + t.text + "'");
      procs.push_back(t.text);
    }
    comp_ids_[name.text] = CompartmentId{static_cast<std::uint32_t>(set_.names.size())};
    set_.names.push_back(name.text);
    set_.roles.push_back(role.text == "context" ? Role::Context : Role::Program);
    set_.procedures.push_back(std::move(procs));
    return Result<void, ParseError>::ok();
  }

  Result<void, ParseError> parse_trace() {
    if (auto r = expect_punct("{"); !r) return r;
    Trace m;
    while (true) {
      Token t = lex_.next();
      if (t.kind == Token::Kind::Punct && t.text == "}") break;
      if (t.kind != Token::Kind::Ident || (t.text != "call" && t.text != "ret"))
        return failv(t, "expected 'call', 'ret' or '}'");
      bool is_call = t.text == "call";
      auto src = parse_comp_ref();
      if (!src) return Result<void, ParseError>::err(src.error());
      if (auto r = expect_punct("->"); !r) return r;
      auto dst = parse_comp_ref();
      if (!dst) return Result<void, ParseError>::err(dst.error());
      if (src.value() == dst.value())
        return failv(t, "event between identical compartments");
      ProcedureId proc{0};
      if (is_call) {
        if (auto r = expect_punct("."); !r) return r;
        Token pn = lex_.next();
        if (pn.kind != Token::Kind::Ident) return failv(pn, "expected procedure name");
        const auto& procs = set_.procedures[dst.value().value];
        bool found = false;
        for (std::uint32_t i = 0; i < procs.size(); ++i)
          if (procs[i] == pn.text) {
            proc = ProcedureId{i};
            found = true;
            break;
          }
        if (!found)
          return failv(pn, "undeclared procedure '" + pn.text + "' in compartment '" +
                               set_.names[dst.value().value] + "'");
      }
      if (auto r = expect_punct("("); !r) return r;
      Token num = lex_.next();
      if (num.kind != Token::Kind::Int) return failv(num, "expected integer payload");
      if (auto r = expect_punct(")"); !r) return r;
      m.push_back(is_call ? make_call(src.value(), dst.value(), proc, num.number)
                          : make_return(src.value(), dst.value(), num.number));
    }
    set_.traces.push_back(std::move(m));
    return Result<void, ParseError>::ok();
  }

  Result<CompartmentId, ParseError> parse_comp_ref() {
    Token t = lex_.next();
    if (t.kind != Token::Kind::Ident)
      return Result<CompartmentId, ParseError>::err(
          ParseError{t.line, t.col, "expected compartment name"});
    auto it = comp_ids_.find(t.text);
    if (it == comp_ids_.end())
      return Result<CompartmentId, ParseError>::err(
          ParseError{t.line, t.col, "undeclared compartment '" + t.text + "'"});
    return Result<CompartmentId, ParseError>::ok(it->second);
  }

  Lexer lex_;
  TraceSet set_;
  std::map<std::string, CompartmentId> comp_ids_;
};

}  // namespace detail

/// Reads a trace-set file. Compartments must be declared before use; the
/// parser rejects undeclared compartment and procedure names outright.
inline Result<TraceSet, ParseError> parse_trace_set(std::string_view text) {
  return detail::TraceSetParser(text).run();
}

}  // namespace retrace

#endif  // RETRACE_TRACE_IO_HPP
