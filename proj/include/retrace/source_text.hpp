#ifndef RETRACE_SOURCE_TEXT_HPP
#define RETRACE_SOURCE_TEXT_HPP

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "retrace/lexer.hpp"
#include "retrace/source_lang.hpp"
#include "retrace/trace_io.hpp"

namespace retrace {

namespace detail {

// 2: atoms, 1: '=', 0: '&&'. '=' binds tighter than '&&'.
inline int expr_precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::IntConst:
    case Expr::Kind::ReadVar:
    case Expr::Kind::ReadArg: return 2;
    case Expr::Kind::Eq: return 1;
    case Expr::Kind::And: return 0;
  }
  return 2;
}

inline std::string slot_name(Slot s) {
  switch (s) {
    case Slot::Loc: return "loc";
    case Slot::IsCall: return "is_call";
    case Slot::Res: return "res";
  }
  return "";
}

inline std::string pretty_expr(const ExprPtr& e, int min_prec) {
  std::string out;
  switch (e->kind) {
    case Expr::Kind::IntConst: out = std::to_string(e->value); break;
    case Expr::Kind::ReadVar: out = slot_name(e->slot); break;
    case Expr::Kind::ReadArg: out = "arg"; break;
    case Expr::Kind::Eq:
      out = pretty_expr(e->lhs, 2) + " = " + pretty_expr(e->rhs, 2);
      break;
    case Expr::Kind::And:
      // right-associative: the right operand may chain without parens
      out = pretty_expr(e->lhs, 1) + " && " + pretty_expr(e->rhs, 0);
      break;
  }
  if (expr_precedence(*e) < min_prec) return "(" + out + ")";
  return out;
}

inline void pretty_stmt(const StmtPtr& s, const SourceProgram* names, int indent,
                        std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  switch (s->kind) {
    case Stmt::Kind::Skip: out += pad + "skip;\n"; break;
    case Stmt::Kind::Assign:
      out += pad + slot_name(s->slot) + " = " + pretty_expr(s->expr, 0) + ";\n";
      break;
    case Stmt::Kind::Seq:
      pretty_stmt(s->a, names, indent, out);
      pretty_stmt(s->b, names, indent, out);
      break;
    case Stmt::Kind::If:
      out += pad + "if (" + pretty_expr(s->expr, 0) + ") {\n";
      pretty_stmt(s->a, names, indent + 2, out);
      out += pad + "} else {\n";
      pretty_stmt(s->b, names, indent + 2, out);
      out += pad + "}\n";
      break;
    case Stmt::Kind::CallStore: {
      const SourceCompartment& callee = names->compartments.at(s->callee);
      out += pad + "res = call " + callee.name + "." + callee.procedures.at(s->proc).name +
             "(" + pretty_expr(s->expr, 0) + ");\n";
      break;
    }
    case Stmt::Kind::Return:
      out += pad + "return " + pretty_expr(s->expr, 0) + ";\n";
      break;
    case Stmt::Kind::Exit: out += pad + "exit;\n"; break;
  }
}

}  // namespace detail

inline std::string pretty_expr(const ExprPtr& e) { return detail::pretty_expr(e, 0); }

/// Statement text at the given indent; call targets are named via `p`.
inline std::string pretty_stmt(const StmtPtr& s, const SourceProgram& p, int indent = 0) {
  std::string out;
  detail::pretty_stmt(s, &p, indent, out);
  return out;
}

/// Compartment blocks only, without the main directive (fragment form).
/// `namer` resolves the names of call targets, which may live outside the
/// printed fragment.
inline std::string pretty_compartments(
    const std::map<CompartmentId, SourceCompartment>& compartments,
    const SourceProgram& namer) {
  std::string out;
  for (const auto& [cid, comp] : compartments) {
    out += "comp " + comp.name + " {\n";
    for (const auto& [pid, proc] : comp.procedures) {
      out += "  proc " + proc.name + "(arg) {\n";
      detail::pretty_stmt(proc.body, &namer, 4, out);
      out += "  }\n";
    }
    out += "}\n";
  }
  return out;
}

/// Whole-program text; parse_source_program inverts it.
inline std::string pretty(const SourceProgram& p) {
  std::string out = pretty_compartments(p.compartments, p);
  out += "main " + p.compartments.at(p.main_compartment).name + "." +
         p.compartments.at(p.main_compartment).procedures.at(p.main_procedure).name + "\n";
  return out;
}

inline std::string format_event(const SourceProgram& p, const Event& e) {
  return format_event_with(
      e, [&](CompartmentId c) { return p.compartments.at(c).name; },
      [&](CompartmentId c, ProcedureId q) {
        return p.compartments.at(c).procedures.at(q).name;
      });
}

namespace detail {

class SourceParser {
 public:
  explicit SourceParser(std::string_view text) {
    Lexer lex(text, "//");
    while (true) {
      Token t = lex.next();
      tokens_.push_back(t);
      if (t.kind == Token::Kind::End) break;
    }
  }

  Result<SourceProgram, ParseError> run() {
    if (auto r = collect_declarations(); !r)
      return Result<SourceProgram, ParseError>::err(r.error());
    bool have_main = false;
    while (peek().kind != Token::Kind::End) {
      Token t = next();
      if (t.kind != Token::Kind::Ident) return fail(t, "expected 'comp' or 'main'");
      if (t.text == "comp") {
        if (auto r = parse_compartment(); !r)
          return Result<SourceProgram, ParseError>::err(r.error());
      } else if (t.text == "main") {
        if (have_main) return fail(t, "duplicate main declaration");
        auto c = expect_comp_ref();
        if (!c) return Result<SourceProgram, ParseError>::err(c.error());
        if (auto r = expect_punct("."); !r)
          return Result<SourceProgram, ParseError>::err(r.error());
        Token pn = next();
        auto pr = resolve_proc(c.value(), pn);
        if (!pr) return Result<SourceProgram, ParseError>::err(pr.error());
        prog_.main_compartment = c.value();
        prog_.main_procedure = pr.value();
        have_main = true;
      } else {
        return fail(t, "expected 'comp' or 'main'");
      }
    }
    if (!have_main) return fail(peek(), "missing main declaration");
    return Result<SourceProgram, ParseError>::ok(std::move(prog_));
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }
  Token next() { return tokens_[pos_ == tokens_.size() - 1 ? pos_ : pos_++]; }

  Result<SourceProgram, ParseError> fail(const Token& t, std::string detail) {
    return Result<SourceProgram, ParseError>::err(ParseError{t.line, t.col, std::move(detail)});
  }
  Result<void, ParseError> failv(const Token& t, std::string detail) {
    return Result<void, ParseError>::err(ParseError{t.line, t.col, std::move(detail)});
  }

  Result<void, ParseError> expect_punct(std::string_view p) {
    Token t = next();
    if (t.kind != Token::Kind::Punct || t.text != p)
      return failv(t, "expected '" + std::string(p) + "'");
    return Result<void, ParseError>::ok();
  }

  Result<void, ParseError> expect_ident(std::string_view word) {
    Token t = next();
    if (t.kind != Token::Kind::Ident || t.text != word)
      return failv(t, "expected '" + std::string(word) + "'");
    return Result<void, ParseError>::ok();
  }

  // First pass: walk the token list at brace-depth granularity and register
  // every compartment and procedure name, so call targets can be resolved in
  // any order during the real parse.
  Result<void, ParseError> collect_declarations() {
    int depth = 0;
    std::uint32_t current_comp = 0;
    for (std::size_t i = 0; i + 1 < tokens_.size(); ++i) {
      const Token& t = tokens_[i];
      if (t.kind == Token::Kind::Punct) {
        if (t.text == "{") ++depth;
        if (t.text == "}") --depth;
        continue;
      }
      if (t.kind != Token::Kind::Ident) continue;
      if (depth == 0 && t.text == "comp") {
        const Token& name = tokens_[i + 1];
        if (name.kind != Token::Kind::Ident) return failv(name, "expected compartment name");
        if (comp_ids_.count(name.text))
          return failv(name, "duplicate compartment '" + name.text + "'");
        current_comp = static_cast<std::uint32_t>(comp_names_.size());
        comp_ids_[name.text] = CompartmentId{current_comp};
        comp_names_.push_back(name.text);
        proc_names_.emplace_back();
        proc_ids_.emplace_back();
        ++i;
      } else if (depth == 1 && t.text == "proc") {
        const Token& name = tokens_[i + 1];
        if (name.kind != Token::Kind::Ident) return failv(name, "expected procedure name");
        if (proc_names_.empty()) return failv(t, "procedure outside a compartment");
        auto& ids = proc_ids_.back();
        if (ids.count(name.text))
          return failv(name, "duplicate procedure '" + name.text + "'");
        ids[name.text] = ProcedureId{static_cast<std::uint32_t>(proc_names_.back().size())};
        proc_names_.back().push_back(name.text);
        ++i;
      }
    }
    return Result<void, ParseError>::ok();
  }

  Result<CompartmentId, ParseError> expect_comp_ref() {
    Token t = next();
    if (t.kind != Token::Kind::Ident)
      return Result<CompartmentId, ParseError>::err(
          ParseError{t.line, t.col, "expected compartment name"});
    auto it = comp_ids_.find(t.text);
    if (it == comp_ids_.end())
      return Result<CompartmentId, ParseError>::err(
          ParseError{t.line, t.col, "undeclared compartment '" + t.text + "'"});
    return Result<CompartmentId, ParseError>::ok(it->second);
  }

  Result<ProcedureId, ParseError> resolve_proc(CompartmentId c, const Token& t) {
    if (t.kind != Token::Kind::Ident)
      return Result<ProcedureId, ParseError>::err(
          ParseError{t.line, t.col, "expected procedure name"});
    const auto& ids = proc_ids_[c.value];
    auto it = ids.find(t.text);
    if (it == ids.end())
      return Result<ProcedureId, ParseError>::err(
          ParseError{t.line, t.col, "undeclared procedure '" + t.text + "' in compartment '" +
                                        comp_names_[c.value] + "'"});
    return Result<ProcedureId, ParseError>::ok(it->second);
  }

  Result<void, ParseError> parse_compartment() {
    Token name = next();
    // registered during collect_declarations
    CompartmentId cid = comp_ids_.at(name.text);
    if (auto r = expect_punct("{"); !r) return r;
    SourceCompartment comp;
    comp.name = name.text;
    while (true) {
      Token t = next();
      if (t.kind == Token::Kind::Punct && t.text == "}") break;
      if (t.kind != Token::Kind::Ident || t.text != "proc")
        return failv(t, "expected 'proc' or '}'");
      Token pn = next();
      ProcedureId pid = proc_ids_[cid.value].at(pn.text);
      if (auto r = expect_punct("("); !r) return r;
      if (auto r = expect_ident("arg"); !r) return r;
      if (auto r = expect_punct(")"); !r) return r;
      auto body = parse_block();
      if (!body) return Result<void, ParseError>::err(body.error());
      comp.procedures[pid] = Procedure{pn.text, std::move(body).value()};
    }
    prog_.compartments[cid] = std::move(comp);
    return Result<void, ParseError>::ok();
  }

  Result<StmtPtr, ParseError> parse_block() {
    if (auto r = expect_punct("{"); !r)
      return Result<StmtPtr, ParseError>::err(r.error());
    std::vector<StmtPtr> stmts;
    while (!(peek().kind == Token::Kind::Punct && peek().text == "}")) {
      if (peek().kind == Token::Kind::End)
        return Result<StmtPtr, ParseError>::err(
            ParseError{peek().line, peek().col, "unterminated block"});
      auto s = parse_stmt();
      if (!s) return s;
      stmts.push_back(std::move(s).value());
    }
    next();  // consume '}'
    return Result<StmtPtr, ParseError>::ok(seq_of(std::move(stmts)));
  }

  Result<StmtPtr, ParseError> parse_stmt() {
    using R = Result<StmtPtr, ParseError>;
    Token t = next();
    if (t.kind != Token::Kind::Ident) return R::err(ParseError{t.line, t.col, "expected statement"});
    if (t.text == "skip") {
      if (auto r = expect_punct(";"); !r) return R::err(r.error());
      return R::ok(skip_stmt());
    }
    if (t.text == "exit") {
      if (auto r = expect_punct(";"); !r) return R::err(r.error());
      return R::ok(exit_stmt());
    }
    if (t.text == "return") {
      auto e = parse_expr();
      if (!e) return R::err(e.error());
      if (auto r = expect_punct(";"); !r) return R::err(r.error());
      return R::ok(return_stmt(std::move(e).value()));
    }
    if (t.text == "if") {
      if (auto r = expect_punct("("); !r) return R::err(r.error());
      auto cond = parse_expr();
      if (!cond) return R::err(cond.error());
      if (auto r = expect_punct(")"); !r) return R::err(r.error());
      auto then_branch = parse_block();
      if (!then_branch) return then_branch;
      StmtPtr else_branch = skip_stmt();
      if (peek().kind == Token::Kind::Ident && peek().text == "else") {
        next();
        auto e = parse_block();
        if (!e) return e;
        else_branch = std::move(e).value();
      }
      return R::ok(if_stmt(std::move(cond).value(), std::move(then_branch).value(),
                           std::move(else_branch)));
    }
    Slot slot;
    if (t.text == "loc") slot = Slot::Loc;
    else if (t.text == "is_call") slot = Slot::IsCall;
    else if (t.text == "res") slot = Slot::Res;
    else return R::err(ParseError{t.line, t.col, "unknown statement '" + t.text + "'"});
    if (auto r = expect_punct("="); !r) return R::err(r.error());
    if (slot == Slot::Res && peek().kind == Token::Kind::Ident && peek().text == "call") {
      next();
      auto callee = expect_comp_ref();
      if (!callee) return R::err(callee.error());
      if (auto r = expect_punct("."); !r) return R::err(r.error());
      Token pn = next();
      auto proc = resolve_proc(callee.value(), pn);
      if (!proc) return R::err(proc.error());
      if (auto r = expect_punct("("); !r) return R::err(r.error());
      auto arg = parse_expr();
      if (!arg) return R::err(arg.error());
      if (auto r = expect_punct(")"); !r) return R::err(r.error());
      if (auto r = expect_punct(";"); !r) return R::err(r.error());
      return R::ok(call_store(callee.value(), proc.value(), std::move(arg).value()));
    }
    auto e = parse_expr();
    if (!e) return R::err(e.error());
    if (auto r = expect_punct(";"); !r) return R::err(r.error());
    return R::ok(assign(slot, std::move(e).value()));
  }

  Result<ExprPtr, ParseError> parse_expr() { return parse_and(); }

  Result<ExprPtr, ParseError> parse_and() {
    auto l = parse_eq();
    if (!l) return l;
    if (peek().kind == Token::Kind::Punct && peek().text == "&&") {
      next();
      auto r = parse_and();
      if (!r) return r;
      return Result<ExprPtr, ParseError>::ok(
          make_and(std::move(l).value(), std::move(r).value()));
    }
    return l;
  }

  Result<ExprPtr, ParseError> parse_eq() {
    auto l = parse_atom();
    if (!l) return l;
    if (peek().kind == Token::Kind::Punct && peek().text == "=") {
      next();
      auto r = parse_atom();
      if (!r) return r;
      return Result<ExprPtr, ParseError>::ok(
          make_eq(std::move(l).value(), std::move(r).value()));
    }
    return l;
  }

  Result<ExprPtr, ParseError> parse_atom() {
    using R = Result<ExprPtr, ParseError>;
    Token t = next();
    if (t.kind == Token::Kind::Int) return R::ok(int_lit(t.number));
    if (t.kind == Token::Kind::Punct && t.text == "(") {
      auto e = parse_expr();
      if (!e) return e;
      if (auto r = expect_punct(")"); !r) return R::err(r.error());
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "loc") return R::ok(read_slot(Slot::Loc));
      if (t.text == "is_call") return R::ok(read_slot(Slot::IsCall));
      if (t.text == "res") return R::ok(read_slot(Slot::Res));
      if (t.text == "arg") return R::ok(read_arg());
    }
    return R::err(ParseError{t.line, t.col, "expected expression"});
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  SourceProgram prog_;
  std::map<std::string, CompartmentId> comp_ids_;
  std::vector<std::string> comp_names_;
  std::vector<std::vector<std::string>> proc_names_;
  std::vector<std::map<std::string, ProcedureId>> proc_ids_;
};

}  // namespace detail

/// Parses a whole source program. Compartment and procedure ids follow
/// declaration order, so parse(pretty(p)) reproduces p exactly for programs
/// with densely numbered declarations (everything this library produces).
inline Result<SourceProgram, ParseError> parse_source_program(std::string_view text) {
  return detail::SourceParser(text).run();
}

}  // namespace retrace

#endif  // RETRACE_SOURCE_TEXT_HPP
