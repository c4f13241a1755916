#ifndef RETRACE_SOURCE_LANG_HPP
#define RETRACE_SOURCE_LANG_HPP

#include <cassert>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "retrace/result.hpp"
#include "retrace/trace.hpp"

namespace retrace {

/// Per-compartment private state: three integer slots.
enum class Slot { Loc = 0, IsCall = 1, Res = 2 };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Expressions are total over integers; booleans are 0/1.
struct Expr {
  enum class Kind { IntConst, ReadVar, ReadArg, Eq, And };
  Kind kind = Kind::IntConst;
  std::int64_t value = 0;  // IntConst
  Slot slot = Slot::Loc;   // ReadVar
  ExprPtr lhs, rhs;        // Eq, And
};

inline ExprPtr int_lit(std::int64_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::IntConst;
  e->value = v;
  return e;
}

inline ExprPtr read_slot(Slot s) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::ReadVar;
  e->slot = s;
  return e;
}

inline ExprPtr read_arg() {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::ReadArg;
  return e;
}

inline ExprPtr make_eq(ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Eq;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

inline ExprPtr make_and(ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::And;
  e->lhs = std::move(a);
  e->rhs = std::move(b);
  return e;
}

inline bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Expr::Kind::IntConst: return a->value == b->value;
    case Expr::Kind::ReadVar: return a->slot == b->slot;
    case Expr::Kind::ReadArg: return true;
    case Expr::Kind::Eq:
    case Expr::Kind::And:
      return expr_equal(a->lhs, b->lhs) && expr_equal(a->rhs, b->rhs);
  }
  return false;
}

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

/// Statements. CallStore performs the (possibly internal) call and stores the
/// returned value into the caller's RES slot.
struct Stmt {
  enum class Kind { Skip, Assign, Seq, If, CallStore, Return, Exit };
  Kind kind = Kind::Skip;
  Slot slot = Slot::Loc;  // Assign target
  ExprPtr expr;           // Assign value / If condition / CallStore argument / Return value
  StmtPtr a, b;           // Seq: first, second; If: then, else
  CompartmentId callee;   // CallStore
  ProcedureId proc;       // CallStore
};

inline StmtPtr skip_stmt() {
  static const StmtPtr s = std::make_shared<Stmt>();
  return s;
}

inline StmtPtr assign(Slot slot, ExprPtr value) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Assign;
  s->slot = slot;
  s->expr = std::move(value);
  return s;
}

inline StmtPtr seq(StmtPtr first, StmtPtr second) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Seq;
  s->a = std::move(first);
  s->b = std::move(second);
  return s;
}

/// Right-nested sequence; the canonical shape produced by the parser.
inline StmtPtr seq_of(std::vector<StmtPtr> stmts) {
  if (stmts.empty()) return skip_stmt();
  StmtPtr out = stmts.back();
  for (std::size_t i = stmts.size() - 1; i-- > 0;) out = seq(stmts[i], std::move(out));
  return out;
}

inline StmtPtr if_stmt(ExprPtr cond, StmtPtr then_branch, StmtPtr else_branch) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::If;
  s->expr = std::move(cond);
  s->a = std::move(then_branch);
  s->b = std::move(else_branch);
  return s;
}

inline StmtPtr call_store(CompartmentId callee, ProcedureId proc, ExprPtr arg) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::CallStore;
  s->callee = callee;
  s->proc = proc;
  s->expr = std::move(arg);
  return s;
}

inline StmtPtr return_stmt(ExprPtr value) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Return;
  s->expr = std::move(value);
  return s;
}

inline StmtPtr exit_stmt() {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Exit;
  return s;
}

inline bool stmt_equal(const StmtPtr& a, const StmtPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Stmt::Kind::Skip:
    case Stmt::Kind::Exit: return true;
    case Stmt::Kind::Assign: return a->slot == b->slot && expr_equal(a->expr, b->expr);
    case Stmt::Kind::Seq: return stmt_equal(a->a, b->a) && stmt_equal(a->b, b->b);
    case Stmt::Kind::If:
      return expr_equal(a->expr, b->expr) && stmt_equal(a->a, b->a) && stmt_equal(a->b, b->b);
    case Stmt::Kind::CallStore:
      return a->callee == b->callee && a->proc == b->proc && expr_equal(a->expr, b->expr);
    case Stmt::Kind::Return: return expr_equal(a->expr, b->expr);
  }
  return false;
}

struct Procedure {
  std::string name;
  StmtPtr body;
};

struct SourceCompartment {
  std::string name;
  std::map<ProcedureId, Procedure> procedures;
};

struct SourceProgram {
  std::map<CompartmentId, SourceCompartment> compartments;
  CompartmentId main_compartment;
  ProcedureId main_procedure;
};

inline bool program_equal(const SourceProgram& a, const SourceProgram& b) {
  if (a.main_compartment != b.main_compartment || a.main_procedure != b.main_procedure)
    return false;
  if (a.compartments.size() != b.compartments.size()) return false;
  for (auto ita = a.compartments.begin(), itb = b.compartments.begin();
       ita != a.compartments.end(); ++ita, ++itb) {
    if (ita->first != itb->first || ita->second.name != itb->second.name) return false;
    const auto& pa = ita->second.procedures;
    const auto& pb = itb->second.procedures;
    if (pa.size() != pb.size()) return false;
    for (auto ja = pa.begin(), jb = pb.begin(); ja != pa.end(); ++ja, ++jb) {
      if (ja->first != jb->first || ja->second.name != jb->second.name) return false;
      if (!stmt_equal(ja->second.body, jb->second.body)) return false;
    }
  }
  return true;
}

/// Slots of one compartment. Initial values: loc 0 (the root location),
/// is_call 1 (the first genuine incoming call must take the call branch),
/// res 0.
struct CompartmentMemory {
  std::int64_t loc = 0;
  std::int64_t is_call = 1;
  std::int64_t res = 0;

  friend bool operator==(const CompartmentMemory&, const CompartmentMemory&) = default;

  std::int64_t load(Slot s) const {
    switch (s) {
      case Slot::Loc: return loc;
      case Slot::IsCall: return is_call;
      case Slot::Res: return res;
    }
    return 0;
  }
  void store(Slot s, std::int64_t v) {
    switch (s) {
      case Slot::Loc: loc = v; break;
      case Slot::IsCall: is_call = v; break;
      case Slot::Res: res = v; break;
    }
  }
};

using Memory = std::map<CompartmentId, CompartmentMemory>;

inline std::int64_t eval_expr(const ExprPtr& e, const CompartmentMemory& mem,
                              std::int64_t arg) {
  switch (e->kind) {
    case Expr::Kind::IntConst: return e->value;
    case Expr::Kind::ReadVar: return mem.load(e->slot);
    case Expr::Kind::ReadArg: return arg;
    case Expr::Kind::Eq:
      return eval_expr(e->lhs, mem, arg) == eval_expr(e->rhs, mem, arg) ? 1 : 0;
    case Expr::Kind::And:
      return (eval_expr(e->lhs, mem, arg) != 0 && eval_expr(e->rhs, mem, arg) != 0) ? 1 : 0;
  }
  return 0;
}

/// A suspended caller: the compartment to resume, its argument, and its
/// pending statements. The returned value is stored into the caller's RES
/// slot when the frame is popped (the after-call continuation).
struct MachineFrame {
  CompartmentId compartment;
  std::int64_t saved_arg = 0;
  std::vector<StmtPtr> kont;
};

/// Small-step interpreter state. `kont` is the pending-statement stack of the
/// current invocation (back = next to execute); an empty kont means the body
/// fell off its end, which returns the RES slot so that a value returned
/// through tail position keeps propagating outward.
struct MachineState {
  CompartmentId cur;
  std::vector<StmtPtr> kont;
  std::int64_t arg = 0;
  std::vector<MachineFrame> frames;
  Memory mem;
  bool halted = false;
};

struct RuntimeError {
  CompartmentId compartment;
  ProcedureId proc;

  std::string message() const {
    return "call to missing procedure " + std::to_string(proc.value) +
           " of compartment " + std::to_string(compartment.value);
  }
};

struct SourceStep {
  MachineState state;
  std::optional<Event> event;
};

namespace detail {

inline SourceStep pop_frame(MachineState s, std::int64_t value) {
  SourceStep out;
  if (s.frames.empty()) {
    s.halted = true;
    out.state = std::move(s);
    return out;
  }
  MachineFrame f = std::move(s.frames.back());
  s.frames.pop_back();
  if (f.compartment != s.cur)
    out.event = make_return(s.cur, f.compartment, value);
  s.mem[f.compartment].store(Slot::Res, value);
  s.cur = f.compartment;
  s.arg = f.saved_arg;
  s.kont = std::move(f.kont);
  out.state = std::move(s);
  return out;
}

}  // namespace detail

/// One structural step. The only event-emitting transitions are cross-
/// compartment CallStore and frame pops that cross compartments; internal
/// calls and returns are silent. Returning past the empty stack halts.
inline Result<SourceStep, RuntimeError> step_source(const SourceProgram& p, MachineState s) {
  using R = Result<SourceStep, RuntimeError>;
  assert(!s.halted);
  if (s.kont.empty()) {
    const std::int64_t v = s.mem[s.cur].load(Slot::Res);
    return R::ok(detail::pop_frame(std::move(s), v));
  }
  StmtPtr stmt = std::move(s.kont.back());
  s.kont.pop_back();
  switch (stmt->kind) {
    case Stmt::Kind::Skip: break;
    case Stmt::Kind::Seq:
      s.kont.push_back(stmt->b);
      s.kont.push_back(stmt->a);
      break;
    case Stmt::Kind::Assign:
      s.mem[s.cur].store(stmt->slot, eval_expr(stmt->expr, s.mem[s.cur], s.arg));
      break;
    case Stmt::Kind::If:
      s.kont.push_back(eval_expr(stmt->expr, s.mem[s.cur], s.arg) != 0 ? stmt->a : stmt->b);
      break;
    case Stmt::Kind::Return: {
      const std::int64_t v = eval_expr(stmt->expr, s.mem[s.cur], s.arg);
      return R::ok(detail::pop_frame(std::move(s), v));
    }
    case Stmt::Kind::Exit:
      s.halted = true;
      break;
    case Stmt::Kind::CallStore: {
      const std::int64_t v = eval_expr(stmt->expr, s.mem[s.cur], s.arg);
      auto comp = p.compartments.find(stmt->callee);
      if (comp == p.compartments.end())
        return R::err(RuntimeError{stmt->callee, stmt->proc});
      auto proc = comp->second.procedures.find(stmt->proc);
      if (proc == comp->second.procedures.end())
        return R::err(RuntimeError{stmt->callee, stmt->proc});
      SourceStep out;
      if (stmt->callee != s.cur)
        out.event = make_call(s.cur, stmt->callee, stmt->proc, v);
      s.frames.push_back(MachineFrame{s.cur, s.arg, std::move(s.kont)});
      s.cur = stmt->callee;
      s.arg = v;
      s.kont = {proc->second.body};
      out.state = std::move(s);
      return R::ok(std::move(out));
    }
  }
  SourceStep out;
  out.state = std::move(s);
  return R::ok(std::move(out));
}

inline MachineState initial_state(const SourceProgram& p) {
  MachineState s;
  s.cur = p.main_compartment;
  for (const auto& [c, comp] : p.compartments) s.mem[c] = CompartmentMemory{};
  auto comp = p.compartments.find(p.main_compartment);
  assert(comp != p.compartments.end());
  auto proc = comp->second.procedures.find(p.main_procedure);
  assert(proc != comp->second.procedures.end());
  s.kont = {proc->second.body};
  return s;
}

enum class Outcome { Halted, Stuck, BoundExceeded };

struct RunResult {
  Trace emitted;
  Outcome outcome = Outcome::Halted;
  std::size_t steps = 0;
};

/// Runs the whole program from the initial state until halt, a runtime
/// error (Stuck) or the step bound.
inline RunResult run_source(const SourceProgram& p, std::uint64_t step_bound) {
  RunResult out;
  MachineState s = initial_state(p);
  while (!s.halted) {
    if (out.steps >= step_bound) {
      out.outcome = Outcome::BoundExceeded;
      return out;
    }
    auto r = step_source(p, std::move(s));
    ++out.steps;
    if (!r) {
      out.outcome = Outcome::Stuck;
      return out;
    }
    if (r.value().event) out.emitted.push_back(*r.value().event);
    s = std::move(r.value().state);
  }
  out.outcome = Outcome::Halted;
  return out;
}

}  // namespace retrace

#endif  // RETRACE_SOURCE_LANG_HPP
