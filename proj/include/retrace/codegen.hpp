#ifndef RETRACE_CODEGEN_HPP
#define RETRACE_CODEGEN_HPP

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "retrace/passes.hpp"
#include "retrace/source_lang.hpp"

namespace retrace {

/// The generated internal entry of a compartment: the first id after the
/// declared procedures.
inline ProcedureId internal_procedure(const TraceSet& s, CompartmentId c) {
  return ProcedureId{static_cast<std::uint32_t>(s.procedures[c.value].size())};
}

/// Guarded location updates for calls into `c` targeting `proc`: one branch
/// per rule testing loc = n && arg = z and assigning loc = n'. Falls through
/// with no assignment when nothing matches.
inline StmtPtr gen_incoming_call_switch(CompartmentId c, ProcedureId proc,
                                        const std::vector<FlatRule>& rules) {
  StmtPtr out = skip_stmt();
  for (std::size_t i = rules.size(); i-- > 0;) {
    const FlatRule& r = rules[i];
    if (r.event.dst != c || r.event.kind != EventKind::Call || r.event.proc != proc) continue;
    out = if_stmt(make_and(make_eq(read_slot(Slot::Loc), int_lit(r.from.value)),
                           make_eq(read_arg(), int_lit(r.event.payload))),
                  assign(Slot::Loc, int_lit(r.to.value)), std::move(out));
  }
  return out;
}

/// Guarded location updates for returns into `c`: branches on loc = n &&
/// res = v.
inline StmtPtr gen_incoming_return_switch(CompartmentId c,
                                          const std::vector<FlatRule>& rules) {
  StmtPtr out = skip_stmt();
  for (std::size_t i = rules.size(); i-- > 0;) {
    const FlatRule& r = rules[i];
    if (r.event.dst != c || r.event.kind != EventKind::Return) continue;
    out = if_stmt(make_and(make_eq(read_slot(Slot::Loc), int_lit(r.from.value)),
                           make_eq(read_slot(Slot::Res), int_lit(r.event.payload))),
                  assign(Slot::Loc, int_lit(r.to.value)), std::move(out));
  }
  return out;
}

/// Event production: branches on the current location. A call rule performs
/// the cross-compartment call and then re-enters the compartment through its
/// internal procedure, so the next decision branches on loc again (callbacks
/// may have moved it). A return rule updates loc and returns. The new
/// location is always written before control leaves the compartment.
inline StmtPtr switch_outgoing(CompartmentId c, const std::vector<FlatRule>& rules,
                               StmtPtr default_stmt, ProcedureId internal_proc) {
  StmtPtr out = std::move(default_stmt);
  for (std::size_t i = rules.size(); i-- > 0;) {
    const FlatRule& r = rules[i];
    if (r.event.src != c) continue;
    StmtPtr body;
    if (r.event.kind == EventKind::Call) {
      body = seq_of({assign(Slot::IsCall, int_lit(1)),
                     assign(Slot::Loc, int_lit(r.to.value)),
                     call_store(r.event.dst, r.event.proc, int_lit(r.event.payload)),
                     assign(Slot::IsCall, int_lit(0)),
                     call_store(c, internal_proc, int_lit(0))});
    } else {
      body = seq_of({assign(Slot::IsCall, int_lit(1)),
                     assign(Slot::Loc, int_lit(r.to.value)),
                     return_stmt(int_lit(r.event.payload))});
    }
    out = if_stmt(make_eq(read_slot(Slot::Loc), int_lit(r.from.value)), std::move(body),
                  std::move(out));
  }
  return out;
}

/// Bodies for every procedure of `c`, including the internal entry: dispatch
/// on is_call between the per-procedure incoming-call switch and the shared
/// return switch, then produce the next outgoing event. The internal entry
/// never receives cross-compartment calls, so its call switch is skip.
inline std::map<ProcedureId, StmtPtr> gen_compartment(CompartmentId c,
                                                      const std::vector<FlatRule>& rules,
                                                      std::uint32_t declared_procs,
                                                      ProcedureId internal_proc) {
  const StmtPtr ret_switch = gen_incoming_return_switch(c, rules);
  const StmtPtr out_switch = switch_outgoing(c, rules, exit_stmt(), internal_proc);
  std::map<ProcedureId, StmtPtr> bodies;
  for (std::uint32_t p = 0; p < declared_procs; ++p)
    bodies[ProcedureId{p}] =
        seq(if_stmt(read_slot(Slot::IsCall),
                    gen_incoming_call_switch(c, ProcedureId{p}, rules), ret_switch),
            out_switch);
  bodies[internal_proc] =
      seq(if_stmt(read_slot(Slot::IsCall), skip_stmt(), ret_switch), out_switch);
  return bodies;
}

/// A set of generated compartments: either the shared context or one
/// program side P'_i.
struct SourceFragment {
  std::map<CompartmentId, SourceCompartment> compartments;
};

struct BackTranslation {
  SourceFragment context;
  std::vector<SourceFragment> programs;
};

struct BackTranslateError {
  std::variant<WellFormednessError, PassError> cause;

  std::string message() const {
    if (std::holds_alternative<WellFormednessError>(cause))
      return std::get<WellFormednessError>(cause).message();
    return std::get<PassError>(cause).message();
  }
};

namespace detail {

inline SourceCompartment gen_source_compartment(const TraceSet& s, CompartmentId c,
                                                const std::vector<FlatRule>& rules) {
  SourceCompartment comp;
  comp.name = s.names[c.value];
  const ProcedureId internal = internal_procedure(s, c);
  auto bodies = gen_compartment(c, rules, static_cast<std::uint32_t>(s.procedures[c.value].size()),
                                internal);
  for (auto& [pid, body] : bodies) {
    std::string name =
        pid == internal ? std::string("internal") : s.procedures[c.value][pid.value];
    comp.procedures[pid] = Procedure{std::move(name), std::move(body)};
  }
  return comp;
}

inline SourceFragment gen_fragment(const TraceSet& s, const FlatRuleTable& tables,
                                   const std::vector<CompartmentId>& comps) {
  SourceFragment frag;
  static const std::vector<FlatRule> no_rules;
  for (CompartmentId c : comps) {
    auto it = tables.find(c);
    frag.compartments[c] = gen_source_compartment(s, c, it == tables.end() ? no_rules : it->second);
  }
  return frag;
}

}  // namespace detail

/// The whole back-translation: passes (a)-(d) and then code generation. The
/// context fragment covers all context compartments (from the merged trees);
/// fragment i covers all program compartments (from trace i's linear trees).
inline Result<BackTranslation, BackTranslateError> back_translate(const TraceSet& s) {
  using R = Result<BackTranslation, BackTranslateError>;
  auto pipeline = build_pipeline(s);
  if (!pipeline) return R::err(BackTranslateError{pipeline.error().cause});
  const FlatProgram& flat = pipeline.value().level4;
  BackTranslation out;
  out.context = detail::gen_fragment(s, flat.context_rules, s.context_compartments());
  out.programs.reserve(flat.program_rules.size());
  for (std::size_t i = 0; i < flat.program_rules.size(); ++i)
    out.programs.push_back(
        detail::gen_fragment(s, flat.program_rules[i], s.program_compartments()));
  return R::ok(std::move(out));
}

/// Links the context with one program side into a closed program whose entry
/// point is the main compartment's internal procedure.
inline SourceProgram link(const TraceSet& s, const SourceFragment& context,
                          const SourceFragment& program) {
  SourceProgram p;
  for (const auto& [c, comp] : context.compartments) p.compartments[c] = comp;
  for (const auto& [c, comp] : program.compartments) p.compartments[c] = comp;
  p.main_compartment = s.main;
  p.main_procedure = internal_procedure(s, s.main);
  return p;
}

}  // namespace retrace

#endif  // RETRACE_CODEGEN_HPP
