#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "retrace/codegen.hpp"
#include "retrace/source_lang.hpp"

using namespace retrace;
using test::call;
using test::ret;

namespace {

const CompartmentId kA{0};
const CompartmentId kB{1};
const ProcedureId kP0{0};

SourceProgram two_comp_program(StmtPtr a_body, StmtPtr b_body) {
  SourceProgram p;
  p.compartments[kA] = SourceCompartment{"A", {{kP0, Procedure{"p", std::move(a_body)}}}};
  p.compartments[kB] = SourceCompartment{"B", {{kP0, Procedure{"p", std::move(b_body)}}}};
  p.main_compartment = kA;
  p.main_procedure = kP0;
  return p;
}

/// Top-down list of cross-compartment frames of the machine stack, as
/// (caller, callee) pairs, walking through internal frames.
std::vector<std::pair<CompartmentId, CompartmentId>> cross_frames(const MachineState& s) {
  std::vector<std::pair<CompartmentId, CompartmentId>> out;
  CompartmentId walking = s.cur;
  for (std::size_t i = s.frames.size(); i-- > 0;) {
    const MachineFrame& f = s.frames[i];
    if (f.compartment != walking) {
      out.emplace_back(f.compartment, walking);
      walking = f.compartment;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("eval_expr is total with 0/1 booleans", "[source]") {
  CompartmentMemory mem;
  mem.loc = 1;
  CHECK(eval_expr(make_eq(read_slot(Slot::Loc), int_lit(1)), mem, 0) == 1);
  CHECK(eval_expr(make_eq(read_slot(Slot::Loc), int_lit(2)), mem, 0) == 0);
  CHECK(eval_expr(make_and(int_lit(1), int_lit(0)), mem, 0) == 0);
  CHECK(eval_expr(make_and(int_lit(2), int_lit(-3)), mem, 0) == 1);
  CHECK(eval_expr(read_arg(), mem, 41) == 41);
}

TEST_CASE("cross-compartment calls emit events, internal calls are silent", "[source]") {
  // A calls B (traced), B exits
  const SourceProgram traced =
      two_comp_program(call_store(kB, kP0, int_lit(40)), exit_stmt());
  const RunResult r1 = run_source(traced, 1000);
  CHECK(r1.outcome == Outcome::Halted);
  CHECK(r1.emitted == Trace{call(kA, kB, 40)});

  // A calls itself (silent), then the callee exits
  SourceProgram internal = two_comp_program(skip_stmt(), exit_stmt());
  SourceCompartment& a = internal.compartments[kA];
  a.procedures[ProcedureId{1}] = Procedure{"q", exit_stmt()};
  a.procedures[kP0].body = call_store(kA, ProcedureId{1}, int_lit(0));
  const RunResult r2 = run_source(internal, 1000);
  CHECK(r2.outcome == Outcome::Halted);
  CHECK(r2.emitted.empty());
}

TEST_CASE("cross-compartment returns emit events and store into res", "[source]") {
  // A calls B; B returns 7; A returns the res slot to the empty stack (halt)
  const SourceProgram p = two_comp_program(
      seq(call_store(kB, kP0, int_lit(1)), return_stmt(read_slot(Slot::Res))),
      return_stmt(int_lit(7)));
  const RunResult r = run_source(p, 1000);
  CHECK(r.outcome == Outcome::Halted);
  CHECK(r.emitted == Trace{call(kA, kB, 1), ret(kB, kA, 7)});
}

TEST_CASE("exit halts without an event; return from main halts", "[source]") {
  CHECK(run_source(two_comp_program(exit_stmt(), exit_stmt()), 100).outcome ==
        Outcome::Halted);
  const RunResult r = run_source(two_comp_program(return_stmt(int_lit(3)), exit_stmt()), 100);
  CHECK(r.outcome == Outcome::Halted);
  CHECK(r.emitted.empty());
}

TEST_CASE("a call to a missing procedure gets stuck", "[source]") {
  const SourceProgram p =
      two_comp_program(call_store(kB, ProcedureId{9}, int_lit(0)), exit_stmt());
  CHECK(run_source(p, 100).outcome == Outcome::Stuck);
}

TEST_CASE("a tight loop exceeds the step bound", "[source]") {
  // p calls itself internally forever
  SourceProgram p = two_comp_program(skip_stmt(), exit_stmt());
  p.compartments[kA].procedures[kP0].body = call_store(kA, kP0, int_lit(0));
  CHECK(run_source(p, 500).outcome == Outcome::BoundExceeded);
}

TEST_CASE("step_source is deterministic", "[source]") {
  const TraceSet s = test::fig2_set();
  const auto bt = back_translate(s);
  REQUIRE(bt);
  const SourceProgram whole = link(s, bt.value().context, bt.value().programs[0]);
  MachineState m1 = initial_state(whole);
  MachineState m2 = initial_state(whole);
  for (int k = 0; k < 200 && !m1.halted; ++k) {
    auto r1 = step_source(whole, std::move(m1));
    auto r2 = step_source(whole, std::move(m2));
    REQUIRE(r1);
    REQUIRE(r2);
    CHECK(r1.value().event == r2.value().event);
    m1 = std::move(r1).value().state;
    m2 = std::move(r2).value().state;
    CHECK(m1.cur == m2.cur);
    CHECK(m1.mem == m2.mem);
  }
}

TEST_CASE("emitted traces are control-flow consistent and well-bracketed",
          "[source][property]") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TraceSet s = generate_trace_set(seed, GenParams{4, 16, 4, 2});
    const auto bt = back_translate(s);
    REQUIRE(bt);
    for (std::size_t i = 0; i < bt.value().programs.size(); ++i) {
      const SourceProgram whole = link(s, bt.value().context, bt.value().programs[i]);
      const RunResult r = run_source(whole, default_step_bound(s));
      REQUIRE(r.outcome == Outcome::Halted);
      CHECK(control_flow_ok(r.emitted, s.main));
      CHECK(wf_stack_trace(r.emitted, {}));
    }
  }
}

TEST_CASE("machine frames mirror the abstract cross-compartment stack",
          "[source][property]") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const TraceSet s = generate_trace_set(seed, GenParams{4, 16, 4, 2});
    const auto bt = back_translate(s);
    REQUIRE(bt);
    for (std::size_t i = 0; i < bt.value().programs.size(); ++i) {
      const SourceProgram whole = link(s, bt.value().context, bt.value().programs[i]);
      MachineState ms = initial_state(whole);
      Trace emitted;
      std::uint64_t bound = default_step_bound(s);
      while (!ms.halted && bound-- > 0) {
        auto r = step_source(whole, std::move(ms));
        REQUIRE(r);
        if (r.value().event) emitted.push_back(*r.value().event);
        ms = std::move(r).value().state;

        AbstractStack abs;
        for (const Event& e : emitted) {
          if (e.kind == EventKind::Call)
            abs.push_back(Frame{e.src, e.proc, e.dst});
          else
            abs.pop_back();
        }
        std::vector<std::pair<CompartmentId, CompartmentId>> want;
        for (std::size_t k = abs.size(); k-- > 0;)
          want.emplace_back(abs[k].caller, abs[k].callee);
        CHECK(cross_frames(ms) == want);
      }
      CHECK(ms.halted);
    }
  }
}
