#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "retrace/codegen.hpp"
#include "retrace/source_text.hpp"

using namespace retrace;
using test::call;
using test::kCC;
using test::kCP;
using test::ret;

namespace {

/// Executes call-free straight-line code (the shape of the incoming
/// switches) directly against one compartment's memory.
void exec_straight(const StmtPtr& s, CompartmentMemory& mem, std::int64_t arg) {
  switch (s->kind) {
    case Stmt::Kind::Skip: return;
    case Stmt::Kind::Assign: mem.store(s->slot, eval_expr(s->expr, mem, arg)); return;
    case Stmt::Kind::Seq:
      exec_straight(s->a, mem, arg);
      exec_straight(s->b, mem, arg);
      return;
    case Stmt::Kind::If:
      exec_straight(eval_expr(s->expr, mem, arg) != 0 ? s->a : s->b, mem, arg);
      return;
    default: FAIL("unexpected statement in a switch");
  }
}

bool expr_reads(const ExprPtr& e, Slot slot) {
  if (!e) return false;
  if (e->kind == Expr::Kind::ReadVar && e->slot == slot) return true;
  return expr_reads(e->lhs, slot) || expr_reads(e->rhs, slot);
}

bool expr_reads_arg(const ExprPtr& e) {
  if (!e) return false;
  if (e->kind == Expr::Kind::ReadArg) return true;
  return expr_reads_arg(e->lhs) || expr_reads_arg(e->rhs);
}

bool stmt_reads(const StmtPtr& s, Slot slot) {
  if (!s) return false;
  return expr_reads(s->expr, slot) || stmt_reads(s->a, slot) || stmt_reads(s->b, slot);
}

bool stmt_reads_arg(const StmtPtr& s) {
  if (!s) return false;
  return expr_reads_arg(s->expr) || stmt_reads_arg(s->a) || stmt_reads_arg(s->b);
}

std::vector<FlatRule> fig2_cc_rules() {
  const auto pipeline = build_pipeline(test::fig2_set());
  REQUIRE(pipeline);
  return pipeline.value().level4.context_rules.at(kCC);
}

}  // namespace

TEST_CASE("the incoming-call switch updates loc on a key match", "[codegen]") {
  CHECK(stmt_equal(gen_incoming_call_switch(kCC, test::kP, {}), skip_stmt()));

  const StmtPtr sw = gen_incoming_call_switch(kCC, test::kP, fig2_cc_rules());
  CompartmentMemory mem;
  mem.loc = 1;
  exec_straight(sw, mem, 41);
  CHECK(mem.loc == 2);

  mem = CompartmentMemory{};
  mem.loc = 1;
  exec_straight(sw, mem, 99);  // no key matches: falls through
  CHECK(mem.loc == 1);
}

TEST_CASE("a two-rule call switch fires the matching branch only", "[codegen]") {
  const CompartmentId a{0}, c{1};
  const std::vector<FlatRule> rules = {
      {NodeId{1}, call(a, c, 7), NodeId{4}},
      {NodeId{1}, call(a, c, 8), NodeId{5}},
  };
  const StmtPtr sw = gen_incoming_call_switch(c, test::kP, rules);
  for (std::int64_t loc : {0, 1, 2})
    for (std::int64_t arg : {6, 7, 8, 9}) {
      CompartmentMemory mem;
      mem.loc = loc;
      exec_straight(sw, mem, arg);
      if (loc == 1 && arg == 7) CHECK(mem.loc == 4);
      else if (loc == 1 && arg == 8) CHECK(mem.loc == 5);
      else CHECK(mem.loc == loc);
    }
}

TEST_CASE("the incoming-return switch branches on loc and res", "[codegen]") {
  CHECK(stmt_equal(gen_incoming_return_switch(kCC, {}), skip_stmt()));

  const StmtPtr sw = gen_incoming_return_switch(kCC, fig2_cc_rules());
  const auto after = [&](std::int64_t loc, std::int64_t res) {
    CompartmentMemory mem;
    mem.loc = loc;
    mem.res = res;
    exec_straight(sw, mem, 0);
    return mem.loc;
  };
  CHECK(after(1, 43) == 5);
  CHECK(after(1, 44) == 6);
  CHECK(after(3, 43) == 4);
  CHECK(after(1, 42) == 1);
  CHECK(after(0, 43) == 0);
}

TEST_CASE("switch_outgoing produces the example call and return arms", "[codegen]") {
  const ProcedureId internal{1};
  CHECK(stmt_equal(switch_outgoing(kCC, {}, exit_stmt(), internal), exit_stmt()));

  const StmtPtr sw = switch_outgoing(kCC, fig2_cc_rules(), exit_stmt(), internal);
  const StmtPtr call_arm = seq_of({assign(Slot::IsCall, int_lit(1)),
                                   assign(Slot::Loc, int_lit(1)),
                                   call_store(kCP, test::kP, int_lit(40)),
                                   assign(Slot::IsCall, int_lit(0)),
                                   call_store(kCC, internal, int_lit(0))});
  const StmtPtr ret_arm = seq_of({assign(Slot::IsCall, int_lit(1)),
                                  assign(Slot::Loc, int_lit(3)),
                                  return_stmt(int_lit(42))});
  const StmtPtr expected =
      if_stmt(make_eq(read_slot(Slot::Loc), int_lit(0)), call_arm,
              if_stmt(make_eq(read_slot(Slot::Loc), int_lit(2)), ret_arm, exit_stmt()));
  CHECK(stmt_equal(sw, expected));
}

TEST_CASE("gen_compartment shares the return and outgoing switches", "[codegen]") {
  const std::vector<FlatRule> rules = fig2_cc_rules();
  const ProcedureId internal{1};
  const auto bodies = gen_compartment(kCC, rules, 1, internal);
  REQUIRE(bodies.size() == 2);

  const StmtPtr expected_p =
      seq(if_stmt(read_slot(Slot::IsCall), gen_incoming_call_switch(kCC, test::kP, rules),
                  gen_incoming_return_switch(kCC, rules)),
          switch_outgoing(kCC, rules, exit_stmt(), internal));
  const StmtPtr expected_internal =
      seq(if_stmt(read_slot(Slot::IsCall), skip_stmt(), gen_incoming_return_switch(kCC, rules)),
          switch_outgoing(kCC, rules, exit_stmt(), internal));
  CHECK(stmt_equal(bodies.at(test::kP), expected_p));
  CHECK(stmt_equal(bodies.at(internal), expected_internal));
}

TEST_CASE("a compartment with no rules becomes inert code", "[codegen]") {
  const ProcedureId internal{2};
  const auto bodies = gen_compartment(CompartmentId{3}, {}, 2, internal);
  REQUIRE(bodies.size() == 3);
  const StmtPtr inert =
      seq(if_stmt(read_slot(Slot::IsCall), skip_stmt(), skip_stmt()), exit_stmt());
  for (const auto& [pid, body] : bodies) CHECK(stmt_equal(body, inert));
}

TEST_CASE("only the called procedure's switch carries its rules", "[codegen]") {
  // compartment with procedures p and q where only p is ever called
  const CompartmentId a{0}, c{1};
  const std::vector<FlatRule> rules = {{NodeId{0}, call(a, c, 5, ProcedureId{0}), NodeId{1}}};
  const ProcedureId internal{2};
  const auto bodies = gen_compartment(c, rules, 2, internal);
  const StmtPtr q_expected =
      seq(if_stmt(read_slot(Slot::IsCall), skip_stmt(),
                  gen_incoming_return_switch(c, rules)),
          switch_outgoing(c, rules, exit_stmt(), internal));
  CHECK(stmt_equal(bodies.at(ProcedureId{1}), q_expected));
  CHECK_FALSE(stmt_equal(bodies.at(ProcedureId{0}), q_expected));
}

TEST_CASE("back_translate reproduces the example traces", "[codegen]") {
  const TraceSet s = test::fig2_set();
  const auto bt = back_translate(s);
  REQUIRE(bt);
  REQUIRE(bt.value().programs.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    const SourceProgram whole = link(s, bt.value().context, bt.value().programs[i]);
    const RunResult r = run_source(whole, default_step_bound(s));
    CHECK(r.outcome == Outcome::Halted);
    CHECK(r.emitted == s.traces[i]);
  }
}

TEST_CASE("back_translate of the single-trace set matches the counter scheme",
          "[codegen]") {
  const TraceSet s = test::single_m1_set();
  const auto bt = back_translate(s);
  REQUIRE(bt);
  const SourceProgram whole = link(s, bt.value().context, bt.value().programs[0]);
  const RunResult r = run_source(whole, default_step_bound(s));
  CHECK(r.outcome == Outcome::Halted);
  CHECK(r.emitted == s.traces[0]);
}

TEST_CASE("back_translate of an empty set yields an inert context", "[codegen]") {
  TraceSet s;
  s.names = {"A", "B"};
  s.roles = {Role::Context, Role::Program};
  s.procedures = {{"p"}, {"p"}};
  s.main = CompartmentId{0};
  const auto bt = back_translate(s);
  REQUIRE(bt);
  CHECK(bt.value().programs.empty());
  const StmtPtr inert =
      seq(if_stmt(read_slot(Slot::IsCall), skip_stmt(), skip_stmt()), exit_stmt());
  for (const auto& [pid, proc] :
       bt.value().context.compartments.at(CompartmentId{0}).procedures)
    CHECK(stmt_equal(proc.body, inert));

  // linked with nothing, the context halts immediately without events
  const SourceProgram whole = link(s, bt.value().context, SourceFragment{});
  const RunResult r = run_source(whole, 100);
  CHECK(r.outcome == Outcome::Halted);
  CHECK(r.emitted.empty());
}

TEST_CASE("back_translate rejects ill-formed input", "[codegen]") {
  TraceSet s = test::fig2_set();
  s.traces.push_back({call(kCC, kCP, 40), call(kCC, kCP, 41)});
  CHECK_FALSE(back_translate(s).has_value());
}

TEST_CASE("generated code reads res and arg only in the proper switches",
          "[codegen][property]") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const TraceSet s = generate_trace_set(seed, GenParams{5, 20, 4, 3});
    const auto pipeline = build_pipeline(s);
    REQUIRE(pipeline);
    const auto lint = [&](CompartmentId c, const std::vector<FlatRule>& rules) {
      const ProcedureId internal = internal_procedure(s, c);
      for (std::uint32_t p = 0; p < s.procedures[c.value].size(); ++p) {
        const StmtPtr callsw = gen_incoming_call_switch(c, ProcedureId{p}, rules);
        CHECK_FALSE(stmt_reads(callsw, Slot::Res));
      }
      const StmtPtr retsw = gen_incoming_return_switch(c, rules);
      CHECK_FALSE(stmt_reads_arg(retsw));
      const StmtPtr outsw = switch_outgoing(c, rules, exit_stmt(), internal);
      CHECK_FALSE(stmt_reads(outsw, Slot::Res));
      CHECK_FALSE(stmt_reads_arg(outsw));
    };
    for (const auto& [c, rules] : pipeline.value().level4.context_rules) lint(c, rules);
    for (const auto& table : pipeline.value().level4.program_rules)
      for (const auto& [c, rules] : table) lint(c, rules);
  }
}
