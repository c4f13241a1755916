#ifndef RETRACE_TESTS_HELPERS_HPP
#define RETRACE_TESTS_HELPERS_HPP

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "retrace/harness.hpp"
#include "retrace/source_lang.hpp"
#include "retrace/trace.hpp"

namespace test {

using namespace retrace;

inline constexpr CompartmentId kCC{0};  // context, main
inline constexpr CompartmentId kCP{1};  // program
inline constexpr ProcedureId kP{0};

inline Event call(CompartmentId src, CompartmentId dst, std::int64_t arg,
                  ProcedureId proc = kP) {
  return make_call(src, dst, proc, arg);
}

inline Event ret(CompartmentId src, CompartmentId dst, std::int64_t value) {
  return make_return(src, dst, value);
}

/// The running two-compartment example: three prefixes sharing a first call
/// and diverging while the program side has control. m1's final return value
/// is 43, matching the tree and the generated code.
inline TraceSet fig2_set() {
  TraceSet s;
  s.names = {"C_C", "C_P"};
  s.roles = {Role::Context, Role::Program};
  s.procedures = {{"p"}, {"p"}};
  s.main = kCC;
  s.traces = {
      {call(kCC, kCP, 40), call(kCP, kCC, 41), ret(kCC, kCP, 42), ret(kCP, kCC, 43)},
      {call(kCC, kCP, 40), ret(kCP, kCC, 43)},
      {call(kCC, kCP, 40), ret(kCP, kCC, 44)},
  };
  return s;
}

/// The single-trace regression: one prefix whose final return value is 42.
inline TraceSet single_m1_set() {
  TraceSet s;
  s.names = {"C1", "C2"};
  s.roles = {Role::Context, Role::Program};
  s.procedures = {{"p"}, {"p"}};
  s.main = CompartmentId{0};
  s.traces = {
      {call(CompartmentId{0}, CompartmentId{1}, 40),
       call(CompartmentId{1}, CompartmentId{0}, 41),
       ret(CompartmentId{0}, CompartmentId{1}, 42),
       ret(CompartmentId{1}, CompartmentId{0}, 42)},
  };
  return s;
}

inline std::string samples_dir() { return RETRACE_SAMPLES_DIR; }

inline std::string read_sample(const std::string& rel) {
  std::ifstream in(samples_dir() + "/" + rel, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Quadratic reference formulation of the determinacy clause, kept as an
/// oracle for the trie-based implementation in check_well_formed.
inline bool determinacy_pair_scan_ok(const TraceSet& s) {
  for (CompartmentId c : s.context_compartments()) {
    std::vector<Trace> fs;
    fs.reserve(s.traces.size());
    for (const Trace& m : s.traces) fs.push_back(filter_for_compartment(m, c));
    for (std::size_t i = 0; i < fs.size(); ++i)
      for (std::size_t j = i + 1; j < fs.size(); ++j) {
        std::size_t k = 0;
        while (k < fs[i].size() && k < fs[j].size() && fs[i][k] == fs[j][k]) ++k;
        if (k == fs[i].size() || k == fs[j].size()) continue;  // prefix, no divergence
        const Event& a = fs[i][k];
        const Event& b = fs[j][k];
        const bool in_control = (k == 0) ? (c == s.main) : (fs[i][k - 1].dst == c);
        if (in_control) return false;
        if (a.kind == b.kind && a.proc == b.proc && a.payload == b.payload) return false;
      }
  }
  return true;
}

/// Random but canonically-shaped source programs for round-trip tests:
/// right-nested sequences, which is the form the parser produces.
inline SourceProgram random_source_program(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x51ed270b8a31cull);
  const auto draw = [&](std::uint64_t n) -> std::uint64_t { return n == 0 ? 0 : rng() % n; };

  SourceProgram p;
  const std::uint32_t n_comps = 1 + static_cast<std::uint32_t>(draw(3));
  std::vector<std::uint32_t> n_procs(n_comps);
  for (std::uint32_t c = 0; c < n_comps; ++c) n_procs[c] = 1 + static_cast<std::uint32_t>(draw(2));

  const auto random_expr = [&](auto&& self, int depth) -> ExprPtr {
    switch (depth <= 0 ? draw(3) : draw(5)) {
      case 0: return int_lit(static_cast<std::int64_t>(draw(201)) - 100);
      case 1: return read_slot(static_cast<Slot>(draw(3)));
      case 2: return read_arg();
      case 3: return make_eq(self(self, depth - 1), self(self, depth - 1));
      default: return make_and(self(self, depth - 1), self(self, depth - 1));
    }
  };
  const auto random_stmt = [&](auto&& self, int depth) -> StmtPtr {
    switch (depth <= 0 ? draw(4) : draw(6)) {
      case 0: return skip_stmt();
      case 1: return assign(static_cast<Slot>(draw(3)), random_expr(random_expr, 2));
      case 2: return return_stmt(random_expr(random_expr, 1));
      case 3: return exit_stmt();
      case 4: {
        const std::uint32_t callee = static_cast<std::uint32_t>(draw(n_comps));
        return call_store(CompartmentId{callee},
                          ProcedureId{static_cast<std::uint32_t>(draw(n_procs[callee]))},
                          random_expr(random_expr, 1));
      }
      default: {
        std::vector<StmtPtr> then_branch, else_branch;
        for (std::uint64_t i = 0, e = draw(3); i < e; ++i)
          then_branch.push_back(self(self, depth - 1));
        for (std::uint64_t i = 0, e = draw(3); i < e; ++i)
          else_branch.push_back(self(self, depth - 1));
        return if_stmt(random_expr(random_expr, 2), seq_of(std::move(then_branch)),
                       seq_of(std::move(else_branch)));
      }
    }
  };

  for (std::uint32_t c = 0; c < n_comps; ++c) {
    SourceCompartment comp;
    comp.name = "M" + std::to_string(c);
    for (std::uint32_t q = 0; q < n_procs[c]; ++q) {
      std::vector<StmtPtr> body;
      for (std::uint64_t i = 0, e = 1 + draw(4); i < e; ++i)
        body.push_back(random_stmt(random_stmt, 2));
      comp.procedures[ProcedureId{q}] = Procedure{"f" + std::to_string(q), seq_of(std::move(body))};
    }
    p.compartments[CompartmentId{c}] = std::move(comp);
  }
  p.main_compartment = CompartmentId{static_cast<std::uint32_t>(draw(n_comps))};
  p.main_procedure = ProcedureId{static_cast<std::uint32_t>(draw(n_procs[p.main_compartment.value]))};
  return p;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr combined
};

inline CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.output.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace test

#endif  // RETRACE_TESTS_HELPERS_HPP
