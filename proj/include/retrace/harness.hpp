#ifndef RETRACE_HARNESS_HPP
#define RETRACE_HARNESS_HPP

#include <array>
#include <cassert>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "retrace/codegen.hpp"
#include "retrace/replay.hpp"
#include "retrace/trace_io.hpp"

namespace retrace {

/// Step budget for running a back-translated program: each traced event costs
/// a bounded number of internal steps in generated code.
inline std::uint64_t default_step_bound(const TraceSet& s) {
  return 10ull * (1 + s.total_events()) * 4ull;
}

struct CheckOutcome {
  std::string name;
  bool ok = true;
  std::string detail;
};

struct LevelsReport {
  std::optional<WellFormednessError> well_formed_error;
  std::optional<PassError> pass_error;
  std::vector<CheckOutcome> invariants;
  // matrix[i][k]: replay of trace i at level k+1
  std::vector<std::array<CheckOutcome, 4>> matrix;

  bool all_ok() const {
    if (well_formed_error || pass_error) return false;
    for (const CheckOutcome& c : invariants)
      if (!c.ok) return false;
    for (const auto& row : matrix)
      for (const CheckOutcome& c : row)
        if (!c.ok) return false;
    return true;
  }

  std::string format() const {
    std::string out;
    if (well_formed_error) {
      out += "well-formed: error: " + well_formed_error->message() + "\n";
      return out;
    }
    out += "well-formed: ok\n";
    if (pass_error) {
      out += "pass error: " + pass_error->message() + "\n";
      return out;
    }
    for (const CheckOutcome& c : invariants) {
      out += "invariant " + c.name + ": " + (c.ok ? "ok" : "error: " + c.detail) + "\n";
    }
    out += "replay levels (rows = traces, columns = levels 1-4):\n";
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      out += "  trace " + std::to_string(i) + ":";
      for (const CheckOutcome& c : matrix[i]) out += c.ok ? " ok" : " ERR";
      for (const CheckOutcome& c : matrix[i])
        if (!c.ok) out += "  [" + c.name + ": " + c.detail + "]";
      out += "\n";
    }
    return out;
  }
};

namespace detail {

// Oracle for the stack annotations: recompute the fold along the root path
// of every node from scratch and compare with the stored snapshot.
inline bool snapshots_match_path_fold(const Tree<StackAnnot>& t, Trace path_so_far,
                                      std::string& detail) {
  AbstractStack expect;
  for (const Event& e : path_so_far) {
    if (e.kind == EventKind::Call) {
      expect.push_back(Frame{e.src, e.proc, e.dst});
    } else {
      if (expect.empty()) return false;
      expect.pop_back();
    }
  }
  if (t.value.stack != expect) {
    detail = "snapshot of node " + std::to_string(t.value.id.value) +
             " differs from the path fold";
    return false;
  }
  for (const Branch<StackAnnot>& b : t.branches) {
    Trace next = path_so_far;
    next.push_back(b.label);
    if (!snapshots_match_path_fold(b.child, std::move(next), detail)) return false;
  }
  return true;
}

template <class A, class Fn>
void for_each_tree(const LevelProgram<A>& prog, Fn&& fn) {
  for (const auto& [c, t] : prog.context_trees) fn(c, t, std::string("context"));
  for (std::size_t i = 0; i < prog.program_trees.size(); ++i)
    for (const auto& [c, t] : prog.program_trees[i])
      fn(c, t, "program trace " + std::to_string(i));
}

}  // namespace detail

/// Builds all four levels and reports every structural invariant plus the
/// replay matrix (trace x level).
inline LevelsReport verify_all_levels(const TraceSet& s) {
  LevelsReport report;
  if (auto wf = check_well_formed(s); !wf) {
    report.well_formed_error = wf.error();
    return report;
  }
  auto pipeline_result = build_pipeline(s);
  if (!pipeline_result) {
    const PipelineError& e = pipeline_result.error();
    if (std::holds_alternative<WellFormednessError>(e.cause))
      report.well_formed_error = std::get<WellFormednessError>(e.cause);
    else
      report.pass_error = std::get<PassError>(e.cause);
    return report;
  }
  const Pipeline& p = pipeline_result.value();

  CheckOutcome det{"deterministic-trees", true, ""};
  detail::for_each_tree(p.level1, [&](CompartmentId c, const Tree<Unit>& t, const std::string& where) {
    if (det.ok && !deterministic_tree(t)) {
      det.ok = false;
      det.detail = "compartment " + s.names[c.value] + " (" + where + ")";
    }
  });
  report.invariants.push_back(det);

  CheckOutcome uniq{"unique-current-tree", true, ""};
  for (const auto& [c, t] : p.level1.context_trees)
    if (uniq.ok && !unique_current_tree(c, t)) {
      uniq.ok = false;
      uniq.detail = "compartment " + s.names[c.value];
    }
  report.invariants.push_back(uniq);

  CheckOutcome linear{"linear-program-trees", true, ""};
  for (std::size_t i = 0; i < p.level1.program_trees.size(); ++i)
    for (const auto& [c, t] : p.level1.program_trees[i])
      if (linear.ok && !tree_is_linear(t)) {
        linear.ok = false;
        linear.detail = "compartment " + s.names[c.value] + ", trace " + std::to_string(i);
      }
  report.invariants.push_back(linear);

  CheckOutcome ids{"unique-node-ids", true, ""};
  detail::for_each_tree(p.level2, [&](CompartmentId c, const Tree<NodeId>& t, const std::string& where) {
    if (ids.ok && !unique_ids(t)) {
      ids.ok = false;
      ids.detail = "compartment " + s.names[c.value] + " (" + where + ")";
    }
  });
  report.invariants.push_back(ids);

  CheckOutcome snaps{"stack-snapshots", true, ""};
  detail::for_each_tree(p.level3, [&](CompartmentId c, const Tree<StackAnnot>& t, const std::string& where) {
    std::string why;
    if (snaps.ok && !detail::snapshots_match_path_fold(t, Trace{}, why)) {
      snaps.ok = false;
      snaps.detail = "compartment " + s.names[c.value] + " (" + where + "): " + why;
    }
  });
  report.invariants.push_back(snaps);

  CheckOutcome flat{"flat-uniqueness", true, ""};
  if (auto u = check_flat_uniqueness(p.level4.context_rules); !u) {
    flat.ok = false;
    flat.detail = u.error().message();
  }
  for (const FlatRuleTable& table : p.level4.program_rules)
    if (flat.ok)
      if (auto u = check_flat_uniqueness(table); !u) {
        flat.ok = false;
        flat.detail = u.error().message();
      }
  report.invariants.push_back(flat);

  report.matrix.resize(s.traces.size());
  for (std::size_t i = 0; i < s.traces.size(); ++i) {
    const Trace& m = s.traces[i];
    const std::array<Result<void, ReplayReport>, 4> cells = {
        replay(p.level1, i, m), replay(p.level2, i, m), replay(p.level3, i, m),
        replay(p.level4, i, m)};
    for (std::size_t k = 0; k < 4; ++k) {
      CheckOutcome& cell = report.matrix[i][k];
      cell.name = "level " + std::to_string(k + 1);
      if (!cells[k]) {
        cell.ok = false;
        cell.detail = cells[k].error().message();
      }
    }
  }
  return report;
}

struct EndToEndReport {
  std::optional<std::string> build_error;

  struct TraceOutcome {
    bool emitted_exact = true;
    bool halted = true;
    bool ghost_agreement = true;
    std::size_t first_mismatch = 0;
    std::size_t emitted_events = 0;
    std::string detail;

    bool ok() const { return emitted_exact && halted && ghost_agreement; }
  };
  std::vector<TraceOutcome> traces;

  bool all_ok() const {
    if (build_error) return false;
    for (const TraceOutcome& t : traces)
      if (!t.ok()) return false;
    return true;
  }

  std::string format() const {
    std::string out = "end-to-end:\n";
    if (build_error) {
      out += "  build error: " + *build_error + "\n";
      return out;
    }
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const TraceOutcome& t = traces[i];
      out += "  trace " + std::to_string(i) + ": ";
      if (t.ok())
        out += "ok (" + std::to_string(t.emitted_events) + " events, halted)\n";
      else
        out += "error: " + t.detail + "\n";
    }
    return out;
  }
};

/// Runs the whole back-translated program for every trace index: the emitted
/// trace must equal m_i exactly and the program must halt. Each compartment's
/// LOC slot is compared in lock step against the ghost location of the
/// level-4 replay synchronized on the same consumed prefix; the event's
/// source is expected to have written its new location already, everyone else
/// still holds the pre-event location.
inline EndToEndReport verify_end_to_end(const TraceSet& s) {
  EndToEndReport report;
  auto bt = back_translate(s);
  if (!bt) {
    report.build_error = bt.error().message();
    return report;
  }
  auto pipeline = build_pipeline(s);
  assert(pipeline);
  const FlatProgram& flat = pipeline.value().level4;
  const std::uint64_t bound = default_step_bound(s);

  report.traces.resize(bt.value().programs.size());
  for (std::size_t i = 0; i < bt.value().programs.size(); ++i) {
    EndToEndReport::TraceOutcome& out = report.traces[i];
    const Trace& expected = s.traces[i];
    const SourceProgram whole = link(s, bt.value().context, bt.value().programs[i]);
    FlatReplayState sync = make_replay_state(flat, i, expected);
    MachineState ms = initial_state(whole);
    std::uint64_t steps = 0;
    while (!ms.halted) {
      if (steps >= bound) {
        out.halted = false;
        out.detail = "step bound exceeded after " + std::to_string(out.emitted_events) +
                     " events";
        break;
      }
      auto r = step_source(whole, std::move(ms));
      ++steps;
      if (!r) {
        out.halted = false;
        out.detail = "stuck: " + r.error().message();
        break;
      }
      if (r.value().event) {
        const Event e = *r.value().event;
        if (out.emitted_events >= expected.size() || !(e == expected[out.emitted_events])) {
          out.emitted_exact = false;
          out.first_mismatch = out.emitted_events;
          out.detail = "emission mismatch at position " + std::to_string(out.emitted_events) +
                       ": expected " +
                       (out.emitted_events < expected.size()
                            ? format_event(s, expected[out.emitted_events])
                            : std::string("halt")) +
                       ", emitted " + format_event(s, e);
          break;
        }
        const GhostState pre = sync.ghost;
        auto advanced = step(std::move(sync));
        if (!advanced) {
          out.ghost_agreement = false;
          out.detail = "level-4 replay rejected the emitted event: " +
                       advanced.error().message();
          break;
        }
        sync = std::move(advanced).value();
        for (const auto& [c, mem] : r.value().state.mem) {
          const NodeId want = (c == e.src) ? sync.ghost.loc.at(c) : pre.loc.at(c);
          if (mem.loc != static_cast<std::int64_t>(want.value)) {
            out.ghost_agreement = false;
            out.detail = "loc slot of " + s.names[c.value] + " is " +
                         std::to_string(mem.loc) + ", ghost expects " +
                         std::to_string(want.value) + " at event " +
                         std::to_string(out.emitted_events);
            break;
          }
        }
        if (!out.ghost_agreement) break;
        ++out.emitted_events;
      }
      ms = std::move(r.value().state);
    }
    if (!out.ok()) continue;
    if (out.emitted_events != expected.size()) {
      out.emitted_exact = false;
      out.first_mismatch = out.emitted_events;
      out.detail = "program halted after " + std::to_string(out.emitted_events) +
                   " events, expected " + std::to_string(expected.size());
      continue;
    }
    for (const auto& [c, mem] : ms.mem) {
      if (mem.loc != static_cast<std::int64_t>(sync.ghost.loc.at(c).value)) {
        out.ghost_agreement = false;
        out.detail = "final loc slot of " + s.names[c.value] + " is " +
                     std::to_string(mem.loc) + ", ghost expects " +
                     std::to_string(sync.ghost.loc.at(c).value);
        break;
      }
    }
  }
  return report;
}

struct GenParams {
  std::uint32_t trace_count = 4;
  std::uint32_t max_len = 16;
  std::uint32_t compartments = 4;
  std::uint32_t procs = 2;
};

namespace detail {

struct GenDecision {
  enum class Kind { Exit, Call, Return };
  Kind kind = Kind::Exit;
  CompartmentId callee;
  ProcedureId proc;
  std::int64_t payload = 0;
};

}  // namespace detail

/// Deterministically constructs a well-formed trace set by simulating
/// abstract behaviors. Context compartments share one strategy memoized on
/// their filtered history, which realizes the determinacy clause by
/// construction; program compartments decide independently per trace index.
/// Calls only target declared procedures and returns only happen with a
/// nonempty stack, so the structural clauses hold as well.
///
/// Two extra constraints keep every trace exactly reproducible by the
/// back-translated whole program:
///   - call payloads are unique within the set, so no two distinct incoming
///     calls are indistinguishable to the callee;
///   - a trace may end only with a program compartment in control or at a
///     point where the shared context strategy exits. When the length budget
///     runs out mid-flight, already-memoized context decisions are still
///     followed (the generated context cannot stop early), so traces may
///     overshoot max_len by the tail of an earlier trace.
inline TraceSet generate_trace_set(std::uint64_t seed, const GenParams& params) {
  std::mt19937_64 rng(seed ^ 0x9E3779B97F4A7C15ull);
  const auto draw = [&](std::uint64_t n) -> std::uint64_t { return n == 0 ? 0 : rng() % n; };

  TraceSet s;
  const std::uint32_t n = std::max<std::uint32_t>(1, params.compartments);
  const std::uint32_t procs = std::max<std::uint32_t>(1, params.procs);
  for (std::uint32_t i = 0; i < n; ++i) {
    s.names.push_back("C" + std::to_string(i));
    s.roles.push_back(draw(2) == 0 ? Role::Context : Role::Program);
    std::vector<std::string> ps;
    for (std::uint32_t k = 0; k < procs; ++k) ps.push_back("p" + std::to_string(k));
    s.procedures.push_back(std::move(ps));
  }
  s.main = CompartmentId{static_cast<std::uint32_t>(draw(n))};

  constexpr std::size_t kDepthCap = 8;
  std::int64_t next_call_payload = 0;
  using detail::GenDecision;
  const auto fresh_decision = [&](CompartmentId cur, const AbstractStack& stack,
                                  bool budget_left) {
    GenDecision d;
    if (!budget_left) return d;  // Exit
    const bool can_call = n >= 2 && stack.size() < kDepthCap;
    const bool can_return = !stack.empty();
    const std::uint64_t r = draw(100);
    if (r < 50 && can_call) {
      d.kind = GenDecision::Kind::Call;
      std::uint32_t callee = static_cast<std::uint32_t>(draw(n - 1));
      if (callee >= cur.value) ++callee;
      d.callee = CompartmentId{callee};
      d.proc = ProcedureId{static_cast<std::uint32_t>(draw(procs))};
      d.payload = next_call_payload++;
    } else if (r < 85 && can_return) {
      d.kind = GenDecision::Kind::Return;
      d.payload = static_cast<std::int64_t>(draw(201)) - 100;
    } else {
      d.kind = GenDecision::Kind::Exit;
    }
    return d;
  };

  // context strategies: one memo per compartment, shared across trace indices
  std::vector<std::map<Trace, GenDecision>> memo(n);

  for (std::uint32_t k = 0; k < params.trace_count; ++k) {
    Trace m;
    std::vector<Trace> filtered(n);
    AbstractStack stack;
    CompartmentId cur = s.main;
    while (true) {
      const bool budget_left = m.size() < params.max_len;
      GenDecision d;
      if (s.roles[cur.value] == Role::Context) {
        auto& table = memo[cur.value];
        auto it = table.find(filtered[cur.value]);
        if (it != table.end()) {
          d = it->second;
        } else {
          d = fresh_decision(cur, stack, budget_left);
          table.emplace(filtered[cur.value], d);
        }
      } else {
        if (!budget_left) break;  // program in control: safe stopping point
        d = fresh_decision(cur, stack, true);
      }
      if (d.kind == GenDecision::Kind::Exit) break;
      Event e;
      if (d.kind == GenDecision::Kind::Call) {
        e = make_call(cur, d.callee, d.proc, d.payload);
        stack.push_back(Frame{cur, d.proc, d.callee});
      } else {
        assert(!stack.empty());
        e = make_return(cur, stack.back().caller, d.payload);
        stack.pop_back();
      }
      m.push_back(e);
      filtered[e.src.value].push_back(e);
      filtered[e.dst.value].push_back(e);
      cur = e.dst;
    }
    s.traces.push_back(std::move(m));
  }
  return s;
}

}  // namespace retrace

#endif  // RETRACE_HARNESS_HPP
