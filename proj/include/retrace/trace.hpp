#ifndef RETRACE_TRACE_HPP
#define RETRACE_TRACE_HPP

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "retrace/result.hpp"

namespace retrace {

struct CompartmentId {
  std::uint32_t value = 0;
  friend auto operator<=>(const CompartmentId&, const CompartmentId&) = default;
};

/// Procedure identifier, scoped to the compartment that declares it.
struct ProcedureId {
  std::uint32_t value = 0;
  friend auto operator<=>(const ProcedureId&, const ProcedureId&) = default;
};

enum class EventKind { Call, Return };

/// A cross-compartment interaction (src != dst). `proc` is meaningful for
/// calls only and is fixed to 0 on returns so that equality is structural.
/// The payload is the call argument or the returned value.
struct Event {
  EventKind kind = EventKind::Call;
  CompartmentId src;
  CompartmentId dst;
  ProcedureId proc;
  std::int64_t payload = 0;
  friend auto operator<=>(const Event&, const Event&) = default;
};

inline Event make_call(CompartmentId src, CompartmentId dst, ProcedureId proc,
                       std::int64_t arg) {
  return Event{EventKind::Call, src, dst, proc, arg};
}

inline Event make_return(CompartmentId src, CompartmentId dst, std::int64_t value) {
  return Event{EventKind::Return, src, dst, ProcedureId{0}, value};
}

using Trace = std::vector<Event>;

/// Stack frame for a pending cross-compartment call: `caller` invoked `proc`
/// of `callee`.
struct Frame {
  CompartmentId caller;
  ProcedureId proc;
  CompartmentId callee;
  friend auto operator<=>(const Frame&, const Frame&) = default;
};

/// Call stack; the top frame is the back of the vector.
using AbstractStack = std::vector<Frame>;

enum class Role { Context, Program };

/// A finite set of finite trace prefixes plus the interface they run against:
/// compartment declarations with roles, the main compartment, and the
/// procedures each compartment exposes. Compartment ids index into `names`,
/// `roles` and `procedures`; procedure ids index into the per-compartment
/// name list.
struct TraceSet {
  std::vector<std::string> names;
  std::vector<Role> roles;
  std::vector<std::vector<std::string>> procedures;
  CompartmentId main;
  std::vector<Trace> traces;

  friend bool operator==(const TraceSet&, const TraceSet&) = default;

  std::size_t compartment_count() const { return names.size(); }

  bool declared(CompartmentId c) const { return c.value < names.size(); }

  bool is_context(CompartmentId c) const {
    return declared(c) && roles[c.value] == Role::Context;
  }

  std::vector<CompartmentId> compartments_with_role(Role r) const {
    std::vector<CompartmentId> out;
    for (std::uint32_t i = 0; i < names.size(); ++i)
      if (roles[i] == r) out.push_back(CompartmentId{i});
    return out;
  }

  std::vector<CompartmentId> context_compartments() const {
    return compartments_with_role(Role::Context);
  }
  std::vector<CompartmentId> program_compartments() const {
    return compartments_with_role(Role::Program);
  }

  std::size_t total_events() const {
    std::size_t n = 0;
    for (const Trace& m : traces) n += m.size();
    return n;
  }
};

/// True iff the trace starts at `main` and consecutive events chain control:
/// the source of each event is the destination of the previous one.
inline bool control_flow_ok(const Trace& m, CompartmentId main) {
  if (m.empty()) return true;
  if (m.front().src != main) return false;
  for (std::size_t k = 0; k + 1 < m.size(); ++k)
    if (m[k + 1].src != m[k].dst) return false;
  return true;
}

/// True iff `m` is consumable from stack `st`: calls push (src, proc, dst),
/// returns pop a top frame whose caller is the return's destination and whose
/// callee is the return's source.
inline bool wf_stack_trace(const Trace& m, AbstractStack st) {
  for (const Event& e : m) {
    if (e.kind == EventKind::Call) {
      st.push_back(Frame{e.src, e.proc, e.dst});
    } else {
      if (st.empty()) return false;
      const Frame& top = st.back();
      if (top.callee != e.src || top.caller != e.dst) return false;
      st.pop_back();
    }
  }
  return true;
}

/// Subsequence of `m` keeping exactly the events with src == c or dst == c.
inline Trace filter_for_compartment(const Trace& m, CompartmentId c) {
  Trace out;
  for (const Event& e : m)
    if (e.src == c || e.dst == c) out.push_back(e);
  return out;
}

struct WellFormednessError {
  enum class Clause {
    UndeclaredCompartment,
    ControlFlow,
    StackDiscipline,
    Determinacy,
    UndeclaredProcedure,
  };
  Clause clause = Clause::ControlFlow;
  std::size_t trace_index = 0;
  std::size_t position = 0;

  std::string message() const {
    const char* what = "";
    switch (clause) {
      case Clause::UndeclaredCompartment: what = "undeclared compartment"; break;
      case Clause::ControlFlow: what = "control flow violated"; break;
      case Clause::StackDiscipline: what = "stack discipline violated"; break;
      case Clause::Determinacy: what = "determinacy violated"; break;
      case Clause::UndeclaredProcedure: what = "undeclared procedure"; break;
    }
    return std::string(what) + " at trace " + std::to_string(trace_index) +
           ", position " + std::to_string(position);
  }
};

namespace detail {

// Trie over filtered events, used by the determinacy clause. Grafting a new
// branch at a node where the compartment has control and a (necessarily
// different) branch already exists is exactly the situation in which the
// merged call-return tree would lose the unique-next-event property.
struct DeterminacyTrie {
  std::vector<std::pair<Event, std::unique_ptr<DeterminacyTrie>>> children;

  DeterminacyTrie* find(const Event& e) {
    for (auto& [label, child] : children)
      if (label == e) return child.get();
    return nullptr;
  }

  DeterminacyTrie* append(const Event& e) {
    children.emplace_back(e, std::make_unique<DeterminacyTrie>());
    return children.back().second.get();
  }
};

}  // namespace detail

/// Gate for the whole pipeline. Checks, in order:
///   (0) every compartment mentioned in an event is declared;
///   (1) every trace chains control starting from main;
///   (2) every trace respects the call/return stack discipline;
///   (3) determinacy: whenever a context compartment has control and its
///       filtered history is shared between traces, the next event involving
///       it is the same; and when it does not have control, two distinct next
///       events must differ in what the compartment can observe (kind,
///       procedure, payload), since generated code cannot see the caller;
///   (4) every call targets a procedure declared by the callee.
/// The first violated clause is reported with trace index and event position.
inline Result<void, WellFormednessError> check_well_formed(const TraceSet& s) {
  using Err = WellFormednessError;
  using Clause = WellFormednessError::Clause;
  const auto fail = [](Clause c, std::size_t i, std::size_t k) {
    return Result<void, Err>::err(Err{c, i, k});
  };

  if (!s.declared(s.main)) return fail(Clause::UndeclaredCompartment, 0, 0);
  for (std::size_t i = 0; i < s.traces.size(); ++i)
    for (std::size_t k = 0; k < s.traces[i].size(); ++k) {
      const Event& e = s.traces[i][k];
      if (!s.declared(e.src) || !s.declared(e.dst) || e.src == e.dst)
        return fail(Clause::UndeclaredCompartment, i, k);
    }

  for (std::size_t i = 0; i < s.traces.size(); ++i) {
    const Trace& m = s.traces[i];
    if (m.empty()) continue;
    if (m.front().src != s.main) return fail(Clause::ControlFlow, i, 0);
    for (std::size_t k = 0; k + 1 < m.size(); ++k)
      if (m[k + 1].src != m[k].dst) return fail(Clause::ControlFlow, i, k + 1);
  }

  for (std::size_t i = 0; i < s.traces.size(); ++i) {
    AbstractStack st;
    const Trace& m = s.traces[i];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const Event& e = m[k];
      if (e.kind == EventKind::Call) {
        st.push_back(Frame{e.src, e.proc, e.dst});
      } else {
        if (st.empty() || st.back().callee != e.src || st.back().caller != e.dst)
          return fail(Clause::StackDiscipline, i, k);
        st.pop_back();
      }
    }
  }

  for (CompartmentId c : s.context_compartments()) {
    detail::DeterminacyTrie root;
    for (std::size_t i = 0; i < s.traces.size(); ++i) {
      detail::DeterminacyTrie* node = &root;
      bool in_control = (c == s.main);
      for (std::size_t k = 0; k < s.traces[i].size(); ++k) {
        const Event& e = s.traces[i][k];
        if (e.src != c && e.dst != c) continue;
        detail::DeterminacyTrie* child = node->find(e);
        if (child == nullptr) {
          if (in_control && !node->children.empty())
            return fail(Clause::Determinacy, i, k);
          if (!in_control) {
            // The compartment observes only (kind, proc, payload) of an
            // incoming event, never the caller. A sibling that is
            // indistinguishable from e must therefore be e itself.
            for (const auto& [label, sub] : node->children)
              if (label.kind == e.kind && label.proc == e.proc &&
                  label.payload == e.payload)
                return fail(Clause::Determinacy, i, k);
          }
          child = node->append(e);
        }
        node = child;
        in_control = (e.dst == c);
      }
    }
  }

  for (std::size_t i = 0; i < s.traces.size(); ++i)
    for (std::size_t k = 0; k < s.traces[i].size(); ++k) {
      const Event& e = s.traces[i][k];
      if (e.kind == EventKind::Call && e.proc.value >= s.procedures[e.dst.value].size())
        return fail(Clause::UndeclaredProcedure, i, k);
    }

  return Result<void, Err>::ok();
}

}  // namespace retrace

#endif  // RETRACE_TRACE_HPP
