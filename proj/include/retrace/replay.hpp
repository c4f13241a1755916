#ifndef RETRACE_REPLAY_HPP
#define RETRACE_REPLAY_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "retrace/passes.hpp"
#include "retrace/tree.hpp"

namespace retrace {

/// Bookkeeping carried by the replay semantics: the current location per
/// compartment (meaningful from level 2 on) and the abstract cross-compartment
/// call stack (from level 3 on).
struct GhostState {
  std::map<CompartmentId, NodeId> loc;
  AbstractStack stack;
  friend bool operator==(const GhostState&, const GhostState&) = default;
};

struct StepError {
  enum class Kind { NoBranch, StackMismatch, LocMismatch };
  Kind kind = Kind::NoBranch;
  CompartmentId compartment;
  Event event;

  std::string message() const {
    switch (kind) {
      case Kind::NoBranch:
        return "no branch for the next event in compartment " +
               std::to_string(compartment.value);
      case Kind::StackMismatch: return "return does not match the top stack frame";
      case Kind::LocMismatch:
        return "ghost location disagrees with the node id of compartment " +
               std::to_string(compartment.value);
    }
    return "";
  }
};

namespace detail {

template <class A>
struct ReplayTraits;

template <>
struct ReplayTraits<Unit> {
  static constexpr bool has_loc = false;
  static constexpr bool has_stack = false;
};

template <>
struct ReplayTraits<NodeId> {
  static constexpr bool has_loc = true;
  static constexpr bool has_stack = false;
  static NodeId id(const NodeId& a) { return a; }
};

template <>
struct ReplayTraits<StackAnnot> {
  static constexpr bool has_loc = true;
  static constexpr bool has_stack = true;
  static NodeId id(const StackAnnot& a) { return a.id; }
};

}  // namespace detail

/// Replay state for the tree levels 1-3. Trees are reduced as execution
/// proceeds: each entry is always a subtree of the original tree.
template <class A>
struct TreeReplayState {
  Trace trace;
  std::size_t consumed = 0;
  std::map<CompartmentId, Tree<A>> trees;
  GhostState ghost;

  bool done() const { return consumed == trace.size(); }
  const Event& next_event() const { return trace[consumed]; }
};

/// Replay state for level 4. The rule table is never reduced.
struct FlatReplayState {
  Trace trace;
  std::size_t consumed = 0;
  FlatRuleTable rules;
  GhostState ghost;

  bool done() const { return consumed == trace.size(); }
  const Event& next_event() const { return trace[consumed]; }
};

namespace detail {

// Shared stack side conditions of levels 3 and 4.
inline Result<void, StepError> apply_stack_conditions(GhostState& ghost, const Event& e) {
  using R = Result<void, StepError>;
  if (e.kind == EventKind::Call) {
    ghost.stack.push_back(Frame{e.src, e.proc, e.dst});
  } else {
    if (ghost.stack.empty() || ghost.stack.back().caller != e.dst ||
        ghost.stack.back().callee != e.src)
      return R::err(StepError{StepError::Kind::StackMismatch, e.src, e});
    ghost.stack.pop_back();
  }
  return R::ok();
}

}  // namespace detail

/// One reduction of the tree semantics: both involved compartments must have
/// a branch labeled by the next event; both trees are replaced by the
/// children. From level 2 on the ghost locations must match the node ids of
/// the traversed edge; from level 3 on the call stack side conditions apply.
template <class A>
Result<TreeReplayState<A>, StepError> step(TreeReplayState<A> s) {
  using R = Result<TreeReplayState<A>, StepError>;
  using T = detail::ReplayTraits<A>;
  const Event e = s.next_event();
  for (CompartmentId c : {e.src, e.dst}) {
    auto it = s.trees.find(c);
    if (it == s.trees.end())
      return R::err(StepError{StepError::Kind::NoBranch, c, e});
    Tree<A>& tree = it->second;
    auto branch = std::find_if(tree.branches.begin(), tree.branches.end(),
                               [&](const Branch<A>& b) { return b.label == e; });
    if (branch == tree.branches.end())
      return R::err(StepError{StepError::Kind::NoBranch, c, e});
    if constexpr (T::has_loc) {
      if (s.ghost.loc.at(c) != T::id(tree.value))
        return R::err(StepError{StepError::Kind::LocMismatch, c, e});
      s.ghost.loc[c] = T::id(branch->child.value);
    }
    tree = std::move(branch->child);
  }
  if constexpr (T::has_stack) {
    if (auto r = detail::apply_stack_conditions(s.ghost, e); !r) return R::err(r.error());
  }
  ++s.consumed;
  return R::ok(std::move(s));
}

/// Level-4 reduction: both compartments need a matching rule starting at
/// their current ghost location; locations move to the rule targets and the
/// stack side conditions of level 3 apply unchanged.
inline Result<FlatReplayState, StepError> step(FlatReplayState s) {
  using R = Result<FlatReplayState, StepError>;
  const Event e = s.next_event();
  for (CompartmentId c : {e.src, e.dst}) {
    auto it = s.rules.find(c);
    if (it == s.rules.end()) return R::err(StepError{StepError::Kind::NoBranch, c, e});
    const NodeId at = s.ghost.loc.at(c);
    auto rule = std::find_if(it->second.begin(), it->second.end(), [&](const FlatRule& r) {
      return r.from == at && r.event == e;
    });
    if (rule == it->second.end())
      return R::err(StepError{StepError::Kind::NoBranch, c, e});
    s.ghost.loc[c] = rule->to;
  }
  if (auto r = detail::apply_stack_conditions(s.ghost, e); !r) return R::err(r.error());
  ++s.consumed;
  return R::ok(std::move(s));
}

struct ReplayReport {
  StepError error;
  std::size_t position = 0;
  GhostState ghost;

  std::string message() const {
    return error.message() + " at position " + std::to_string(position);
  }
};

/// Initial replay state for trace `i`: the shared context trees plus the
/// program trees of that index, all ghost locations at the root.
template <class A>
TreeReplayState<A> make_replay_state(const LevelProgram<A>& prog, std::size_t i, Trace m) {
  TreeReplayState<A> s;
  s.trace = std::move(m);
  s.trees = prog.context_trees;
  if (i < prog.program_trees.size())
    for (const auto& [c, t] : prog.program_trees[i]) s.trees[c] = t;
  for (const auto& [c, t] : s.trees) s.ghost.loc[c] = NodeId{0};
  return s;
}

inline FlatReplayState make_replay_state(const FlatProgram& prog, std::size_t i, Trace m) {
  FlatReplayState s;
  s.trace = std::move(m);
  s.rules = prog.table_for_trace(i);
  for (const auto& [c, rules] : s.rules) s.ghost.loc[c] = NodeId{0};
  return s;
}

namespace detail {

template <class State>
Result<void, ReplayReport> run_replay(State s) {
  using R = Result<void, ReplayReport>;
  while (!s.done()) {
    const std::size_t pos = s.consumed;
    GhostState ghost = s.ghost;
    auto next = step(std::move(s));
    if (!next)
      return R::err(ReplayReport{next.error(), pos, std::move(ghost)});
    s = std::move(next).value();
  }
  return R::ok();
}

}  // namespace detail

/// Replays trace `m` against the level-appropriate program; ok iff every
/// event is consumed.
template <class A>
Result<void, ReplayReport> replay(const LevelProgram<A>& prog, std::size_t i, Trace m) {
  return detail::run_replay(make_replay_state(prog, i, std::move(m)));
}

inline Result<void, ReplayReport> replay(const FlatProgram& prog, std::size_t i, Trace m) {
  return detail::run_replay(make_replay_state(prog, i, std::move(m)));
}

}  // namespace retrace

#endif  // RETRACE_REPLAY_HPP
