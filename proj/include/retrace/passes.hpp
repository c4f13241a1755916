#ifndef RETRACE_PASSES_HPP
#define RETRACE_PASSES_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "retrace/tree.hpp"

namespace retrace {

/// Location identifier, unique within one compartment's tree. The root is 0.
struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

namespace detail {

inline Tree<NodeId> number_nodes_from(const Tree<Unit>& t, std::uint32_t& next) {
  Tree<NodeId> out;
  out.value = NodeId{next++};
  out.branches.reserve(t.branches.size());
  for (const Branch<Unit>& b : t.branches)
    out.branches.push_back(Branch<NodeId>{b.label, number_nodes_from(b.child, next)});
  return out;
}

}  // namespace detail

/// Pass (b): assign pre-order depth-first numbers, root 0, children in
/// sibling order. Shape and labels are unchanged.
inline Tree<NodeId> number_nodes(const Tree<Unit>& t) {
  std::uint32_t next = 0;
  return detail::number_nodes_from(t, next);
}

namespace detail {

inline bool collect_ids(const Tree<NodeId>& t, std::set<std::uint32_t>& seen) {
  if (!seen.insert(t.value.value).second) return false;
  for (const Branch<NodeId>& b : t.branches)
    if (!collect_ids(b.child, seen)) return false;
  return true;
}

}  // namespace detail

inline bool unique_ids(const Tree<NodeId>& t) {
  std::set<std::uint32_t> seen;
  return detail::collect_ids(t, seen);
}

/// Level-3 node payload: the location plus the stack snapshot expected when
/// reaching that node. Snapshots are per-compartment: every frame involves
/// the compartment the tree belongs to.
struct StackAnnot {
  NodeId id;
  AbstractStack stack;
  friend bool operator==(const StackAnnot&, const StackAnnot&) = default;
};

struct PassError {
  CompartmentId compartment;
  NodeId node;
  std::string detail;

  std::string message() const {
    return "pass error at node " + std::to_string(node.value) + ": " + detail;
  }
};

namespace detail {

inline Result<Tree<StackAnnot>, PassError> annotate_from(const Tree<NodeId>& t,
                                                         CompartmentId c,
                                                         const AbstractStack& stack) {
  Tree<StackAnnot> out;
  out.value = StackAnnot{t.value, stack};
  out.branches.reserve(t.branches.size());
  for (const Branch<NodeId>& b : t.branches) {
    AbstractStack child_stack = stack;
    if (b.label.kind == EventKind::Call) {
      child_stack.push_back(Frame{b.label.src, b.label.proc, b.label.dst});
    } else {
      if (child_stack.empty() || child_stack.back().caller != b.label.dst ||
          child_stack.back().callee != b.label.src)
        return Result<Tree<StackAnnot>, PassError>::err(
            PassError{c, b.child.value, "return edge does not match the top frame"});
      child_stack.pop_back();
    }
    auto sub = annotate_from(b.child, c, child_stack);
    if (!sub) return sub;
    out.branches.push_back(Branch<StackAnnot>{b.label, std::move(sub).value()});
  }
  return Result<Tree<StackAnnot>, PassError>::ok(std::move(out));
}

}  // namespace detail

/// Pass (c): attach stack snapshots. The root gets the empty stack; call
/// edges push (src, proc, dst) and return edges pop the matching frame. A
/// mismatched return edge signals a broken earlier pass, not bad user input:
/// well-formedness precludes it.
inline Result<Tree<StackAnnot>, PassError> annotate_stacks(const Tree<NodeId>& t,
                                                           CompartmentId c) {
  return detail::annotate_from(t, c, AbstractStack{});
}

struct FlatRule {
  NodeId from;
  Event event;
  NodeId to;
  friend bool operator==(const FlatRule&, const FlatRule&) = default;
};

namespace detail {

inline void flatten_into(const Tree<StackAnnot>& t, std::vector<FlatRule>& out) {
  for (const Branch<StackAnnot>& b : t.branches) {
    out.push_back(FlatRule{t.value.id, b.label, b.child.value.id});
    flatten_into(b.child, out);
  }
}

}  // namespace detail

/// Pass (d): one rule per tree edge, in pre-order edge order (an edge is
/// emitted before the edges of its subtree).
inline std::vector<FlatRule> flatten(const Tree<StackAnnot>& t) {
  std::vector<FlatRule> out;
  detail::flatten_into(t, out);
  return out;
}

inline std::vector<FlatRule> outgoing_rules(const std::vector<FlatRule>& rules,
                                            CompartmentId c) {
  std::vector<FlatRule> out;
  for (const FlatRule& r : rules)
    if (r.event.src == c) out.push_back(r);
  return out;
}

inline std::vector<FlatRule> incoming_call_rules(const std::vector<FlatRule>& rules,
                                                 CompartmentId c) {
  std::vector<FlatRule> out;
  for (const FlatRule& r : rules)
    if (r.event.dst == c && r.event.kind == EventKind::Call) out.push_back(r);
  return out;
}

inline std::vector<FlatRule> incoming_return_rules(const std::vector<FlatRule>& rules,
                                                   CompartmentId c) {
  std::vector<FlatRule> out;
  for (const FlatRule& r : rules)
    if (r.event.dst == c && r.event.kind == EventKind::Return) out.push_back(r);
  return out;
}

/// Per-compartment rule lists for one linked instance.
using FlatRuleTable = std::map<CompartmentId, std::vector<FlatRule>>;

struct UniquenessError {
  enum class Part { IncomingCalls, IncomingReturns, Outgoing };
  Part part = Part::Outgoing;
  CompartmentId compartment;
  std::string key;

  std::string message() const {
    const char* what = "";
    switch (part) {
      case Part::IncomingCalls: what = "incoming calls"; break;
      case Part::IncomingReturns: what = "incoming returns"; break;
      case Part::Outgoing: what = "outgoing"; break;
    }
    return std::string("rule table not functional for ") + what + " of compartment " +
           std::to_string(compartment.value) + " at key " + key;
  }
};

/// Checks the determinism keys of a compartment's rule list:
///   incoming calls keyed by (location, procedure, argument),
///   incoming returns keyed by (location, value),
///   outgoing events keyed by location alone.
inline Result<void, UniquenessError> check_flat_uniqueness(CompartmentId c,
                                                           const std::vector<FlatRule>& rules) {
  using R = Result<void, UniquenessError>;
  std::set<std::tuple<std::uint32_t, std::uint32_t, std::int64_t>> call_keys;
  std::set<std::tuple<std::uint32_t, std::int64_t>> return_keys;
  std::set<std::uint32_t> outgoing_keys;
  for (const FlatRule& r : rules) {
    if (r.event.src == c) {
      if (!outgoing_keys.insert(r.from.value).second)
        return R::err(UniquenessError{UniquenessError::Part::Outgoing, c,
                                      std::to_string(r.from.value)});
    } else if (r.event.kind == EventKind::Call) {
      if (!call_keys.insert({r.from.value, r.event.proc.value, r.event.payload}).second)
        return R::err(UniquenessError{UniquenessError::Part::IncomingCalls, c,
                                      "(" + std::to_string(r.from.value) + ", " +
                                          std::to_string(r.event.proc.value) + ", " +
                                          std::to_string(r.event.payload) + ")"});
    } else {
      if (!return_keys.insert({r.from.value, r.event.payload}).second)
        return R::err(UniquenessError{UniquenessError::Part::IncomingReturns, c,
                                      "(" + std::to_string(r.from.value) + ", " +
                                          std::to_string(r.event.payload) + ")"});
    }
  }
  return R::ok();
}

inline Result<void, UniquenessError> check_flat_uniqueness(const FlatRuleTable& table) {
  for (const auto& [c, rules] : table)
    if (auto r = check_flat_uniqueness(c, rules); !r) return r;
  return Result<void, UniquenessError>::ok();
}

/// Level 4: rule lists per compartment, context lists shared across trace
/// indices and program lists per index, mirroring LevelProgram.
struct FlatProgram {
  FlatRuleTable context_rules;
  std::vector<FlatRuleTable> program_rules;

  FlatRuleTable table_for_trace(std::size_t i) const {
    FlatRuleTable out = context_rules;
    if (i < program_rules.size())
      for (const auto& [c, rules] : program_rules[i]) out[c] = rules;
    return out;
  }
};

inline LevelProgram<NodeId> build_level2(const LevelProgram<Unit>& l1) {
  LevelProgram<NodeId> out;
  for (const auto& [c, t] : l1.context_trees) out.context_trees[c] = number_nodes(t);
  out.program_trees.resize(l1.program_trees.size());
  for (std::size_t i = 0; i < l1.program_trees.size(); ++i)
    for (const auto& [c, t] : l1.program_trees[i])
      out.program_trees[i][c] = number_nodes(t);
  return out;
}

inline Result<LevelProgram<StackAnnot>, PassError> build_level3(
    const LevelProgram<NodeId>& l2) {
  using R = Result<LevelProgram<StackAnnot>, PassError>;
  LevelProgram<StackAnnot> out;
  for (const auto& [c, t] : l2.context_trees) {
    auto a = annotate_stacks(t, c);
    if (!a) return R::err(a.error());
    out.context_trees[c] = std::move(a).value();
  }
  out.program_trees.resize(l2.program_trees.size());
  for (std::size_t i = 0; i < l2.program_trees.size(); ++i)
    for (const auto& [c, t] : l2.program_trees[i]) {
      auto a = annotate_stacks(t, c);
      if (!a) return R::err(a.error());
      out.program_trees[i][c] = std::move(a).value();
    }
  return R::ok(std::move(out));
}

inline FlatProgram build_level4(const LevelProgram<StackAnnot>& l3) {
  FlatProgram out;
  for (const auto& [c, t] : l3.context_trees) out.context_rules[c] = flatten(t);
  out.program_rules.resize(l3.program_trees.size());
  for (std::size_t i = 0; i < l3.program_trees.size(); ++i)
    for (const auto& [c, t] : l3.program_trees[i])
      out.program_rules[i][c] = flatten(t);
  return out;
}

struct PipelineError {
  std::variant<WellFormednessError, PassError> cause;

  std::string message() const {
    if (std::holds_alternative<WellFormednessError>(cause))
      return std::get<WellFormednessError>(cause).message();
    return std::get<PassError>(cause).message();
  }
};

/// All four intermediate representations of a trace set.
struct Pipeline {
  LevelProgram<Unit> level1;
  LevelProgram<NodeId> level2;
  LevelProgram<StackAnnot> level3;
  FlatProgram level4;
};

inline Result<Pipeline, PipelineError> build_pipeline(const TraceSet& s) {
  using R = Result<Pipeline, PipelineError>;
  Pipeline p;
  auto l1 = build_level1(s);
  if (!l1) return R::err(PipelineError{l1.error()});
  p.level1 = std::move(l1).value();
  p.level2 = build_level2(p.level1);
  auto l3 = build_level3(p.level2);
  if (!l3) return R::err(PipelineError{l3.error()});
  p.level3 = std::move(l3).value();
  p.level4 = build_level4(p.level3);
  return R::ok(std::move(p));
}

}  // namespace retrace

#endif  // RETRACE_PASSES_HPP
