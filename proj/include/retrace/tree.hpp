#ifndef RETRACE_TREE_HPP
#define RETRACE_TREE_HPP

#include <algorithm>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "retrace/trace.hpp"

namespace retrace {

using Unit = std::monostate;

template <class A>
struct Branch;

/// Event-labeled rose tree. Branch order is insertion order and is
/// significant: node numbering and rule emission follow it.
template <class A>
struct Tree {
  A value{};
  std::vector<Branch<A>> branches;

  friend bool operator==(const Tree&, const Tree&) = default;
};

template <class A>
struct Branch {
  Event label;
  Tree<A> child;

  friend bool operator==(const Branch&, const Branch&) = default;
};

/// The linear tree whose unique maximal path is labeled by `m` in order.
inline Tree<Unit> branch_of_trace(std::span<const Event> m) {
  Tree<Unit> t;
  Tree<Unit>* cur = &t;
  for (const Event& e : m) {
    cur->branches.push_back(Branch<Unit>{e, Tree<Unit>{}});
    cur = &cur->branches.back().child;
  }
  return t;
}

/// Merges `m` into `t`: walks existing branches while labels match, then
/// grafts the remainder as a new last sibling. Never duplicates a label
/// among siblings.
inline Tree<Unit> add_trace_to_tree(std::span<const Event> m, Tree<Unit> t) {
  Tree<Unit>* cur = &t;
  for (std::size_t k = 0; k < m.size(); ++k) {
    auto it = std::find_if(cur->branches.begin(), cur->branches.end(),
                           [&](const Branch<Unit>& b) { return b.label == m[k]; });
    if (it == cur->branches.end()) {
      cur->branches.push_back(Branch<Unit>{m[k], branch_of_trace(m.subspan(k + 1))});
      return t;
    }
    cur = &it->child;
  }
  return t;
}

inline Tree<Unit> tree_of_trace_list(std::span<const Trace> ms) {
  Tree<Unit> t;
  for (const Trace& m : ms) t = add_trace_to_tree(m, std::move(t));
  return t;
}

/// True iff at every node, a branch whose label is sourced at `c` is the last
/// sibling: when `c` has control it has exactly one possible next event.
template <class A>
bool unique_current_tree(CompartmentId c, const Tree<A>& t) {
  for (std::size_t k = 0; k < t.branches.size(); ++k) {
    if (!unique_current_tree(c, t.branches[k].child)) return false;
    if (t.branches[k].label.src == c && k + 1 != t.branches.size()) return false;
  }
  return true;
}

/// True iff no two sibling branches carry the same event label, recursively.
template <class A>
bool deterministic_tree(const Tree<A>& t) {
  for (std::size_t i = 0; i < t.branches.size(); ++i) {
    for (std::size_t j = i + 1; j < t.branches.size(); ++j)
      if (t.branches[i].label == t.branches[j].label) return false;
    if (!deterministic_tree(t.branches[i].child)) return false;
  }
  return true;
}

template <class A>
bool tree_is_linear(const Tree<A>& t) {
  const Tree<A>* cur = &t;
  while (!cur->branches.empty()) {
    if (cur->branches.size() > 1) return false;
    cur = &cur->branches.front().child;
  }
  return true;
}

template <class A>
std::size_t tree_edge_count(const Tree<A>& t) {
  std::size_t n = t.branches.size();
  for (const Branch<A>& b : t.branches) n += tree_edge_count(b.child);
  return n;
}

template <class A>
std::size_t tree_depth(const Tree<A>& t) {
  std::size_t d = 0;
  for (const Branch<A>& b : t.branches) d = std::max(d, 1 + tree_depth(b.child));
  return d;
}

/// True iff the events label a path starting at the root of `t`.
template <class A>
bool tree_has_root_path(const Tree<A>& t, std::span<const Event> path) {
  const Tree<A>* cur = &t;
  for (const Event& e : path) {
    auto it = std::find_if(cur->branches.begin(), cur->branches.end(),
                           [&](const Branch<A>& b) { return b.label == e; });
    if (it == cur->branches.end()) return false;
    cur = &it->child;
  }
  return true;
}

/// One tree per compartment. Context compartments share a single branching
/// tree built from all traces; program compartments get one linear tree per
/// trace index. The replayed program for trace i combines `context_trees`
/// with `program_trees[i]`.
template <class A>
struct LevelProgram {
  std::map<CompartmentId, Tree<A>> context_trees;
  std::vector<std::map<CompartmentId, Tree<A>>> program_trees;
};

/// Pass (a): from a well-formed trace set to per-compartment call-return
/// trees. Rejects ill-formed input.
inline Result<LevelProgram<Unit>, WellFormednessError> build_level1(const TraceSet& s) {
  if (auto wf = check_well_formed(s); !wf)
    return Result<LevelProgram<Unit>, WellFormednessError>::err(wf.error());
  LevelProgram<Unit> out;
  for (CompartmentId c : s.context_compartments()) {
    std::vector<Trace> filtered;
    filtered.reserve(s.traces.size());
    for (const Trace& m : s.traces) filtered.push_back(filter_for_compartment(m, c));
    out.context_trees[c] = tree_of_trace_list(filtered);
  }
  out.program_trees.resize(s.traces.size());
  for (std::size_t i = 0; i < s.traces.size(); ++i)
    for (CompartmentId c : s.program_compartments())
      out.program_trees[i][c] = branch_of_trace(filter_for_compartment(s.traces[i], c));
  return Result<LevelProgram<Unit>, WellFormednessError>::ok(std::move(out));
}

}  // namespace retrace

#endif  // RETRACE_TREE_HPP
