#ifndef RETRACE_DUMP_HPP
#define RETRACE_DUMP_HPP

#include <string>

#include "retrace/passes.hpp"
#include "retrace/trace_io.hpp"

namespace retrace {

namespace detail {

template <class A, class PayloadFn>
void outline_into(const TraceSet& s, const Tree<A>& t, const PayloadFn& payload,
                  int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const Branch<A>& b : t.branches) {
    out += pad + format_event(s, b.label) + " => " + payload(b.child.value) + "\n";
    outline_into(s, b.child, payload, indent + 2, out);
  }
}

template <class A, class PayloadFn>
std::string format_tree(const TraceSet& s, const Tree<A>& t, const std::string& header,
                        const PayloadFn& payload) {
  std::string out = header + "\n" + payload(t.value) + "\n";
  outline_into(s, t, payload, 2, out);
  return out;
}

inline std::string unit_payload(const Unit&) { return "*"; }
inline std::string id_payload(const NodeId& id) { return "#" + std::to_string(id.value); }
inline std::string annot_payload(const StackAnnot& a) {
  return "#" + std::to_string(a.id.value) + " (stack " + std::to_string(a.stack.size()) + ")";
}

template <class A, class PayloadFn>
std::string dump_trees(const TraceSet& s, const LevelProgram<A>& prog,
                       const PayloadFn& payload) {
  std::string out;
  for (const auto& [c, t] : prog.context_trees)
    out += format_tree(s, t, "tree " + s.names[c.value] + " (context)", payload);
  for (std::size_t i = 0; i < prog.program_trees.size(); ++i)
    for (const auto& [c, t] : prog.program_trees[i])
      out += format_tree(
          s, t, "tree " + s.names[c.value] + " (program, trace " + std::to_string(i) + ")",
          payload);
  return out;
}

inline std::string dump_rule_list(const TraceSet& s, const std::vector<FlatRule>& rules,
                                  const std::string& header) {
  std::string out = header + "\n";
  for (const FlatRule& r : rules)
    out += "  " + std::to_string(r.from.value) + " --" + format_event(s, r.event) + "--> " +
           std::to_string(r.to.value) + "\n";
  return out;
}

}  // namespace detail

/// Text outline of one intermediate level, stable byte-for-byte for a fixed
/// input (golden-test friendly).
inline std::string format_level_dump(const TraceSet& s, const Pipeline& p, int level) {
  switch (level) {
    case 1: return detail::dump_trees(s, p.level1, detail::unit_payload);
    case 2: return detail::dump_trees(s, p.level2, detail::id_payload);
    case 3: return detail::dump_trees(s, p.level3, detail::annot_payload);
    case 4: {
      std::string out;
      for (const auto& [c, rules] : p.level4.context_rules)
        out += detail::dump_rule_list(s, rules, "rules " + s.names[c.value] + " (context)");
      for (std::size_t i = 0; i < p.level4.program_rules.size(); ++i)
        for (const auto& [c, rules] : p.level4.program_rules[i])
          out += detail::dump_rule_list(
              s, rules,
              "rules " + s.names[c.value] + " (program, trace " + std::to_string(i) + ")");
      return out;
    }
    default: return "";
  }
}

}  // namespace retrace

#endif  // RETRACE_DUMP_HPP
