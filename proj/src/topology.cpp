#include "isca/topology.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace isca {

namespace {

// Rewrites unit-convention probabilities into per-state uniform ones.
void normalize_transitions(StateGraph& graph) {
  std::vector<int> out_degree(graph.states.size(), 0);
  for (const auto& t : graph.transitions) ++out_degree[t.from];
  for (auto& t : graph.transitions) t.logp = -std::log(static_cast<double>(out_degree[t.from]));
}

}  // namespace

bool StateGraph::is_final(int s) const {
  return std::find(finals.begin(), finals.end(), s) != finals.end();
}

StateGraph build_ctc_sequence_graph(std::span<const int> units, const UnitInventory& inventory,
                                    TransitionStyle style) {
  if (!inventory.blank()) throw InputError("CTC topology requires a blank in the inventory");
  const int blank = *inventory.blank();
  for (int u : units) {
    if (u < 0 || u >= inventory.size())
      throw InputError("unit index " + std::to_string(u) + " outside the inventory");
    if (u == blank) throw InputError("CTC label sequence must not contain the blank");
  }

  const int len = static_cast<int>(units.size());
  StateGraph graph;
  // state 0: non-emitting start; states 1..2L+1: emitting positions
  // (odd offsets are blanks, even offsets labels); last state: non-emitting end.
  graph.states.push_back({std::nullopt});
  std::vector<int> pos(2 * len + 1);
  for (int i = 0; i < 2 * len + 1; ++i) {
    pos[i] = graph.num_states();
    graph.states.push_back({i % 2 == 0 ? blank : units[i / 2]});
  }
  const int end = graph.num_states();
  graph.states.push_back({std::nullopt});
  graph.start = 0;
  graph.finals = {end};

  auto arc = [&graph](int from, int to) { graph.transitions.push_back({from, to, 0.0}); };

  arc(graph.start, pos[0]);
  if (len > 0) arc(graph.start, pos[1]);
  for (int i = 0; i < 2 * len + 1; ++i) {
    arc(pos[i], pos[i]);
    if (i + 1 <= 2 * len) arc(pos[i], pos[i + 1]);
    // skip over a blank, unless the two labels are identical
    if (i % 2 == 1 && i + 2 <= 2 * len && units[i / 2] != units[i / 2 + 1])
      arc(pos[i], pos[i + 2]);
  }
  arc(pos[2 * len], end);
  if (len > 0) arc(pos[2 * len - 1], end);

  if (style == TransitionStyle::normalized) normalize_transitions(graph);
  return graph;
}

StateGraph build_hmm_sequence_graph(std::span<const int> units, int states_per_unit,
                                    TransitionStyle style,
                                    std::optional<double> self_loop_prob) {
  if (units.empty()) throw InputError("HMM sequence graph needs at least one unit");
  if (states_per_unit < 1) throw InputError("states_per_unit must be >= 1");
  if (self_loop_prob && !(*self_loop_prob > 0.0 && *self_loop_prob < 1.0))
    throw InputError("self-loop probability must be in (0,1)");

  StateGraph graph;
  graph.states.push_back({std::nullopt});
  graph.start = 0;
  const double loop_logp = self_loop_prob ? std::log(*self_loop_prob) : 0.0;
  const double fwd_logp = self_loop_prob ? std::log1p(-*self_loop_prob) : 0.0;

  int prev = graph.start;
  bool prev_is_start = true;
  for (int u : units) {
    for (int k = 0; k < states_per_unit; ++k) {
      int s = graph.num_states();
      graph.states.push_back({u});
      graph.transitions.push_back({prev, s, prev_is_start ? 0.0 : fwd_logp});
      graph.transitions.push_back({s, s, loop_logp});
      prev = s;
      prev_is_start = false;
    }
  }
  const int end = graph.num_states();
  graph.states.push_back({std::nullopt});
  graph.transitions.push_back({prev, end, fwd_logp});
  graph.finals = {end};

  if (!self_loop_prob && style == TransitionStyle::normalized) normalize_transitions(graph);
  return graph;
}

void validate_graph(const StateGraph& graph) {
  const int n = graph.num_states();
  if (n == 0) throw std::logic_error("graph has no states");
  if (graph.start < 0 || graph.start >= n) throw std::logic_error("start state out of range");
  if (graph.is_emitting(graph.start)) throw std::logic_error("start state must be non-emitting");
  if (graph.finals.empty()) throw std::logic_error("graph has no final state");

  std::vector<std::vector<int>> fwd(n), bwd(n);
  for (const auto& t : graph.transitions) {
    if (t.from < 0 || t.from >= n || t.to < 0 || t.to >= n)
      throw std::logic_error("transition endpoint out of range");
    if (t.logp > 1e-12) throw std::logic_error("transition log-probability above 0");
    fwd[t.from].push_back(t.to);
    bwd[t.to].push_back(t.from);
  }

  auto closure = [n](const std::vector<std::vector<int>>& adj, const std::vector<int>& seeds) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack(seeds);
    for (int s : seeds) seen[s] = true;
    while (!stack.empty()) {
      int s = stack.back();
      stack.pop_back();
      for (int t : adj[s])
        if (!seen[t]) {
          seen[t] = true;
          stack.push_back(t);
        }
    }
    return seen;
  };
  auto reachable = closure(fwd, {graph.start});
  auto coreachable = closure(bwd, graph.finals);
  for (int s = 0; s < n; ++s) {
    if (!reachable[s]) throw std::logic_error("state " + std::to_string(s) + " unreachable");
    if (!coreachable[s])
      throw std::logic_error("state " + std::to_string(s) + " cannot reach a final state");
  }

  // Outgoing mass: either every arc is log 1.0 (the unit convention) or the
  // arcs from each state sum to 1 in probability.
  std::vector<double> out_mass(n, 0.0);
  std::vector<bool> all_unit(n, true);
  std::vector<bool> has_out(n, false);
  for (const auto& t : graph.transitions) {
    out_mass[t.from] += std::exp(t.logp);
    if (t.logp != 0.0) all_unit[t.from] = false;
    has_out[t.from] = true;
  }
  for (int s = 0; s < n; ++s) {
    if (!has_out[s]) {
      if (!graph.is_final(s))
        throw std::logic_error("non-final state " + std::to_string(s) + " has no outgoing arcs");
      continue;
    }
    if (!all_unit[s] && std::abs(out_mass[s] - 1.0) > 1e-6)
      throw std::logic_error("outgoing probabilities of state " + std::to_string(s) +
                             " sum to " + format_double(out_mass[s]));
  }
}

void dump_graph(const StateGraph& graph, const UnitInventory& inventory, std::ostream& out) {
  for (const auto& t : graph.transitions) {
    const auto& emission = graph.states[t.to].emission;
    out << t.from << ' ' << t.to << ' ' << format_double(t.logp) << ' '
        << (emission ? inventory.label(*emission) : std::string("-")) << '\n';
  }
}

}  // namespace isca
