#ifndef ISCA_TOPOLOGY_HPP
#define ISCA_TOPOLOGY_HPP

#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "isca/types.hpp"

namespace isca {

struct GraphState {
  std::optional<int> emission;  // unit index; nullopt for non-emitting states
};

struct GraphTransition {
  int from = 0;
  int to = 0;
  double logp = 0.0;
};

// unit: every transition probability forced to 1.0 (log 0).
// normalized: outgoing probabilities of each state are uniform and sum to 1.
enum class TransitionStyle { unit, normalized };

// Acceptor over frame sequences. One non-emitting start and one non-emitting
// end state; every frame is consumed by entering an emitting state.
struct StateGraph {
  std::vector<GraphState> states;
  std::vector<GraphTransition> transitions;
  int start = 0;
  std::vector<int> finals;

  int num_states() const { return static_cast<int>(states.size()); }
  bool is_emitting(int s) const { return states[s].emission.has_value(); }
  bool is_final(int s) const;
};

// Blank-interleaved topology for a label sequence of length L: 2L+1 emitting
// positions (blank, l1, blank, l2, ..., blank). Blanks are skippable, every
// emitting state has a self-loop, and a repeated label forces the
// intervening blank.
StateGraph build_ctc_sequence_graph(std::span<const int> units, const UnitInventory& inventory,
                                    TransitionStyle style = TransitionStyle::unit);

// Left-to-right chain, states_per_unit emitting states per unit, each with a
// self-loop and a forward arc. self_loop_prob, when given, overrides the
// transition style with ln(p) self-loops and ln(1-p) forward arcs.
StateGraph build_hmm_sequence_graph(std::span<const int> units, int states_per_unit,
                                    TransitionStyle style = TransitionStyle::unit,
                                    std::optional<double> self_loop_prob = std::nullopt);

// Checks start/final conventions, reachability and co-reachability, and
// outgoing probability sums. Throws std::logic_error on violation.
void validate_graph(const StateGraph& graph);

// Debug dump, one line per transition: "from to logp emission-label".
void dump_graph(const StateGraph& graph, const UnitInventory& inventory, std::ostream& out);

}  // namespace isca

#endif
