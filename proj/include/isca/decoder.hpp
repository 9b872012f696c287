#ifndef ISCA_DECODER_HPP
#define ISCA_DECODER_HPP

#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "isca/acoustic.hpp"
#include "isca/lm.hpp"
#include "isca/types.hpp"

namespace isca {

// Acoustic-unit topology the decoder and oracles share: blank-interleaved
// label units, or left-to-right chains of states_per_unit states per unit.
struct Topology {
  enum class Kind { ctc, hmm };

  Kind kind = Kind::ctc;
  int states_per_unit = 1;

  static Topology ctc() { return {Kind::ctc, 1}; }
  static Topology hmm(int states_per_unit);
};

struct WordEnd {
  std::string word;
  int pron_index = 0;
};

struct TrieNode {
  int unit = -1;    // unit on the edge from the parent; -1 at the root
  int parent = -1;
  std::map<int, int> children;  // unit -> node index, ordered for determinism
  std::vector<WordEnd> word_ends;
};

// Lexical prefix tree with its frame-synchronous decode states compiled in.
// Every pronunciation is one root-to-node path and shared prefixes share
// nodes. Decode states are the per-node emitting states plus (for the blank
// topology) per-node and root blank states.
class PrefixTree {
 public:
  struct State {
    int node = 0;
    int emission = -1;
    bool blank = false;
    bool chain_end = false;  // completion candidate when the node ends a word
  };

  const Topology& topology() const { return topology_; }
  const std::vector<TrieNode>& nodes() const { return nodes_; }
  const std::vector<State>& states() const { return states_; }
  const std::vector<int>& entry_states() const { return entry_; }
  // Frame-consuming moves that stay inside the current word.
  const std::vector<int>& next_states(int state) const { return next_[state]; }
  // Frame-consuming moves taken while committing the finished word.
  const std::vector<int>& reentry_states(int state) const { return reentry_[state]; }
  // Node whose word_ends a token in this state may commit, -1 otherwise.
  int completion_node(int state) const { return completion_[state]; }
  // True for the state representing "between words" (empty-output carrier).
  bool finalizes_plain(int state) const { return state == root_blank_; }

  friend PrefixTree build_prefix_tree(const Lexicon& lexicon, const UnitInventory& inventory,
                                      const Topology& topology);

 private:
  Topology topology_;
  std::vector<TrieNode> nodes_;
  std::vector<State> states_;
  std::vector<int> entry_;
  std::vector<std::vector<int>> next_;
  std::vector<std::vector<int>> reentry_;
  std::vector<int> completion_;
  int root_blank_ = -1;
};

PrefixTree build_prefix_tree(const Lexicon& lexicon, const UnitInventory& inventory,
                             const Topology& topology);

struct DecodeConfig {
  int beam_width = 1 << 20;      // max live tokens per frame
  double score_margin = std::numeric_limits<double>::infinity();
  int nbest = 1;
  int tokens_per_cell = 0;       // distinct word sequences kept per
                                 // (tree-state, LM-state) cell; 0 means nbest
  ScoreWeights weights;
  std::ostream* trace = nullptr; // per-frame live-token counts when set

  void validate() const;
};

// Frame-synchronous token-passing Viterbi over the prefix tree, word-level
// LM scores applied at word boundaries with the full n-gram history carried
// in each token. Hypotheses are deduplicated by word sequence keeping the
// best-scoring alignment; ranked by combined score, ties in word order.
NBestList beam_decode(const ScoredFrames& frames, const PrefixTree& tree, const NGramLM& lm,
                      const DecodeConfig& config);

enum class AcousticMode { viterbi, forward_sum };

// Test oracle: enumerates every word sequence up to max_words (empty one
// included), scores it over the composed sequence graph, and ranks the
// feasible sequences. Guarded against blow-up at one million sequences.
NBestList exhaustive_decode(const ScoredFrames& frames, const Lexicon& lexicon,
                            const NGramLM& lm, const ScoreWeights& weights, int max_words,
                            const Topology& topology = Topology::ctc(),
                            AcousticMode mode = AcousticMode::viterbi);

}  // namespace isca

#endif
