#include "isca/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "isca/common.hpp"
#include "isca/topology.hpp"

namespace isca {

Topology Topology::hmm(int states_per_unit) {
  if (states_per_unit < 1) throw InputError("states per unit must be positive");
  return {Kind::hmm, states_per_unit};
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw InputError("beam width must be positive");
  if (!(score_margin >= 0.0)) throw InputError("score margin must be non-negative");
  if (nbest < 1) throw InputError("nbest must be positive");
  if (tokens_per_cell < 0) throw InputError("tokens per cell must be non-negative");
  weights.validate();
}

PrefixTree build_prefix_tree(const Lexicon& lexicon, const UnitInventory& inventory,
                             const Topology& topology) {
  if (lexicon.size() == 0) throw InputError("cannot build a prefix tree from an empty lexicon");
  const bool ctc = topology.kind == Topology::Kind::ctc;
  if (ctc && !inventory.blank()) {
    throw InputError("blank-interleaved decoding requires a blank unit in the inventory");
  }

  PrefixTree tree;
  tree.topology_ = topology;
  tree.nodes_.push_back(TrieNode{});  // root
  for (const auto& [word, prons] : lexicon.entries()) {
    for (size_t pi = 0; pi < prons.size(); ++pi) {
      int node = 0;
      for (int unit : prons[pi]) {
        auto [it, inserted] = tree.nodes_[node].children.try_emplace(
            unit, static_cast<int>(tree.nodes_.size()));
        if (inserted) tree.nodes_.push_back(TrieNode{unit, node, {}, {}});
        node = it->second;
      }
      tree.nodes_[node].word_ends.push_back({word, static_cast<int>(pi)});
    }
  }

  // Decode states. With blanks, each non-root node gets a unit state and a
  // trailing-blank state and the root gets the between-words blank; chain
  // topologies get states_per_unit states per node and no blanks.
  const int blank = ctc ? *inventory.blank() : -1;
  std::vector<int> first_state(tree.nodes_.size(), -1);
  std::vector<int> blank_state(tree.nodes_.size(), -1);

  auto add_state = [&](PrefixTree::State s) {
    tree.states_.push_back(s);
    return static_cast<int>(tree.states_.size()) - 1;
  };
  if (ctc) tree.root_blank_ = add_state({0, blank, true, false});
  for (int n = 1; n < static_cast<int>(tree.nodes_.size()); ++n) {
    const int unit = tree.nodes_[n].unit;
    if (ctc) {
      first_state[n] = add_state({n, unit, false, true});
      blank_state[n] = add_state({n, blank, true, false});
    } else {
      for (int k = 0; k < topology.states_per_unit; ++k) {
        const int s = add_state({n, unit, false, k + 1 == topology.states_per_unit});
        if (k == 0) first_state[n] = s;
      }
    }
  }

  const int num_states = static_cast<int>(tree.states_.size());
  tree.next_.resize(num_states);
  tree.reentry_.resize(num_states);
  tree.completion_.assign(num_states, -1);

  // Frame-consuming entries into a fresh word, from the utterance start or
  // right after a word commit. from_unit is the unit emitted on the previous
  // frame, -1 when that was blank or nothing: a repeated unit straight
  // across a word boundary would collapse, so it must go through the blank.
  auto word_starts = [&](int from_unit) {
    std::vector<int> targets;
    if (ctc) targets.push_back(tree.root_blank_);
    for (const auto& [unit, child] : tree.nodes_[0].children) {
      if (ctc && unit == from_unit) continue;
      targets.push_back(first_state[child]);
    }
    return targets;
  };

  tree.entry_ = word_starts(-1);
  for (int s = 0; s < num_states; ++s) {
    const PrefixTree::State& st = tree.states_[s];
    auto& next = tree.next_[s];
    next.push_back(s);  // self-loop everywhere
    if (ctc) {
      if (st.blank) {
        for (const auto& [unit, child] : tree.nodes_[st.node].children) {
          (void)unit;
          next.push_back(first_state[child]);
        }
      } else {
        next.push_back(blank_state[st.node]);
        for (const auto& [unit, child] : tree.nodes_[st.node].children) {
          if (unit != st.emission) next.push_back(first_state[child]);
        }
      }
    } else if (st.chain_end) {
      for (const auto& [unit, child] : tree.nodes_[st.node].children) {
        (void)unit;
        next.push_back(first_state[child]);
      }
    } else {
      next.push_back(s + 1);  // next state in this node's chain
    }
    const bool completes = st.node != 0 && !tree.nodes_[st.node].word_ends.empty() &&
                           (ctc || st.chain_end);
    if (completes) {
      tree.completion_[s] = st.node;
      tree.reentry_[s] = word_starts(st.blank ? -1 : st.emission);
    }
  }
  return tree;
}

namespace {

struct Token {
  std::vector<std::string> words;
  std::vector<int> context;  // LM ids of the last order-1 words, begin-padded
  double acoustic = 0.0;
  double lm = 0.0;           // ln P of committed words given their histories
  double partial = 0.0;      // acoustic + alpha*lm + insertion_penalty*#words
};

bool token_better(const Token& a, const Token& b) {
  if (a.partial != b.partial) return a.partial > b.partial;
  return words_less(a.words, b.words);
}

using CellKey = std::pair<int, std::vector<int>>;  // (tree state, LM context)
using Cells = std::map<CellKey, std::vector<Token>>;

// Viterbi merge: one token per word sequence within a cell, cell truncated
// to the configured width by partial score.
void insert_token(Cells& cells, int state, Token token, int cell_width) {
  std::vector<Token>& slot = cells[{state, token.context}];
  for (Token& existing : slot) {
    if (existing.words == token.words) {
      if (token_better(token, existing)) existing = std::move(token);
      return;
    }
  }
  slot.push_back(std::move(token));
  std::sort(slot.begin(), slot.end(), token_better);
  if (static_cast<int>(slot.size()) > cell_width) slot.resize(cell_width);
}

}  // namespace

NBestList beam_decode(const ScoredFrames& frames, const PrefixTree& tree, const NGramLM& lm,
                      const DecodeConfig& config) {
  config.validate();
  const ScoreWeights& w = config.weights;
  const int cell_width = config.tokens_per_cell == 0 ? config.nbest : config.tokens_per_cell;
  const int num_frames = frames.num_frames();
  for (const PrefixTree::State& st : tree.states()) {
    if (st.emission < 0 || st.emission >= frames.num_units()) {
      throw InputError("prefix tree emits a unit outside the scored frames");
    }
  }

  std::vector<int> begin_context;
  if (lm.order() > 1) begin_context.assign(lm.order() - 1, lm.begin_id());

  auto shifted = [&](const std::vector<int>& context, int id) {
    if (lm.order() == 1) return context;
    std::vector<int> out(context.begin() + 1, context.end());
    out.push_back(id);
    return out;
  };

  Cells cells;
  for (int s : tree.entry_states()) {
    Token token;
    token.context = begin_context;
    token.acoustic = frames.at(0, tree.states()[s].emission);
    token.partial = token.acoustic;
    insert_token(cells, s, std::move(token), cell_width);
  }

  // Commits the word ending at `state` for every word annotated there and
  // hands the resulting tokens to `sink(state-independent token, word id)`.
  auto for_each_commit = [&](int state, const Token& token, auto&& sink) {
    const int node = tree.completion_node(state);
    for (const WordEnd& we : tree.nodes()[node].word_ends) {
      const int id = lm.word_id(we.word);
      Token committed = token;
      committed.words.push_back(we.word);
      committed.lm += lm.word_logp_ids(token.context, id);
      committed.context = shifted(token.context, id);
      committed.partial = committed.acoustic + w.lm_scale * committed.lm +
                          w.insertion_penalty * static_cast<double>(committed.words.size());
      sink(std::move(committed));
    }
  };

  for (int t = 0; t < num_frames; ++t) {
    // Prune: score margin relative to the frame best, then the global beam.
    double best = kLogZero;
    size_t live = 0;
    for (const auto& [key, slot] : cells) {
      for (const Token& token : slot) best = std::max(best, token.partial);
      live += slot.size();
    }
    if (live == 0) break;
    if (std::isfinite(config.score_margin)) {
      const double floor = best - config.score_margin;
      for (auto& [key, slot] : cells) {
        std::erase_if(slot, [&](const Token& token) { return token.partial < floor; });
      }
    }
    live = 0;
    for (const auto& [key, slot] : cells) live += slot.size();
    if (static_cast<int>(live) > config.beam_width) {
      std::vector<double> partials;
      partials.reserve(live);
      for (const auto& [key, slot] : cells) {
        for (const Token& token : slot) partials.push_back(token.partial);
      }
      std::nth_element(partials.begin(), partials.begin() + (config.beam_width - 1),
                       partials.end(), std::greater<>());
      const double cut = partials[config.beam_width - 1];
      // Keep strictly-better tokens, then fill up to the beam with cut-score
      // tokens in deterministic cell order.
      int budget = config.beam_width;
      for (auto& [key, slot] : cells) {
        for (const Token& token : slot) {
          if (token.partial > cut) --budget;
        }
      }
      for (auto& [key, slot] : cells) {
        std::erase_if(slot, [&](const Token& token) {
          if (token.partial > cut) return false;
          if (token.partial == cut && budget > 0) {
            --budget;
            return false;
          }
          return true;
        });
      }
    }
    std::erase_if(cells, [](const auto& entry) { return entry.second.empty(); });
    if (config.trace) {
      live = 0;
      for (const auto& [key, slot] : cells) live += slot.size();
      *config.trace << "frame " << t << ": " << live << " tokens in " << cells.size()
                    << " cells\n";
    }
    if (t + 1 == num_frames) break;

    Cells next;
    for (const auto& [key, slot] : cells) {
      const int state = key.first;
      for (const Token& token : slot) {
        for (int s2 : tree.next_states(state)) {
          Token moved = token;
          moved.acoustic += frames.at(t + 1, tree.states()[s2].emission);
          moved.partial += frames.at(t + 1, tree.states()[s2].emission);
          insert_token(next, s2, std::move(moved), cell_width);
        }
        if (tree.completion_node(state) >= 0) {
          for_each_commit(state, token, [&](Token committed) {
            for (int s2 : tree.reentry_states(state)) {
              Token moved = committed;
              moved.acoustic += frames.at(t + 1, tree.states()[s2].emission);
              moved.partial += frames.at(t + 1, tree.states()[s2].emission);
              insert_token(next, s2, std::move(moved), cell_width);
            }
          });
        }
      }
    }
    cells.swap(next);
  }

  // Finalization: plain at the between-words blank, word-committing at
  // completion states; everything else is mid-word and dropped.
  std::map<std::vector<std::string>, Hypothesis> unique;
  std::map<std::vector<std::string>, double> combined;
  auto offer = [&](const Token& token) {
    const double lm_full = token.lm + lm.word_logp_ids(token.context, lm.end_id());
    const double total = token.acoustic + w.lm_scale * lm_full +
                         w.insertion_penalty * static_cast<double>(token.words.size());
    auto it = combined.find(token.words);
    if (it == combined.end() || total > it->second) {
      combined[token.words] = total;
      Hypothesis h;
      h.words = token.words;
      h.acoustic_logp = token.acoustic;
      h.lm_logp = lm_full;
      unique[token.words] = std::move(h);
    }
  };
  for (const auto& [key, slot] : cells) {
    const int state = key.first;
    for (const Token& token : slot) {
      if (tree.finalizes_plain(state)) offer(token);
      if (tree.completion_node(state) >= 0) {
        for_each_commit(state, token, [&](Token committed) { offer(committed); });
      }
    }
  }

  NBestList result;
  result.utterance_id = frames.utterance_id();
  std::vector<std::pair<double, const Hypothesis*>> ranked;
  ranked.reserve(unique.size());
  for (const auto& [words, hyp] : unique) ranked.emplace_back(combined.at(words), &hyp);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return words_less(a.second->words, b.second->words);
  });
  for (const auto& [score, hyp] : ranked) {
    if (static_cast<int>(result.hypotheses.size()) >= config.nbest) break;
    result.hypotheses.push_back(*hyp);
  }
  result.empty_warning = result.hypotheses.empty();
  return result;
}

NBestList exhaustive_decode(const ScoredFrames& frames, const Lexicon& lexicon,
                            const NGramLM& lm, const ScoreWeights& weights, int max_words,
                            const Topology& topology, AcousticMode mode) {
  weights.validate();
  if (max_words < 0) throw InputError("max words must be non-negative");
  const bool ctc = topology.kind == Topology::Kind::ctc;

  std::vector<const std::string*> vocab;
  for (const auto& [word, prons] : lexicon.entries()) vocab.push_back(&word);
  double sequences = 1.0;  // the empty sequence
  double power = 1.0;
  for (int k = 1; k <= max_words; ++k) {
    power *= static_cast<double>(vocab.size());
    sequences += power;
    if (sequences > 1e6) {
      throw InputError("exhaustive enumeration exceeds the one-million-sequence guard");
    }
  }

  // The graph builders only need unit count and blank position, both of
  // which the scored frames carry.
  if (ctc && !frames.blank_index()) {
    throw InputError("blank-interleaved scoring requires frames with a blank unit");
  }
  std::vector<std::string> labels;
  for (int u = 0; u < frames.num_units(); ++u) labels.push_back("u" + std::to_string(u));
  const UnitInventory frame_units(std::move(labels), frames.blank_index(),
                                  UnitKind::graphemic);

  // Best (or summed) acoustic score over the pronunciation combinations of a
  // word sequence, each scored on its composed sequence graph.
  auto acoustic_score = [&](const std::vector<const std::string*>& words) {
    std::vector<const std::vector<Pronunciation>*> options;
    options.reserve(words.size());
    double combos = 1.0;
    for (const std::string* word : words) {
      options.push_back(&lexicon.pronunciations(*word));
      combos *= static_cast<double>(options.back()->size());
      if (combos > 1e6) {
        throw InputError("exhaustive enumeration exceeds the one-million-sequence guard");
      }
    }
    std::vector<size_t> choice(words.size(), 0);
    double total = kLogZero;
    while (true) {
      std::vector<int> units;
      for (size_t i = 0; i < choice.size(); ++i) {
        const Pronunciation& pron = (*options[i])[choice[i]];
        units.insert(units.end(), pron.begin(), pron.end());
      }
      double score = kLogZero;
      if (ctc) {
        const StateGraph graph = build_ctc_sequence_graph(units, frame_units,
                                                          TransitionStyle::unit);
        score = mode == AcousticMode::viterbi ? viterbi_loglik(graph, frames)
                                              : forward_loglik(graph, frames);
      } else if (!units.empty()) {  // an empty chain cannot consume any frame
        const StateGraph graph = build_hmm_sequence_graph(units, topology.states_per_unit,
                                                          TransitionStyle::unit);
        score = mode == AcousticMode::viterbi ? viterbi_loglik(graph, frames)
                                              : forward_loglik(graph, frames);
      }
      total = mode == AcousticMode::viterbi ? std::max(total, score) : log_add(total, score);
      size_t i = 0;
      while (i < choice.size() && ++choice[i] == options[i]->size()) choice[i++] = 0;
      if (i == choice.size()) break;
    }
    return total;
  };

  std::vector<std::pair<double, Hypothesis>> ranked;
  std::vector<int> pick;
  auto consider = [&]() {
    std::vector<const std::string*> words;
    words.reserve(pick.size());
    for (int i : pick) words.push_back(vocab[i]);
    const double acoustic = acoustic_score(words);
    if (is_log_zero(acoustic)) return;
    Hypothesis h;
    for (const std::string* word : words) h.words.push_back(*word);
    h.acoustic_logp = acoustic;
    h.lm_logp = lm.score_sequence(h.words);
    const double total = acoustic + weights.lm_scale * h.lm_logp +
                         weights.insertion_penalty * static_cast<double>(h.words.size());
    ranked.emplace_back(total, std::move(h));
  };
  // Depth-first enumeration in lexicographic word order.
  auto enumerate = [&](auto&& self, int depth) -> void {
    consider();
    if (depth == max_words) return;
    for (size_t i = 0; i < vocab.size(); ++i) {
      pick.push_back(static_cast<int>(i));
      self(self, depth + 1);
      pick.pop_back();
    }
  };
  enumerate(enumerate, 0);

  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return words_less(a.second.words, b.second.words);
  });
  NBestList result;
  result.utterance_id = frames.utterance_id();
  for (auto& [score, hyp] : ranked) result.hypotheses.push_back(std::move(hyp));
  result.empty_warning = result.hypotheses.empty();
  return result;
}

}  // namespace isca
