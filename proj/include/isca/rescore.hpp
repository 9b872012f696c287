#ifndef ISCA_RESCORE_HPP
#define ISCA_RESCORE_HPP

#include <span>
#include <string>

#include "isca/scorer.hpp"
#include "isca/types.hpp"

namespace isca {

struct PronSumResult {
  double logp = 0.0;
  bool truncated = false;
};

// ln sum over pronunciation combinations of the word sequence of
// exp(scorer(C)), C being the in-order concatenation. When the combination
// count exceeds cap, the cap combinations with fewest total units (ties in
// index order) are summed and the result is flagged truncated.
PronSumResult pronunciation_sum(const Lexicon& lexicon, std::span<const std::string> words,
                                const LabelScorer& scorer, const std::string& utterance_id,
                                int cap = 64);

// acoustic + alpha*lm + beta*scorer + insertion_penalty*word_count. The
// scorer term is skipped entirely when beta is 0 or scorer_logp is unset.
double combine_scores(const Hypothesis& h, const ScoreWeights& weights);

struct RescoreOptions {
  int cap = 64;
  // Divide scorer log-probabilities by the label count of the shortest
  // pronunciation combination. Off by default.
  bool normalize_by_length = false;
  // Optional second score table with its own interpolation weight; it
  // affects the ranking but is not persisted in the hypotheses.
  const LabelScorer* extra_scorer = nullptr;
  double extra_scale = 0.0;
};

// Fills scorer_logp for every hypothesis via pronunciation_sum and re-ranks
// by combine_scores (descending, ties in word order). Never adds or removes
// hypotheses.
NBestList rescore_nbest(const NBestList& nbest, const LabelScorer& scorer,
                        const Lexicon& lexicon, const ScoreWeights& weights,
                        const RescoreOptions& options = {});

}  // namespace isca

#endif
