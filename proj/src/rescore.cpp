#include "isca/rescore.hpp"

#include <algorithm>
#include <queue>
#include <set>
#include <stdexcept>

#include "isca/common.hpp"

namespace isca {

namespace {

struct Combo {
  int total_units;
  std::vector<size_t> choice;

  bool operator>(const Combo& other) const {
    if (total_units != other.total_units) return total_units > other.total_units;
    return choice > other.choice;
  }
};

}  // namespace

PronSumResult pronunciation_sum(const Lexicon& lexicon, std::span<const std::string> words,
                                const LabelScorer& scorer, const std::string& utterance_id,
                                int cap) {
  if (cap < 1) throw InputError("pronunciation cap must be at least 1");
  std::vector<const std::vector<Pronunciation>*> options;
  options.reserve(words.size());
  for (const std::string& word : words) {
    if (!lexicon.contains(word)) throw InputError("word not in lexicon: " + word);
    options.push_back(&lexicon.pronunciations(word));
  }

  // Best-first enumeration by total unit count, then index order.
  std::priority_queue<Combo, std::vector<Combo>, std::greater<>> frontier;
  std::set<std::vector<size_t>> visited;
  auto push = [&](std::vector<size_t> choice) {
    if (!visited.insert(choice).second) return;
    int units = 0;
    for (size_t i = 0; i < choice.size(); ++i) {
      units += static_cast<int>((*options[i])[choice[i]].size());
    }
    frontier.push({units, std::move(choice)});
  };
  push(std::vector<size_t>(words.size(), 0));

  PronSumResult result{kLogZero, false};
  int scored = 0;
  while (!frontier.empty()) {
    if (scored == cap) {
      result.truncated = true;
      break;
    }
    Combo combo = frontier.top();
    frontier.pop();
    std::vector<int> units;
    units.reserve(static_cast<size_t>(combo.total_units));
    for (size_t i = 0; i < combo.choice.size(); ++i) {
      const Pronunciation& pron = (*options[i])[combo.choice[i]];
      units.insert(units.end(), pron.begin(), pron.end());
    }
    result.logp = log_add(result.logp, scorer.score(utterance_id, units));
    ++scored;
    for (size_t i = 0; i < combo.choice.size(); ++i) {
      if (combo.choice[i] + 1 < options[i]->size()) {
        std::vector<size_t> next = combo.choice;
        ++next[i];
        push(std::move(next));
      }
    }
  }
  return result;
}

double combine_scores(const Hypothesis& h, const ScoreWeights& weights) {
  double total = h.acoustic_logp + weights.lm_scale * h.lm_logp +
                 weights.insertion_penalty * static_cast<double>(h.word_count());
  if (weights.scorer_scale != 0.0 && h.scorer_logp) {
    total += weights.scorer_scale * *h.scorer_logp;
  }
  return total;
}

NBestList rescore_nbest(const NBestList& nbest, const LabelScorer& scorer,
                        const Lexicon& lexicon, const ScoreWeights& weights,
                        const RescoreOptions& options) {
  if (nbest.hypotheses.empty()) throw InputError("cannot rescore an empty n-best list");
  weights.validate();

  NBestList out = nbest;
  std::vector<double> ranking_keys(out.hypotheses.size());
  for (size_t i = 0; i < out.hypotheses.size(); ++i) {
    Hypothesis& h = out.hypotheses[i];
    const PronSumResult sum =
        pronunciation_sum(lexicon, h.words, scorer, out.utterance_id, options.cap);
    double value = sum.logp;
    if (options.normalize_by_length && !is_log_zero(value)) {
      int shortest = 0;
      for (const std::string& word : h.words) {
        int best = 0;
        for (const Pronunciation& pron : lexicon.pronunciations(word)) {
          const int len = static_cast<int>(pron.size());
          if (best == 0 || len < best) best = len;
        }
        shortest += best;
      }
      value /= static_cast<double>(std::max(1, shortest));
    }
    h.scorer_logp = value;
    h.scorer_truncated = sum.truncated;
    ranking_keys[i] = combine_scores(h, weights);
    if (options.extra_scorer != nullptr && options.extra_scale != 0.0) {
      const PronSumResult extra = pronunciation_sum(lexicon, h.words, *options.extra_scorer,
                                                    out.utterance_id, options.cap);
      ranking_keys[i] += options.extra_scale * extra.logp;
    }
  }

  std::vector<size_t> order(out.hypotheses.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (ranking_keys[a] != ranking_keys[b]) return ranking_keys[a] > ranking_keys[b];
    return words_less(out.hypotheses[a].words, out.hypotheses[b].words);
  });
  NBestList ranked;
  ranked.utterance_id = out.utterance_id;
  ranked.empty_warning = out.empty_warning;
  for (size_t i : order) ranked.hypotheses.push_back(std::move(out.hypotheses[i]));
  return ranked;
}

}  // namespace isca
