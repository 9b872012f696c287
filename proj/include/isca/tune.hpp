#ifndef ISCA_TUNE_HPP
#define ISCA_TUNE_HPP

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "isca/types.hpp"

namespace isca {

// One tuning utterance: an n-best list with scorer_logp already filled,
// plus the reference word sequence.
struct DevUtterance {
  NBestList nbest;
  std::vector<std::string> reference;
};

// Corpus WER of the 1-best hypotheses after re-ranking every list with the
// given weights (score ties break in word order). An empty list counts as
// an empty hypothesis.
double dev_wer(std::span<const DevUtterance> dev, const ScoreWeights& weights);

struct TuneOptions {
  int lambda = 0;       // population size; 0 picks the optimizer default
  int generations = 50;
  unsigned long long seed = 1;
  double sigma0 = 0.3;
  bool tune_insertion_penalty = false;
  std::ostream* progress = nullptr;  // per-generation best WER lines
};

// Minimizes dev WER over (alpha, beta[, insertion_penalty]) with CMA-ES.
// alpha and beta are squared-parameterized to stay non-negative. The
// initial weights are always evaluated, so the result never has worse dev
// WER than init; deterministic for a fixed seed.
ScoreWeights tune_weights(std::span<const DevUtterance> dev, const ScoreWeights& init,
                          const TuneOptions& options);

}  // namespace isca

#endif
