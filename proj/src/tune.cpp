#include "isca/tune.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "isca/cmaes.hpp"
#include "isca/common.hpp"
#include "isca/eval.hpp"
#include "isca/rescore.hpp"

namespace isca {

double dev_wer(std::span<const DevUtterance> dev, const ScoreWeights& weights) {
  EditStats total;
  const std::vector<std::string> empty;
  for (const DevUtterance& utterance : dev) {
    const std::vector<std::string>* best_words = &empty;
    double best_score = 0.0;
    bool have = false;
    for (const Hypothesis& h : utterance.nbest.hypotheses) {
      const double score = combine_scores(h, weights);
      if (!have || score > best_score ||
          (score == best_score && words_less(h.words, *best_words))) {
        have = true;
        best_score = score;
        best_words = &h.words;
      }
    }
    total += align_words(std::span<const std::string>(utterance.reference),
                         std::span<const std::string>(*best_words))
                 .stats;
  }
  return total.wer();
}

ScoreWeights tune_weights(std::span<const DevUtterance> dev, const ScoreWeights& init,
                          const TuneOptions& options) {
  if (dev.empty()) throw InputError("tuning needs a non-empty dev set");
  init.validate();

  const int dim = options.tune_insertion_penalty ? 3 : 2;
  std::vector<double> start{std::sqrt(init.lm_scale), std::sqrt(init.scorer_scale)};
  if (options.tune_insertion_penalty) start.push_back(init.insertion_penalty);

  auto to_weights = [&](std::span<const double> point) {
    ScoreWeights w = init;
    w.lm_scale = point[0] * point[0];
    w.scorer_scale = point[1] * point[1];
    if (options.tune_insertion_penalty) w.insertion_penalty = point[2];
    return w;
  };

  CmaesOptions cmaes;
  cmaes.lambda = options.lambda;
  cmaes.generations = options.generations;
  cmaes.seed = options.seed;
  cmaes.sigma0 = options.sigma0;

  GenerationCallback report = nullptr;
  if (options.progress != nullptr) {
    report = [&](const GenerationInfo& info) {
      std::ostream& out = *options.progress;
      const auto flags = out.flags();
      out << "generation " << info.generation << ": best WER " << std::fixed
          << std::setprecision(4) << info.best_value << '\n';
      out.flags(flags);
    };
  }

  const CmaesResult result = cmaes_minimize(
      [&](std::span<const double> point) { return dev_wer(dev, to_weights(point)); },
      std::span<const double>(start.data(), static_cast<size_t>(dim)), cmaes, report);
  // Hand back the caller's weights untouched when nothing beat them; the
  // squared parameterization would otherwise round-trip them through sqrt.
  if (std::equal(result.best_point.begin(), result.best_point.end(), start.begin(), start.end()))
    return init;
  return to_weights(result.best_point);
}

}  // namespace isca
