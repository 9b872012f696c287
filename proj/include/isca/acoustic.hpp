#ifndef ISCA_ACOUSTIC_HPP
#define ISCA_ACOUSTIC_HPP

#include <optional>
#include <span>
#include <vector>

#include "isca/topology.hpp"
#include "isca/types.hpp"

namespace isca {

// T x U pseudo log-likelihoods: ln p(o_t|u) up to a constant, after prior
// subtraction and blank penalty. All entries finite.
class ScoredFrames {
 public:
  ScoredFrames(std::string utterance_id, int num_frames, int num_units,
               std::vector<double> row_major, std::optional<int> blank_index);

  const std::string& utterance_id() const { return utterance_id_; }
  int num_frames() const { return num_frames_; }
  int num_units() const { return num_units_; }
  std::optional<int> blank_index() const { return blank_index_; }
  double at(int t, int u) const { return data_[static_cast<size_t>(t) * num_units_ + u]; }

 private:
  std::string utterance_id_;
  int num_frames_;
  int num_units_;
  std::vector<double> data_;
  std::optional<int> blank_index_;
};

// Column means over all frames of all matrices, floored and renormalized.
UnitPrior estimate_priors(std::span<const PosteriorMatrix> posteriors, double floor = 1e-8);

// entry(t,u) = ln max(posterior, 1e-10) - prior_scale * ln prior(u)
//              - (blank_penalty if u is the blank).
// priors may be null only when prior_scale is 0.
ScoredFrames score_frames(const PosteriorMatrix& posteriors, const UnitInventory& inventory,
                          const UnitPrior* priors, const ScoreWeights& weights,
                          double prior_scale = 1.0);

// ln sum over all length-T start-to-final state paths of transition*emission
// products. Returns the log-zero sentinel when no path exists.
double forward_loglik(const StateGraph& graph, const ScoredFrames& frames);

// ln of the best single path, log-zero sentinel when no path exists.
double viterbi_loglik(const StateGraph& graph, const ScoredFrames& frames);

struct Alignment {
  std::vector<int> states;  // emitting graph state per frame
  double logp = 0.0;
};

// Best single path. Ties prefer the path emitting non-blank earliest, then
// lower state ids. Throws when no feasible path exists.
Alignment viterbi_align(const StateGraph& graph, const ScoredFrames& frames);

// ln of the CTC probability that the T-frame output collapses to a label
// sequence with the given prefix (complete or extensible), via the
// blank-ending / non-blank-ending two-stream recursion on raw posteriors.
double ctc_prefix_score(const PosteriorMatrix& posteriors, std::span<const int> prefix,
                        const UnitInventory& inventory);

}  // namespace isca

#endif
