#ifndef ISCA_SCORER_HPP
#define ISCA_SCORER_HPP

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "isca/acoustic.hpp"
#include "isca/types.hpp"

namespace isca {

// Label-synchronous scorer: ln P(C|O) for a unit sequence C of a given
// utterance. Total by contract: anything it cannot score gets the log-zero
// sentinel, never an error.
class LabelScorer {
 public:
  virtual ~LabelScorer() = default;
  virtual double score(const std::string& utterance_id, std::span<const int> units) const = 0;
};

// Externally computed scores, loaded from a table file; one line per entry:
// "utterance_id <tab> logp <tab> unit unit unit ...".
class FileScorerTable : public LabelScorer {
 public:
  double score(const std::string& utterance_id, std::span<const int> units) const override;

  void add(std::string utterance_id, std::vector<int> units, double logp);
  size_t size() const { return table_.size(); }

  static FileScorerTable load(const std::filesystem::path& path, const UnitInventory& inventory);
  void save(const std::filesystem::path& path, const UnitInventory& inventory) const;

 private:
  std::map<std::pair<std::string, std::vector<int>>, double> table_;
};

// Built-in fallback scorer: maps C to the blank-topology probability that
// the utterance's frames emit exactly C (complete-sequence mass, no prior
// subtraction), so the whole pipeline runs without external neural scores.
std::unique_ptr<LabelScorer> make_ctc_label_scorer(const PosteriorMatrix& posteriors,
                                                   const UnitInventory& inventory);

}  // namespace isca

#endif
