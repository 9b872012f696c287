#ifndef ISCA_TYPES_HPP
#define ISCA_TYPES_HPP

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "isca/common.hpp"

namespace isca {

enum class UnitKind { graphemic, phonetic };

// Ordered subword-unit alphabet, optionally containing a blank symbol.
class UnitInventory {
 public:
  UnitInventory(std::vector<std::string> labels, std::optional<int> blank_index,
                UnitKind kind);

  int size() const { return static_cast<int>(labels_.size()); }
  const std::string& label(int u) const { return labels_.at(u); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::optional<int> find(std::string_view label) const;
  std::optional<int> blank() const { return blank_; }
  bool is_blank(int u) const { return blank_ && *blank_ == u; }
  UnitKind kind() const { return kind_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, int> index_;
  std::optional<int> blank_;
  UnitKind kind_;
};

// T x U per-frame unit posteriors. Rows are validated to be stochastic
// within 1e-6 and renormalized exactly on construction.
class PosteriorMatrix {
 public:
  PosteriorMatrix(std::string utterance_id, int num_frames, int num_units,
                  std::vector<double> row_major);

  const std::string& utterance_id() const { return utterance_id_; }
  int num_frames() const { return num_frames_; }
  int num_units() const { return num_units_; }
  double at(int t, int u) const { return data_[static_cast<size_t>(t) * num_units_ + u]; }
  std::span<const double> row(int t) const {
    return {data_.data() + static_cast<size_t>(t) * num_units_,
            static_cast<size_t>(num_units_)};
  }

 private:
  std::string utterance_id_;
  int num_frames_;
  int num_units_;
  std::vector<double> data_;
};

// Unit prior distribution with a positive floor applied. Entries at or
// below the floor are pinned to it and the remaining mass is rescaled, so
// every entry stays >= floor and the total stays 1.
struct UnitPrior {
  std::vector<double> priors;
  double floor = 1e-8;

  static UnitPrior floored(std::vector<double> raw, double floor);
};

using Pronunciation = std::vector<int>;

// word -> one or more unit-index pronunciations. std::map keeps iteration
// order deterministic for graph building and file output.
class Lexicon {
 public:
  void add(const std::string& word, Pronunciation pron, const UnitInventory& inventory);

  bool contains(const std::string& word) const { return entries_.count(word) != 0; }
  const std::vector<Pronunciation>& pronunciations(const std::string& word) const;
  const std::map<std::string, std::vector<Pronunciation>>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<Pronunciation>> entries_;
};

struct Hypothesis {
  std::vector<std::string> words;
  double acoustic_logp = 0.0;              // ln p(O|W)
  double lm_logp = 0.0;                    // ln P(W)
  std::optional<double> scorer_logp;       // ln sum_C P(C|W,O), filled by rescoring
  bool scorer_truncated = false;           // pronunciation sum hit its cap

  int word_count() const { return static_cast<int>(words.size()); }
};

struct NBestList {
  std::string utterance_id;
  std::vector<Hypothesis> hypotheses;      // best first
  bool empty_warning = false;              // decoder pruned every token
};

struct ScoreWeights {
  double lm_scale = 1.0;          // alpha
  double scorer_scale = 0.0;      // beta
  double blank_penalty = 0.0;     // gamma, subtracted from the blank log-posterior
  double insertion_penalty = 0.0; // added per output word

  void validate() const;
};

// True when a < b in word order; used for deterministic tie-breaking
// wherever hypotheses with equal scores must be ordered.
bool words_less(std::span<const std::string> a, std::span<const std::string> b);

}  // namespace isca

#endif
