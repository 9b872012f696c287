#include "isca/types.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace isca {

UnitInventory::UnitInventory(std::vector<std::string> labels,
                             std::optional<int> blank_index, UnitKind kind)
    : labels_(std::move(labels)), blank_(blank_index), kind_(kind) {
  if (labels_.empty()) throw InputError("unit inventory is empty");
  for (int i = 0; i < static_cast<int>(labels_.size()); ++i) {
    if (labels_[i].empty()) throw InputError("unit inventory contains an empty label");
    if (!index_.emplace(labels_[i], i).second)
      throw InputError("duplicate unit label '" + labels_[i] + "'");
  }
  if (blank_ && (*blank_ < 0 || *blank_ >= size()))
    throw InputError("blank index out of range");
}

std::optional<int> UnitInventory::find(std::string_view label) const {
  auto it = index_.find(std::string(label));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

PosteriorMatrix::PosteriorMatrix(std::string utterance_id, int num_frames,
                                 int num_units, std::vector<double> row_major)
    : utterance_id_(std::move(utterance_id)),
      num_frames_(num_frames),
      num_units_(num_units),
      data_(std::move(row_major)) {
  if (num_frames_ <= 0 || num_units_ <= 0)
    throw InputError("posterior matrix dimensions must be positive");
  if (data_.size() != static_cast<size_t>(num_frames_) * num_units_)
    throw InputError("posterior data size does not match T*U");
  for (int t = 0; t < num_frames_; ++t) {
    double sum = 0.0;
    for (int u = 0; u < num_units_; ++u) {
      double p = at(t, u);
      if (!(p >= 0.0))
        throw InputError("negative posterior entry at frame " + std::to_string(t));
      if (p > 1.0 + 1e-6)
        throw InputError("posterior entry > 1 at frame " + std::to_string(t));
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InputError("posterior row " + std::to_string(t) + " sums to " +
                       format_double(sum) + ", expected 1 within 1e-6");
    for (int u = 0; u < num_units_; ++u)
      data_[static_cast<size_t>(t) * num_units_ + u] /= sum;
  }
}

UnitPrior UnitPrior::floored(std::vector<double> raw, double floor) {
  if (raw.empty()) throw InputError("empty prior vector");
  if (!(floor > 0.0)) throw InputError("prior floor must be positive");
  double sum = 0.0;
  for (double p : raw) {
    if (!(p >= 0.0)) throw InputError("negative prior entry");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw InputError("priors sum to " + format_double(sum) + ", expected 1 within 1e-6");

  // Pin entries at or below the floor, rescale the rest to keep the total
  // at 1. Rescaling can push further entries under the floor, so iterate.
  std::vector<bool> pinned(raw.size(), false);
  for (size_t i = 0; i < raw.size(); ++i) pinned[i] = raw[i] <= floor;
  for (;;) {
    int num_pinned = 0;
    double rest = 0.0;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (pinned[i]) ++num_pinned;
      else rest += raw[i];
    }
    if (num_pinned == static_cast<int>(raw.size()))
      throw InputError("prior floor too large: all entries pinned");
    double scale = (1.0 - floor * num_pinned) / rest;
    if (!(scale > 0.0)) throw InputError("prior floor too large for this distribution");
    bool changed = false;
    for (size_t i = 0; i < raw.size(); ++i) {
      if (!pinned[i] && raw[i] * scale < floor) {
        pinned[i] = true;
        changed = true;
      }
    }
    if (!changed) {
      UnitPrior out;
      out.floor = floor;
      out.priors.resize(raw.size());
      for (size_t i = 0; i < raw.size(); ++i)
        out.priors[i] = pinned[i] ? floor : raw[i] * scale;
      return out;
    }
  }
}

void Lexicon::add(const std::string& word, Pronunciation pron,
                  const UnitInventory& inventory) {
  if (word.empty()) throw InputError("empty word in lexicon");
  if (pron.empty()) throw InputError("empty pronunciation for word '" + word + "'");
  for (int u : pron) {
    if (u < 0 || u >= inventory.size())
      throw InputError("pronunciation of '" + word + "' uses unit index " +
                       std::to_string(u) + " outside the inventory");
    if (inventory.is_blank(u))
      throw InputError("pronunciation of '" + word + "' contains the blank unit");
  }
  auto& prons = entries_[word];
  if (std::find(prons.begin(), prons.end(), pron) != prons.end())
    throw InputError("duplicate pronunciation for word '" + word + "'");
  prons.push_back(std::move(pron));
}

const std::vector<Pronunciation>& Lexicon::pronunciations(const std::string& word) const {
  auto it = entries_.find(word);
  if (it == entries_.end())
    throw InputError("word '" + word + "' not in lexicon");
  return it->second;
}

void ScoreWeights::validate() const {
  if (!(lm_scale >= 0.0) || !std::isfinite(lm_scale))
    throw InputError("lm scale must be finite and >= 0");
  if (!(scorer_scale >= 0.0) || !std::isfinite(scorer_scale))
    throw InputError("scorer scale must be finite and >= 0");
  if (!std::isfinite(blank_penalty)) throw InputError("blank penalty must be finite");
  if (!std::isfinite(insertion_penalty)) throw InputError("insertion penalty must be finite");
}

bool words_less(std::span<const std::string> a, std::span<const std::string> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

}  // namespace isca
