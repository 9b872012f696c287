#ifndef ISCA_IO_HPP
#define ISCA_IO_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "isca/types.hpp"

namespace isca {

// Posterior files: line 1 "T U", then T lines of U space-separated
// probabilities. The utterance id is the file stem. A header starting with
// kPosteriorBinaryMagic is reserved for a future binary layout.
inline constexpr const char* kPosteriorBinaryMagic = "ISCAPBIN";

PosteriorMatrix load_posteriors(const std::filesystem::path& path);
void write_posteriors(const PosteriorMatrix& matrix, const std::filesystem::path& path);

// Lexicon files: "WORD unit unit ...", one pronunciation per line; repeated
// words accumulate pronunciations.
Lexicon load_lexicon(const std::filesystem::path& path, const UnitInventory& inventory);
void write_lexicon(const Lexicon& lexicon, const UnitInventory& inventory,
                   const std::filesystem::path& path);

// One pronunciation per word: its uppercased character sequence.
Lexicon derive_graphemic_lexicon(const std::vector<std::string>& words,
                                 const UnitInventory& inventory);

// N-best files: one hypothesis per line, tab separated:
// utterance_id, rank (1-based), acoustic_logp, lm_logp, scorer_logp or "NA",
// word_count, words (space separated; empty for the empty hypothesis).
NBestList load_nbest(const std::filesystem::path& path);
void write_nbest(const NBestList& nbest, const std::filesystem::path& path);

// Priors: one "label probability" pair per line, one line per inventory unit.
UnitPrior load_priors(const std::filesystem::path& path, const UnitInventory& inventory,
                      double floor = 1e-8);
void write_priors(const UnitPrior& prior, const UnitInventory& inventory,
                  const std::filesystem::path& path);

// Unit inventory: one label per line.
UnitInventory load_inventory(const std::filesystem::path& path,
                             const std::string& blank_label, UnitKind kind);

// Transcripts: "utterance_id word word ...".
std::map<std::string, std::vector<std::string>> load_transcripts(
    const std::filesystem::path& path);
void write_transcripts(const std::map<std::string, std::vector<std::string>>& transcripts,
                       const std::filesystem::path& path);

// Weights file: alpha=, beta=, insertion_penalty=, blank_penalty= lines.
ScoreWeights load_weights(const std::filesystem::path& path);
void write_weights(const ScoreWeights& weights, const std::filesystem::path& path);

// Writes via a temp file in the same directory, then renames into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::vector<std::string> split_whitespace(const std::string& line);
std::string uppercase_ascii(const std::string& word);
// Splits a UTF-8 string into code points (as byte strings).
std::vector<std::string> utf8_characters(const std::string& word);

}  // namespace isca

#endif
