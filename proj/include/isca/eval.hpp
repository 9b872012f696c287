#ifndef ISCA_EVAL_HPP
#define ISCA_EVAL_HPP

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace isca {

struct EditStats {
  long long substitutions = 0;
  long long insertions = 0;
  long long deletions = 0;
  long long reference_length = 0;

  long long errors() const { return substitutions + insertions + deletions; }
  // (S+I+D)/N; an empty reference yields 0 when error-free, else infinity.
  double wer() const;

  EditStats& operator+=(const EditStats& other);
};

enum class EditOp { match, substitute, insert, erase };

struct AlignResult {
  EditStats stats;
  std::vector<EditOp> ops;
};

// Minimal-edit alignment, unit costs; ties prefer substitution over
// insertion over deletion.
AlignResult align_words(std::span<const std::string> reference,
                        std::span<const std::string> hypothesis);
AlignResult align_words(std::span<const int> reference, std::span<const int> hypothesis);

// Pooled counts over the corpus (not an average of per-utterance rates).
EditStats corpus_wer(
    std::span<const std::pair<std::vector<std::string>, std::vector<std::string>>> pairs);

// Lines "id WER S I D N" in the given order plus a pooled TOTAL line.
std::string wer_report(const std::vector<std::pair<std::string, EditStats>>& per_utterance);

}  // namespace isca

#endif
