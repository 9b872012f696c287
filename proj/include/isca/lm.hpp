#ifndef ISCA_LM_HPP
#define ISCA_LM_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace isca {

inline constexpr const char* kSentenceBegin = "<s>";
inline constexpr const char* kSentenceEnd = "</s>";
inline constexpr const char* kUnknownWord = "<unk>";

// Probabilities are stored in log10 as in ARPA files; scoring converts to
// natural log. A log10 value of -99 marks an entry that carries no
// probability mass (the sentence-begin token).
struct NGramEntry {
  double log10_prob = 0.0;
  std::optional<double> log10_backoff;
};

// Back-off n-gram model. tables()[k-1] maps word-id sequences of length k to
// their entries; ids index into vocabulary(), which is sorted and always
// contains the sentence-begin, sentence-end, and unknown tokens.
class NGramLM {
 public:
  NGramLM(int order, std::vector<std::string> vocabulary,
          std::vector<std::map<std::vector<int>, NGramEntry>> tables);

  int order() const { return order_; }
  const std::vector<std::string>& vocabulary() const { return vocab_; }
  const std::vector<std::map<std::vector<int>, NGramEntry>>& tables() const { return tables_; }

  int begin_id() const { return begin_; }
  int end_id() const { return end_; }
  int unknown_id() const { return unknown_; }
  // Unknown words collapse to the unknown token.
  int word_id(std::string_view word) const;

  // ln P(word | context), context most-recent-last, truncated to order-1,
  // backed off through stored backoff weights per ARPA semantics.
  double word_logp_ids(std::span<const int> context, int word) const;
  double word_logp(std::span<const std::string> context, const std::string& word) const;

  // ln P(words </s>) with implicit <s> context.
  double score_sequence(std::span<const std::string> words) const;

 private:
  void validate() const;

  int order_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> ids_;
  std::vector<std::map<std::vector<int>, NGramEntry>> tables_;
  int begin_ = -1;
  int end_ = -1;
  int unknown_ = -1;
};

// Absolute-discounting back-off estimates (single discount, interpolated
// probabilities); the discounted mass at the unigram level goes to the
// unknown token.
NGramLM train_ngram(std::span<const std::vector<std::string>> corpus, int order,
                    double discount = 0.5);

NGramLM read_arpa(const std::filesystem::path& path);
void write_arpa(const NGramLM& lm, const std::filesystem::path& path);

}  // namespace isca

#endif
