#include "isca/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

#include "isca/common.hpp"
#include "isca/io.hpp"

namespace isca {

namespace {

constexpr double kNoProb = -99.0;  // log10 placeholder for mass-free entries

double to_natural(double log10_value) { return log10_value * std::numbers::ln10; }

}  // namespace

NGramLM::NGramLM(int order, std::vector<std::string> vocabulary,
                 std::vector<std::map<std::vector<int>, NGramEntry>> tables)
    : order_(order), vocab_(std::move(vocabulary)), tables_(std::move(tables)) {
  if (order_ < 1) throw InputError("n-gram order must be at least 1");
  if (tables_.size() != static_cast<size_t>(order_)) {
    throw std::logic_error("n-gram table count does not match the order");
  }
  for (size_t i = 0; i < vocab_.size(); ++i) {
    if (!ids_.emplace(vocab_[i], static_cast<int>(i)).second) {
      throw InputError("duplicate word in vocabulary: " + vocab_[i]);
    }
  }
  auto required = [&](const char* token) {
    auto it = ids_.find(token);
    if (it == ids_.end()) {
      throw InputError(std::string("vocabulary is missing the ") + token + " token");
    }
    return it->second;
  };
  begin_ = required(kSentenceBegin);
  end_ = required(kSentenceEnd);
  unknown_ = required(kUnknownWord);
  validate();
}

void NGramLM::validate() const {
  if (tables_[0].size() != vocab_.size()) {
    throw InputError("every vocabulary word needs a unigram entry");
  }
  for (int k = 1; k <= order_; ++k) {
    for (const auto& [gram, entry] : tables_[k - 1]) {
      if (static_cast<int>(gram.size()) != k) {
        throw std::logic_error("gram length does not match its table");
      }
      for (int id : gram) {
        if (id < 0 || id >= static_cast<int>(vocab_.size())) {
          throw InputError("n-gram references a word without a unigram entry");
        }
      }
      if (k > 1) {
        const std::vector<int> history(gram.begin(), gram.end() - 1);
        auto it = tables_[k - 2].find(history);
        if (it == tables_[k - 2].end() || !it->second.log10_backoff) {
          std::string text;
          for (int id : history) text += (text.empty() ? "" : " ") + vocab_[id];
          throw InputError("history without a backoff weight: " + text);
        }
      }
      (void)entry;
    }
  }
}

int NGramLM::word_id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? unknown_ : it->second;
}

double NGramLM::word_logp_ids(std::span<const int> context, int word) const {
  if (word < 0 || word >= static_cast<int>(vocab_.size())) {
    throw std::logic_error("word id out of range");
  }
  if (context.size() > static_cast<size_t>(order_ - 1)) {
    context = context.subspan(context.size() - (order_ - 1));
  }
  double backoff = 0.0;  // natural log, accumulated while shortening context
  while (true) {
    std::vector<int> key(context.begin(), context.end());
    key.push_back(word);
    const auto& table = tables_[key.size() - 1];
    auto it = table.find(key);
    if (it != table.end()) return backoff + to_natural(it->second.log10_prob);
    if (context.empty()) throw std::logic_error("missing unigram entry during lookup");
    const std::vector<int> history(context.begin(), context.end());
    auto hit = tables_[history.size() - 1].find(history);
    if (hit != tables_[history.size() - 1].end() && hit->second.log10_backoff) {
      backoff += to_natural(*hit->second.log10_backoff);
    }
    context = context.subspan(1);
  }
}

double NGramLM::word_logp(std::span<const std::string> context, const std::string& word) const {
  std::vector<int> ids;
  ids.reserve(context.size());
  for (const std::string& w : context) ids.push_back(word_id(w));
  return word_logp_ids(ids, word_id(word));
}

double NGramLM::score_sequence(std::span<const std::string> words) const {
  std::vector<int> context;
  if (order_ > 1) context.assign(order_ - 1, begin_);
  auto shift = [&](int id) {
    if (order_ == 1) return;
    context.erase(context.begin());
    context.push_back(id);
  };
  double total = 0.0;
  for (const std::string& w : words) {
    const int id = word_id(w);
    total += word_logp_ids(context, id);
    shift(id);
  }
  total += word_logp_ids(context, end_);
  return total;
}

NGramLM train_ngram(std::span<const std::vector<std::string>> corpus, int order,
                    double discount) {
  if (corpus.empty()) throw InputError("training corpus is empty");
  if (order < 1 || order > 4) throw InputError("n-gram order must be between 1 and 4");
  if (!(discount > 0.0 && discount < 1.0)) throw InputError("discount must lie inside (0, 1)");

  std::set<std::string> seen;
  for (const auto& sentence : corpus) {
    for (const std::string& w : sentence) {
      if (w == kSentenceBegin || w == kSentenceEnd || w == kUnknownWord) {
        throw InputError("reserved token in training corpus: " + w);
      }
      seen.insert(w);
    }
  }
  std::vector<std::string> vocab(seen.begin(), seen.end());
  vocab.push_back(kSentenceBegin);
  vocab.push_back(kSentenceEnd);
  vocab.push_back(kUnknownWord);
  std::sort(vocab.begin(), vocab.end());
  std::unordered_map<std::string, int> ids;
  for (size_t i = 0; i < vocab.size(); ++i) ids[vocab[i]] = static_cast<int>(i);
  const int begin = ids[kSentenceBegin];
  const int end = ids[kSentenceEnd];
  const int unknown = ids[kUnknownWord];

  std::vector<std::map<std::vector<int>, long long>> counts(order);
  for (const auto& sentence : corpus) {
    std::vector<int> padded(order - 1, begin);
    for (const std::string& w : sentence) padded.push_back(ids[w]);
    padded.push_back(end);
    for (size_t p = order - 1; p < padded.size(); ++p) {
      for (int k = 1; k <= order; ++k) {
        ++counts[k - 1][std::vector<int>(padded.begin() + (p - k + 1), padded.begin() + p + 1)];
      }
    }
  }

  struct HistoryStats {
    long long count = 0;     // total continuations
    long long distinct = 0;  // distinct continuations
  };
  std::map<std::vector<int>, HistoryStats> histories;
  for (int k = 1; k <= order; ++k) {
    for (const auto& [gram, c] : counts[k - 1]) {
      auto& stats = histories[std::vector<int>(gram.begin(), gram.end() - 1)];
      stats.count += c;
      stats.distinct += 1;
    }
  }

  std::vector<std::map<std::vector<int>, NGramEntry>> tables(order);
  const HistoryStats& root = histories.at({});
  const double total_tokens = static_cast<double>(root.count);
  for (const auto& [gram, c] : counts[0]) {
    tables[0][gram] = {std::log10((static_cast<double>(c) - discount) / total_tokens),
                       std::nullopt};
  }
  tables[0][{unknown}] = {
      std::log10(discount * static_cast<double>(root.distinct) / total_tokens), std::nullopt};
  tables[0][{begin}] = {kNoProb, std::nullopt};

  for (int k = 2; k <= order; ++k) {
    for (const auto& [gram, c] : counts[k - 1]) {
      const std::vector<int> history(gram.begin(), gram.end() - 1);
      const HistoryStats& stats = histories.at(history);
      const double gamma =
          discount * static_cast<double>(stats.distinct) / static_cast<double>(stats.count);
      // The interpolation target is the same gram minus its first word; the
      // counting loop guarantees it was counted, so this is a direct hit.
      const std::vector<int> lower(gram.begin() + 1, gram.end());
      const double lower_prob = std::pow(10.0, tables[k - 2].at(lower).log10_prob);
      const double prob = (static_cast<double>(c) - discount) / static_cast<double>(stats.count) +
                          gamma * lower_prob;
      tables[k - 1][gram] = {std::log10(prob), std::nullopt};
    }
  }

  for (const auto& [history, stats] : histories) {
    if (history.empty()) continue;
    auto& table = tables[history.size() - 1];
    auto it = table.find(history);
    if (it == table.end()) {
      it = table.emplace(history, NGramEntry{kNoProb, std::nullopt}).first;
    }
    it->second.log10_backoff =
        std::log10(discount * static_cast<double>(stats.distinct) / static_cast<double>(stats.count));
  }

  return NGramLM(order, std::move(vocab), std::move(tables));
}

NGramLM read_arpa(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open language model file " + path.string());

  auto fail = [&](int line_number, const std::string& message) -> InputError {
    return InputError(path.string() + ":" + std::to_string(line_number) + ": " + message);
  };

  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }

  size_t pos = 0;
  auto next_content = [&]() -> std::optional<size_t> {
    while (pos < lines.size()) {
      if (!split_whitespace(lines[pos]).empty()) return pos;
      ++pos;
    }
    return std::nullopt;
  };

  auto at = next_content();
  if (!at || lines[*at] != "\\data\\") {
    throw fail(static_cast<int>(pos) + 1, "expected \\data\\ header");
  }
  ++pos;

  std::vector<long long> declared;
  while (true) {
    at = next_content();
    if (!at) throw fail(static_cast<int>(pos), "unterminated \\data\\ section");
    const std::string& text = lines[*at];
    if (text.rfind("ngram ", 0) != 0) break;
    const size_t eq = text.find('=');
    if (eq == std::string::npos) throw fail(static_cast<int>(*at) + 1, "malformed ngram count");
    int k = 0;
    long long n = 0;
    try {
      k = std::stoi(text.substr(6, eq - 6));
      n = std::stoll(text.substr(eq + 1));
    } catch (const std::exception&) {
      throw fail(static_cast<int>(*at) + 1, "malformed ngram count");
    }
    if (k != static_cast<int>(declared.size()) + 1) {
      throw fail(static_cast<int>(*at) + 1, "ngram counts must be consecutive from 1");
    }
    declared.push_back(n);
    ++pos;
  }
  if (declared.empty()) throw InputError(path.string() + ": no ngram counts declared");
  const int order = static_cast<int>(declared.size());

  // First pass over sections collects raw string grams; ids are assigned
  // from the unigram section afterwards.
  struct RawEntry {
    std::vector<std::string> words;
    double log10_prob;
    std::optional<double> log10_backoff;
    int line_number;
  };
  std::vector<std::vector<RawEntry>> raw(order);
  for (int k = 1; k <= order; ++k) {
    at = next_content();
    const std::string header = "\\" + std::to_string(k) + "-grams:";
    if (!at || lines[*at] != header) {
      throw fail(at ? static_cast<int>(*at) + 1 : static_cast<int>(pos), "expected " + header);
    }
    ++pos;
    while (true) {
      at = next_content();
      if (!at) throw fail(static_cast<int>(pos), "unterminated n-gram section");
      const std::string& text = lines[*at];
      if (!text.empty() && text[0] == '\\') break;
      const std::vector<std::string> fields = split_whitespace(text);
      if (fields.size() != static_cast<size_t>(k) + 1 &&
          fields.size() != static_cast<size_t>(k) + 2) {
        throw fail(static_cast<int>(*at) + 1, "malformed " + std::to_string(k) + "-gram line");
      }
      RawEntry entry;
      entry.line_number = static_cast<int>(*at) + 1;
      try {
        entry.log10_prob = parse_double(fields[0]);
        if (fields.size() == static_cast<size_t>(k) + 2) {
          entry.log10_backoff = parse_double(fields.back());
        }
      } catch (const std::exception&) {
        throw fail(entry.line_number, "malformed probability field");
      }
      entry.words.assign(fields.begin() + 1, fields.begin() + 1 + k);
      raw[k - 1].push_back(std::move(entry));
      ++pos;
    }
    if (static_cast<long long>(raw[k - 1].size()) != declared[k - 1]) {
      throw InputError(path.string() + ": \\" + std::to_string(k) + "-grams: section has " +
                       std::to_string(raw[k - 1].size()) + " entries, header declares " +
                       std::to_string(declared[k - 1]));
    }
  }
  at = next_content();
  if (!at || lines[*at] != "\\end\\") {
    throw fail(at ? static_cast<int>(*at) + 1 : static_cast<int>(pos), "expected \\end\\");
  }

  std::vector<std::string> vocab;
  vocab.reserve(raw[0].size());
  for (const RawEntry& entry : raw[0]) vocab.push_back(entry.words[0]);
  std::sort(vocab.begin(), vocab.end());
  if (std::adjacent_find(vocab.begin(), vocab.end()) != vocab.end()) {
    throw InputError(path.string() + ": duplicate unigram entry");
  }
  std::unordered_map<std::string, int> ids;
  for (size_t i = 0; i < vocab.size(); ++i) ids[vocab[i]] = static_cast<int>(i);

  std::vector<std::map<std::vector<int>, NGramEntry>> tables(order);
  for (int k = 1; k <= order; ++k) {
    for (const RawEntry& entry : raw[k - 1]) {
      std::vector<int> gram;
      gram.reserve(k);
      for (const std::string& w : entry.words) {
        auto it = ids.find(w);
        if (it == ids.end()) {
          throw fail(entry.line_number, "word without a unigram entry: " + w);
        }
        gram.push_back(it->second);
      }
      if (!tables[k - 1].emplace(gram, NGramEntry{entry.log10_prob, entry.log10_backoff}).second) {
        throw fail(entry.line_number, "duplicate n-gram entry");
      }
    }
  }
  return NGramLM(order, std::move(vocab), std::move(tables));
}

void write_arpa(const NGramLM& lm, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "\\data\\\n";
  for (int k = 1; k <= lm.order(); ++k) {
    out << "ngram " << k << "=" << lm.tables()[k - 1].size() << "\n";
  }
  for (int k = 1; k <= lm.order(); ++k) {
    out << "\n\\" << k << "-grams:\n";
    for (const auto& [gram, entry] : lm.tables()[k - 1]) {
      out << format_double(entry.log10_prob) << "\t";
      for (size_t i = 0; i < gram.size(); ++i) {
        out << (i ? " " : "") << lm.vocabulary()[gram[i]];
      }
      if (entry.log10_backoff) out << "\t" << format_double(*entry.log10_backoff);
      out << "\n";
    }
  }
  out << "\n\\end\\\n";
  write_file_atomic(path, out.str());
}

}  // namespace isca
