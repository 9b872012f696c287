#include "isca/io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace isca {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

[[noreturn]] void fail_at(const std::filesystem::path& path, int line_no,
                          const std::string& message) {
  throw InputError(path.string() + ":" + std::to_string(line_no) + ": " + message);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  for (;;) {
    size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) tokens.push_back(tok);
  return tokens;
}

std::string uppercase_ascii(const std::string& word) {
  std::string out = word;
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> utf8_characters(const std::string& word) {
  std::vector<std::string> chars;
  size_t i = 0;
  while (i < word.size()) {
    unsigned char lead = static_cast<unsigned char>(word[i]);
    size_t len = 1;
    if (lead >= 0xF0) len = 4;
    else if (lead >= 0xE0) len = 3;
    else if (lead >= 0xC0) len = 2;
    len = std::min(len, word.size() - i);
    chars.push_back(word.substr(i, len));
    i += len;
  }
  return chars;
}

PosteriorMatrix load_posteriors(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) fail_at(path, 1, "empty posterior file");
  if (line.rfind(kPosteriorBinaryMagic, 0) == 0)
    fail_at(path, 1, "binary posterior format is reserved and not yet supported");
  auto header = split_whitespace(line);
  if (header.size() != 2) fail_at(path, 1, "expected header 'T U'");
  int num_frames = 0, num_units = 0;
  try {
    num_frames = std::stoi(header[0]);
    num_units = std::stoi(header[1]);
  } catch (const std::exception&) {
    fail_at(path, 1, "malformed header '" + line + "'");
  }
  if (num_frames <= 0 || num_units <= 0) fail_at(path, 1, "T and U must be positive");

  std::vector<double> data;
  data.reserve(static_cast<size_t>(num_frames) * num_units);
  for (int t = 0; t < num_frames; ++t) {
    if (!std::getline(in, line)) fail_at(path, t + 2, "missing posterior row");
    auto fields = split_whitespace(line);
    if (static_cast<int>(fields.size()) != num_units)
      fail_at(path, t + 2, "expected " + std::to_string(num_units) + " entries, got " +
                               std::to_string(fields.size()));
    double sum = 0.0;
    for (const auto& f : fields) {
      double p;
      try {
        p = parse_double(f);
      } catch (const InputError&) {
        fail_at(path, t + 2, "malformed probability '" + f + "'");
      }
      if (p < 0.0) fail_at(path, t + 2, "negative entry " + f);
      sum += p;
      data.push_back(p);
    }
    if (std::abs(sum - 1.0) > 1e-6)
      fail_at(path, t + 2, "row sum " + format_double(sum) + " is off by more than 1e-6");
  }
  return PosteriorMatrix(path.stem().string(), num_frames, num_units, std::move(data));
}

void write_posteriors(const PosteriorMatrix& matrix, const std::filesystem::path& path) {
  std::ostringstream out;
  out << matrix.num_frames() << ' ' << matrix.num_units() << '\n';
  for (int t = 0; t < matrix.num_frames(); ++t) {
    for (int u = 0; u < matrix.num_units(); ++u) {
      if (u) out << ' ';
      out << format_double(matrix.at(t, u));
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

Lexicon load_lexicon(const std::filesystem::path& path, const UnitInventory& inventory) {
  auto in = open_input(path);
  Lexicon lexicon;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() < 2) fail_at(path, line_no, "empty pronunciation for '" + tokens[0] + "'");
    Pronunciation pron;
    for (size_t i = 1; i < tokens.size(); ++i) {
      auto u = inventory.find(tokens[i]);
      if (!u) fail_at(path, line_no, "unknown unit label '" + tokens[i] + "'");
      pron.push_back(*u);
    }
    try {
      lexicon.add(tokens[0], std::move(pron), inventory);
    } catch (const InputError& e) {
      fail_at(path, line_no, e.what());
    }
  }
  if (lexicon.size() == 0) throw InputError(path.string() + ": empty lexicon");
  return lexicon;
}

void write_lexicon(const Lexicon& lexicon, const UnitInventory& inventory,
                   const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& [word, prons] : lexicon.entries()) {
    for (const auto& pron : prons) {
      out << word;
      for (int u : pron) out << ' ' << inventory.label(u);
      out << '\n';
    }
  }
  write_file_atomic(path, out.str());
}

Lexicon derive_graphemic_lexicon(const std::vector<std::string>& words,
                                 const UnitInventory& inventory) {
  Lexicon lexicon;
  for (const auto& raw : words) {
    std::string word = uppercase_ascii(raw);
    if (lexicon.contains(word)) continue;
    Pronunciation pron;
    for (const auto& ch : utf8_characters(word)) {
      auto u = inventory.find(ch);
      if (!u)
        throw InputError("character '" + ch + "' of word '" + word +
                         "' is not in the unit inventory");
      pron.push_back(*u);
    }
    lexicon.add(word, std::move(pron), inventory);
  }
  return lexicon;
}

NBestList load_nbest(const std::filesystem::path& path) {
  auto in = open_input(path);
  NBestList list;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 7)
      fail_at(path, line_no, "expected 7 tab-separated fields, got " +
                                 std::to_string(fields.size()));
    if (list.hypotheses.empty()) {
      list.utterance_id = fields[0];
    } else if (fields[0] != list.utterance_id) {
      fail_at(path, line_no, "mixed utterance ids '" + list.utterance_id + "' and '" +
                                 fields[0] + "'");
    }
    int rank = 0;
    try {
      rank = std::stoi(fields[1]);
    } catch (const std::exception&) {
      fail_at(path, line_no, "malformed rank '" + fields[1] + "'");
    }
    if (rank != static_cast<int>(list.hypotheses.size()) + 1)
      fail_at(path, line_no, "rank " + fields[1] + " out of order");
    Hypothesis hyp;
    try {
      hyp.acoustic_logp = parse_double(fields[2]);
      hyp.lm_logp = parse_double(fields[3]);
      if (fields[4] != "NA") hyp.scorer_logp = parse_double(fields[4]);
    } catch (const InputError& e) {
      fail_at(path, line_no, e.what());
    }
    hyp.words = split_whitespace(fields[6]);
    int word_count = 0;
    try {
      word_count = std::stoi(fields[5]);
    } catch (const std::exception&) {
      fail_at(path, line_no, "malformed word count '" + fields[5] + "'");
    }
    if (word_count != hyp.word_count())
      fail_at(path, line_no, "word count " + fields[5] + " does not match " +
                                 std::to_string(hyp.word_count()) + " words");
    list.hypotheses.push_back(std::move(hyp));
  }
  if (list.utterance_id.empty()) list.utterance_id = path.stem().string();
  return list;
}

void write_nbest(const NBestList& nbest, const std::filesystem::path& path) {
  std::ostringstream out;
  int rank = 0;
  for (const auto& hyp : nbest.hypotheses) {
    out << nbest.utterance_id << '\t' << ++rank << '\t'
        << format_double(hyp.acoustic_logp) << '\t' << format_double(hyp.lm_logp) << '\t'
        << (hyp.scorer_logp ? format_double(*hyp.scorer_logp) : std::string("NA")) << '\t'
        << hyp.word_count() << '\t';
    for (size_t i = 0; i < hyp.words.size(); ++i) {
      if (i) out << ' ';
      out << hyp.words[i];
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

UnitPrior load_priors(const std::filesystem::path& path, const UnitInventory& inventory,
                      double floor) {
  auto in = open_input(path);
  std::vector<double> raw(inventory.size(), -1.0);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 2) fail_at(path, line_no, "expected 'label probability'");
    auto u = inventory.find(tokens[0]);
    if (!u) fail_at(path, line_no, "unknown unit label '" + tokens[0] + "'");
    if (raw[*u] >= 0.0) fail_at(path, line_no, "duplicate prior for '" + tokens[0] + "'");
    try {
      raw[*u] = parse_double(tokens[1]);
    } catch (const InputError& e) {
      fail_at(path, line_no, e.what());
    }
  }
  for (int u = 0; u < inventory.size(); ++u)
    if (raw[u] < 0.0)
      throw InputError(path.string() + ": missing prior for unit '" + inventory.label(u) + "'");
  return UnitPrior::floored(std::move(raw), floor);
}

void write_priors(const UnitPrior& prior, const UnitInventory& inventory,
                  const std::filesystem::path& path) {
  if (static_cast<int>(prior.priors.size()) != inventory.size())
    throw InputError("prior size does not match inventory");
  std::ostringstream out;
  for (int u = 0; u < inventory.size(); ++u)
    out << inventory.label(u) << ' ' << format_double(prior.priors[u]) << '\n';
  write_file_atomic(path, out.str());
}

UnitInventory load_inventory(const std::filesystem::path& path,
                             const std::string& blank_label, UnitKind kind) {
  auto in = open_input(path);
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 1)
      throw InputError(path.string() + ": one label per line, got '" + line + "'");
    labels.push_back(tokens[0]);
  }
  std::optional<int> blank;
  if (!blank_label.empty()) {
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
      if (labels[i] == blank_label) blank = i;
    if (!blank)
      throw InputError(path.string() + ": blank label '" + blank_label + "' not in inventory");
  }
  return UnitInventory(std::move(labels), blank, kind);
}

std::map<std::string, std::vector<std::string>> load_transcripts(
    const std::filesystem::path& path) {
  auto in = open_input(path);
  std::map<std::string, std::vector<std::string>> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto tokens = split_whitespace(line);
    if (tokens.empty()) continue;
    std::string id = tokens[0];
    if (out.count(id)) fail_at(path, line_no, "duplicate utterance id '" + id + "'");
    out.emplace(id, std::vector<std::string>(tokens.begin() + 1, tokens.end()));
  }
  return out;
}

void write_transcripts(const std::map<std::string, std::vector<std::string>>& transcripts,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& [id, words] : transcripts) {
    out << id;
    for (const auto& w : words) out << ' ' << w;
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

ScoreWeights load_weights(const std::filesystem::path& path) {
  auto in = open_input(path);
  ScoreWeights weights;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) fail_at(path, line_no, "expected key=value");
    std::string key = line.substr(0, eq);
    double value;
    try {
      value = parse_double(line.substr(eq + 1));
    } catch (const InputError& e) {
      fail_at(path, line_no, e.what());
    }
    if (key == "alpha") weights.lm_scale = value;
    else if (key == "beta") weights.scorer_scale = value;
    else if (key == "insertion_penalty") weights.insertion_penalty = value;
    else if (key == "blank_penalty") weights.blank_penalty = value;
    else fail_at(path, line_no, "unknown weight key '" + key + "'");
  }
  weights.validate();
  return weights;
}

void write_weights(const ScoreWeights& weights, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "alpha=" << format_double(weights.lm_scale) << '\n'
      << "beta=" << format_double(weights.scorer_scale) << '\n'
      << "insertion_penalty=" << format_double(weights.insertion_penalty) << '\n'
      << "blank_penalty=" << format_double(weights.blank_penalty) << '\n';
  write_file_atomic(path, out.str());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << contents;
    if (!out) throw InputError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace isca
