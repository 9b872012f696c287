#include "isca/scorer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "isca/common.hpp"
#include "isca/io.hpp"
#include "isca/topology.hpp"

namespace isca {

double FileScorerTable::score(const std::string& utterance_id,
                              std::span<const int> units) const {
  auto it = table_.find({utterance_id, std::vector<int>(units.begin(), units.end())});
  return it == table_.end() ? kLogZero : it->second;
}

void FileScorerTable::add(std::string utterance_id, std::vector<int> units, double logp) {
  if (!std::isfinite(logp)) throw InputError("scorer table entries must be finite");
  if (!table_.emplace(std::make_pair(std::move(utterance_id), std::move(units)), logp).second) {
    throw InputError("duplicate scorer table entry");
  }
}

FileScorerTable FileScorerTable::load(const std::filesystem::path& path,
                                      const UnitInventory& inventory) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open scorer table " + path.string());
  FileScorerTable table;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fail = [&](const std::string& message) -> InputError {
      return InputError(path.string() + ":" + std::to_string(line_number) + ": " + message);
    };
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
      const size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) throw fail("expected 3 tab-separated fields");
    if (fields[0].empty()) throw fail("empty utterance id");
    double logp = 0.0;
    try {
      logp = parse_double(fields[1]);
    } catch (const std::exception&) {
      throw fail("malformed score: " + fields[1]);
    }
    if (!std::isfinite(logp)) throw fail("scorer table entries must be finite");
    std::vector<int> units;
    for (const std::string& label : split_whitespace(fields[2])) {
      const auto u = inventory.find(label);
      if (!u) throw fail("unknown unit label: " + label);
      units.push_back(*u);
    }
    if (!table.table_.emplace(std::make_pair(fields[0], std::move(units)), logp).second) {
      throw fail("duplicate scorer table entry");
    }
  }
  return table;
}

void FileScorerTable::save(const std::filesystem::path& path,
                           const UnitInventory& inventory) const {
  std::ostringstream out;
  for (const auto& [key, logp] : table_) {
    out << key.first << '\t' << format_double(logp) << '\t';
    for (size_t i = 0; i < key.second.size(); ++i) {
      out << (i ? " " : "") << inventory.label(key.second[i]);
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

namespace {

class CtcLabelScorer : public LabelScorer {
 public:
  CtcLabelScorer(const PosteriorMatrix& posteriors, const UnitInventory& inventory)
      : inventory_(inventory),
        frames_(score_frames(posteriors, inventory, nullptr, ScoreWeights{}, 0.0)) {
    if (!inventory.blank()) {
      throw InputError("the built-in label scorer requires a blank unit");
    }
  }

  double score(const std::string& utterance_id, std::span<const int> units) const override {
    if (utterance_id != frames_.utterance_id()) return kLogZero;
    for (int u : units) {
      if (u < 0 || u >= inventory_.size() || inventory_.is_blank(u)) return kLogZero;
    }
    const StateGraph graph = build_ctc_sequence_graph(units, inventory_, TransitionStyle::unit);
    return forward_loglik(graph, frames_);
  }

 private:
  UnitInventory inventory_;
  ScoredFrames frames_;
};

}  // namespace

std::unique_ptr<LabelScorer> make_ctc_label_scorer(const PosteriorMatrix& posteriors,
                                                   const UnitInventory& inventory) {
  return std::make_unique<CtcLabelScorer>(posteriors, inventory);
}

}  // namespace isca
