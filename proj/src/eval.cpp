#include "isca/eval.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "isca/common.hpp"

namespace isca {

double EditStats::wer() const {
  if (reference_length == 0) {
    return errors() > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  }
  return static_cast<double>(errors()) / static_cast<double>(reference_length);
}

EditStats& EditStats::operator+=(const EditStats& other) {
  substitutions += other.substitutions;
  insertions += other.insertions;
  deletions += other.deletions;
  reference_length += other.reference_length;
  return *this;
}

namespace {

template <typename T>
AlignResult align_core(std::span<const T> reference, std::span<const T> hypothesis) {
  const size_t rows = reference.size() + 1;
  const size_t cols = hypothesis.size() + 1;
  // Scratch table is reused across calls; alignment dominates scoring runs.
  thread_local std::vector<int> cost;
  cost.resize(rows * cols);
  auto at = [&cols](size_t i, size_t j) { return i * cols + j; };

  for (size_t j = 0; j < cols; ++j) cost[at(0, j)] = static_cast<int>(j);
  for (size_t i = 1; i < rows; ++i) {
    cost[at(i, 0)] = static_cast<int>(i);
    for (size_t j = 1; j < cols; ++j) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      // Tie order: substitution (or match) first, then insertion, deletion.
      int best = cost[at(i - 1, j - 1)] + (same ? 0 : 1);
      const int inserted = cost[at(i, j - 1)] + 1;
      if (inserted < best) best = inserted;
      const int erased = cost[at(i - 1, j)] + 1;
      if (erased < best) best = erased;
      cost[at(i, j)] = best;
    }
  }

  AlignResult result;
  result.stats.reference_length = static_cast<long long>(reference.size());
  result.ops.reserve(rows + cols - 2);
  size_t i = rows - 1;
  size_t j = cols - 1;
  // Re-derive each step in the same preference order the forward pass used.
  while (i > 0 || j > 0) {
    if (i == 0) {
      result.ops.push_back(EditOp::insert);
      ++result.stats.insertions;
      --j;
    } else if (j == 0) {
      result.ops.push_back(EditOp::erase);
      ++result.stats.deletions;
      --i;
    } else {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      const int here = cost[at(i, j)];
      if (here == cost[at(i - 1, j - 1)] + (same ? 0 : 1)) {
        result.ops.push_back(same ? EditOp::match : EditOp::substitute);
        if (!same) ++result.stats.substitutions;
        --i;
        --j;
      } else if (here == cost[at(i, j - 1)] + 1) {
        result.ops.push_back(EditOp::insert);
        ++result.stats.insertions;
        --j;
      } else {
        result.ops.push_back(EditOp::erase);
        ++result.stats.deletions;
        --i;
      }
    }
  }
  std::reverse(result.ops.begin(), result.ops.end());
  return result;
}

}  // namespace

AlignResult align_words(std::span<const std::string> reference,
                        std::span<const std::string> hypothesis) {
  return align_core(reference, hypothesis);
}

AlignResult align_words(std::span<const int> reference, std::span<const int> hypothesis) {
  return align_core(reference, hypothesis);
}

EditStats corpus_wer(
    std::span<const std::pair<std::vector<std::string>, std::vector<std::string>>> pairs) {
  if (pairs.empty()) throw InputError("cannot score an empty corpus");
  EditStats total;
  for (const auto& [reference, hypothesis] : pairs) {
    total += align_words(std::span<const std::string>(reference),
                         std::span<const std::string>(hypothesis))
                 .stats;
  }
  return total;
}

namespace {

std::string format_wer(double wer) {
  if (wer == std::numeric_limits<double>::infinity()) return "inf";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << wer;
  return out.str();
}

void report_line(std::ostringstream& out, const std::string& id, const EditStats& stats) {
  out << id << ' ' << format_wer(stats.wer()) << ' ' << stats.substitutions << ' '
      << stats.insertions << ' ' << stats.deletions << ' ' << stats.reference_length << '\n';
}

}  // namespace

std::string wer_report(const std::vector<std::pair<std::string, EditStats>>& per_utterance) {
  std::ostringstream out;
  EditStats total;
  for (const auto& [id, stats] : per_utterance) {
    report_line(out, id, stats);
    total += stats;
  }
  report_line(out, "TOTAL", total);
  return out.str();
}

}  // namespace isca
