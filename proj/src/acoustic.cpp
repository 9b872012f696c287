#include "isca/acoustic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "isca/common.hpp"

namespace isca {

namespace {

constexpr double kPosteriorFloor = 1e-10;

// Emitting states only, with epsilon paths through non-emitting states folded
// into entry weights (start -> state), exit weights (state -> final), and
// state-to-state arc weights. Parallel epsilon paths combine by log-sum for
// forward scoring and by max for Viterbi.
struct DenseGraph {
  std::vector<int> state_ids;    // dense index -> graph state id
  std::vector<int> emissions;    // dense index -> unit index
  std::vector<double> entry;
  std::vector<double> exit;
  std::vector<std::vector<std::pair<int, double>>> incoming;  // (source, logp)
};

double combine(double a, double b, bool use_sum) {
  return use_sum ? log_add(a, b) : std::max(a, b);
}

// Follows arcs from `state` through non-emitting states, accumulating `acc`.
// Deposits mass into emitting targets and into `into_final` when a final
// state is reached without consuming a frame.
void expand_epsilon(const StateGraph& graph, const std::vector<std::vector<const GraphTransition*>>& out,
                    const std::vector<int>& dense_of, int state, double acc, bool use_sum,
                    std::vector<double>& into_emitting, double& into_final, int depth) {
  if (depth > graph.num_states()) {
    throw std::logic_error("cycle of non-emitting states in graph");
  }
  if (graph.is_final(state)) into_final = combine(into_final, acc, use_sum);
  for (const GraphTransition* arc : out[state]) {
    const double w = acc + arc->logp;
    if (graph.is_emitting(arc->to)) {
      double& slot = into_emitting[dense_of[arc->to]];
      slot = combine(slot, w, use_sum);
    } else {
      expand_epsilon(graph, out, dense_of, arc->to, w, use_sum, into_emitting, into_final,
                     depth + 1);
    }
  }
}

DenseGraph compile(const StateGraph& graph, bool use_sum) {
  if (graph.start < 0 || graph.start >= graph.num_states() || graph.is_emitting(graph.start)) {
    throw std::logic_error("graph start state must exist and be non-emitting");
  }
  DenseGraph dense;
  std::vector<int> dense_of(graph.states.size(), -1);
  for (int s = 0; s < graph.num_states(); ++s) {
    if (graph.is_emitting(s)) {
      dense_of[s] = static_cast<int>(dense.state_ids.size());
      dense.state_ids.push_back(s);
      dense.emissions.push_back(*graph.states[s].emission);
    }
  }
  std::vector<std::vector<const GraphTransition*>> out(graph.states.size());
  for (const GraphTransition& arc : graph.transitions) out[arc.from].push_back(&arc);

  const int n = static_cast<int>(dense.state_ids.size());
  dense.entry.assign(n, kLogZero);
  dense.exit.assign(n, kLogZero);
  dense.incoming.resize(n);

  double start_final = kLogZero;  // empty-path mass; unused since T >= 1
  expand_epsilon(graph, out, dense_of, graph.start, 0.0, use_sum, dense.entry, start_final, 0);

  std::vector<double> row(n);
  for (int i = 0; i < n; ++i) {
    std::fill(row.begin(), row.end(), kLogZero);
    const int s = dense.state_ids[i];
    double into_final = graph.is_final(s) ? 0.0 : kLogZero;
    for (const GraphTransition* arc : out[s]) {
      const double w = arc->logp;
      if (graph.is_emitting(arc->to)) {
        double& slot = row[dense_of[arc->to]];
        slot = combine(slot, w, use_sum);
      } else {
        expand_epsilon(graph, out, dense_of, arc->to, w, use_sum, row, into_final, 0);
      }
    }
    dense.exit[i] = into_final;
    for (int j = 0; j < n; ++j) {
      if (!is_log_zero(row[j])) dense.incoming[j].emplace_back(i, row[j]);
    }
  }
  return dense;
}

void check_emissions(const DenseGraph& dense, const ScoredFrames& frames) {
  for (int e : dense.emissions) {
    if (e < 0 || e >= frames.num_units()) {
      throw std::logic_error("graph emission index out of range for scored frames");
    }
  }
}

}  // namespace

ScoredFrames::ScoredFrames(std::string utterance_id, int num_frames, int num_units,
                           std::vector<double> row_major, std::optional<int> blank_index)
    : utterance_id_(std::move(utterance_id)),
      num_frames_(num_frames),
      num_units_(num_units),
      data_(std::move(row_major)),
      blank_index_(blank_index) {
  if (num_frames_ <= 0 || num_units_ <= 0 ||
      data_.size() != static_cast<size_t>(num_frames_) * num_units_) {
    throw std::logic_error("scored frame dimensions do not match the data");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::logic_error("scored frames must be finite");
  }
  if (blank_index_ && (*blank_index_ < 0 || *blank_index_ >= num_units_)) {
    throw std::logic_error("blank index out of range in scored frames");
  }
}

UnitPrior estimate_priors(std::span<const PosteriorMatrix> posteriors, double floor) {
  if (posteriors.empty()) throw InputError("prior estimation needs at least one utterance");
  const int num_units = posteriors.front().num_units();
  std::vector<double> sums(num_units, 0.0);
  long long total_frames = 0;
  for (const PosteriorMatrix& post : posteriors) {
    if (post.num_units() != num_units) {
      throw InputError("utterance " + post.utterance_id() + " has " +
                       std::to_string(post.num_units()) + " units, expected " +
                       std::to_string(num_units));
    }
    for (int t = 0; t < post.num_frames(); ++t) {
      for (int u = 0; u < num_units; ++u) sums[u] += post.at(t, u);
    }
    total_frames += post.num_frames();
  }
  for (double& s : sums) s /= static_cast<double>(total_frames);
  return UnitPrior::floored(std::move(sums), floor);
}

ScoredFrames score_frames(const PosteriorMatrix& posteriors, const UnitInventory& inventory,
                          const UnitPrior* priors, const ScoreWeights& weights,
                          double prior_scale) {
  weights.validate();
  if (inventory.size() != posteriors.num_units()) {
    throw InputError("posterior width " + std::to_string(posteriors.num_units()) +
                     " does not match inventory size " + std::to_string(inventory.size()));
  }
  if (prior_scale != 0.0 && priors == nullptr) {
    throw InputError("prior scale is nonzero but no priors were given");
  }
  if (priors != nullptr && static_cast<int>(priors->priors.size()) != posteriors.num_units()) {
    throw InputError("prior vector size does not match the posterior width");
  }
  const int num_frames = posteriors.num_frames();
  const int num_units = posteriors.num_units();
  std::vector<double> data(static_cast<size_t>(num_frames) * num_units);
  for (int t = 0; t < num_frames; ++t) {
    for (int u = 0; u < num_units; ++u) {
      double v = std::log(std::max(posteriors.at(t, u), kPosteriorFloor));
      if (prior_scale != 0.0) v -= prior_scale * std::log(priors->priors[u]);
      if (inventory.is_blank(u)) v -= weights.blank_penalty;
      data[static_cast<size_t>(t) * num_units + u] = v;
    }
  }
  return ScoredFrames(posteriors.utterance_id(), num_frames, num_units, std::move(data),
                      inventory.blank());
}

double forward_loglik(const StateGraph& graph, const ScoredFrames& frames) {
  const DenseGraph dense = compile(graph, /*use_sum=*/true);
  check_emissions(dense, frames);
  const int n = static_cast<int>(dense.state_ids.size());
  if (n == 0) return kLogZero;
  const int num_frames = frames.num_frames();

  std::vector<double> cur(n), nxt(n);
  for (int i = 0; i < n; ++i) {
    cur[i] = is_log_zero(dense.entry[i]) ? kLogZero
                                         : dense.entry[i] + frames.at(0, dense.emissions[i]);
  }
  for (int t = 1; t < num_frames; ++t) {
    for (int j = 0; j < n; ++j) {
      double acc = kLogZero;
      for (const auto& [i, w] : dense.incoming[j]) acc = log_add(acc, cur[i] + w);
      nxt[j] = is_log_zero(acc) ? kLogZero : acc + frames.at(t, dense.emissions[j]);
    }
    cur.swap(nxt);
  }
  double total = kLogZero;
  for (int i = 0; i < n; ++i) {
    if (!is_log_zero(cur[i]) && !is_log_zero(dense.exit[i])) {
      total = log_add(total, cur[i] + dense.exit[i]);
    }
  }
  return total;
}

double viterbi_loglik(const StateGraph& graph, const ScoredFrames& frames) {
  const DenseGraph dense = compile(graph, /*use_sum=*/false);
  check_emissions(dense, frames);
  const int n = static_cast<int>(dense.state_ids.size());
  if (n == 0) return kLogZero;
  const int num_frames = frames.num_frames();

  std::vector<double> cur(n), nxt(n);
  for (int i = 0; i < n; ++i) {
    cur[i] = is_log_zero(dense.entry[i]) ? kLogZero
                                         : dense.entry[i] + frames.at(0, dense.emissions[i]);
  }
  for (int t = 1; t < num_frames; ++t) {
    for (int j = 0; j < n; ++j) {
      double best = kLogZero;
      for (const auto& [i, w] : dense.incoming[j]) best = std::max(best, cur[i] + w);
      nxt[j] = is_log_zero(best) ? kLogZero : best + frames.at(t, dense.emissions[j]);
    }
    cur.swap(nxt);
  }
  double total = kLogZero;
  for (int i = 0; i < n; ++i) {
    if (!is_log_zero(cur[i]) && !is_log_zero(dense.exit[i])) {
      total = std::max(total, cur[i] + dense.exit[i]);
    }
  }
  return total;
}

namespace {

// Reconstructs the dense-state path ending in predecessor chain (t, i).
std::vector<int> trace_path(const std::vector<std::vector<int>>& backptr, int t, int i) {
  std::vector<int> path(static_cast<size_t>(t) + 1);
  for (int k = t; k >= 0; --k) {
    path[k] = i;
    i = backptr[k][i];
  }
  return path;
}

// True when path a is preferred over path b under the alignment tie rule:
// earliest non-blank emission wins, then lower graph state ids.
bool path_preferred(const std::vector<int>& a, const std::vector<int>& b,
                    const DenseGraph& dense, std::optional<int> blank) {
  if (blank) {
    for (size_t k = 0; k < a.size() && k < b.size(); ++k) {
      const bool na = dense.emissions[a[k]] != *blank;
      const bool nb = dense.emissions[b[k]] != *blank;
      if (na != nb) return na;
    }
  }
  for (size_t k = 0; k < a.size() && k < b.size(); ++k) {
    if (a[k] != b[k]) return dense.state_ids[a[k]] < dense.state_ids[b[k]];
  }
  return false;
}

}  // namespace

Alignment viterbi_align(const StateGraph& graph, const ScoredFrames& frames) {
  const DenseGraph dense = compile(graph, /*use_sum=*/false);
  check_emissions(dense, frames);
  const int n = static_cast<int>(dense.state_ids.size());
  const int num_frames = frames.num_frames();
  if (n == 0) throw InputError("no feasible alignment: graph has no emitting states");

  std::vector<std::vector<double>> score(num_frames, std::vector<double>(n, kLogZero));
  std::vector<std::vector<int>> backptr(num_frames, std::vector<int>(n, -1));
  for (int i = 0; i < n; ++i) {
    if (!is_log_zero(dense.entry[i])) {
      score[0][i] = dense.entry[i] + frames.at(0, dense.emissions[i]);
    }
  }
  for (int t = 1; t < num_frames; ++t) {
    for (int j = 0; j < n; ++j) {
      double best = kLogZero;
      int best_i = -1;
      for (const auto& [i, w] : dense.incoming[j]) {
        if (is_log_zero(score[t - 1][i])) continue;
        const double cand = score[t - 1][i] + w;
        if (is_log_zero(cand)) continue;
        if (best_i < 0 || cand > best) {
          best = cand;
          best_i = i;
        } else if (cand == best &&
                   path_preferred(trace_path(backptr, t - 1, i), trace_path(backptr, t - 1, best_i),
                                  dense, frames.blank_index())) {
          best_i = i;
        }
      }
      if (best_i >= 0) {
        score[t][j] = best + frames.at(t, dense.emissions[j]);
        backptr[t][j] = best_i;
      }
    }
  }
  double best = kLogZero;
  int best_i = -1;
  for (int i = 0; i < n; ++i) {
    if (is_log_zero(score[num_frames - 1][i]) || is_log_zero(dense.exit[i])) continue;
    const double cand = score[num_frames - 1][i] + dense.exit[i];
    if (best_i < 0 || cand > best) {
      best = cand;
      best_i = i;
    } else if (cand == best &&
               path_preferred(trace_path(backptr, num_frames - 1, i),
                              trace_path(backptr, num_frames - 1, best_i), dense,
                              frames.blank_index())) {
      best_i = i;
    }
  }
  if (best_i < 0) {
    throw InputError("no feasible alignment for utterance " + frames.utterance_id());
  }
  const std::vector<int> densepath = trace_path(backptr, num_frames - 1, best_i);
  Alignment result;
  result.logp = best;
  result.states.reserve(densepath.size());
  for (int i : densepath) result.states.push_back(dense.state_ids[i]);
  return result;
}

double ctc_prefix_score(const PosteriorMatrix& posteriors, std::span<const int> prefix,
                        const UnitInventory& inventory) {
  if (!inventory.blank()) throw InputError("prefix scoring requires a blank unit");
  if (inventory.size() != posteriors.num_units()) {
    throw InputError("posterior width does not match the unit inventory");
  }
  const int blank = *inventory.blank();
  for (int c : prefix) {
    if (c < 0 || c >= inventory.size()) throw InputError("prefix unit index out of range");
    if (c == blank) throw InputError("blank is not allowed inside a label prefix");
  }
  if (prefix.empty()) return 0.0;  // every output extends the empty prefix
  const int num_frames = posteriors.num_frames();
  if (static_cast<int>(prefix.size()) > num_frames) return kLogZero;

  auto lp = [&](int t, int u) { return std::log(posteriors.at(t, u)); };

  // Mass of paths collapsing exactly to the prefix consumed so far, split by
  // whether the last frame emitted blank (gb) or the last prefix label (gn).
  std::vector<double> gb(static_cast<size_t>(num_frames) + 1), gn(num_frames + 1, kLogZero);
  gb[0] = 0.0;
  for (int t = 1; t <= num_frames; ++t) gb[t] = gb[t - 1] + lp(t - 1, blank);

  int last = -1;
  double psi = kLogZero;
  for (int c : prefix) {
    std::vector<double> nb(num_frames + 1, kLogZero), bb(num_frames + 1, kLogZero);
    psi = kLogZero;
    for (int t = 1; t <= num_frames; ++t) {
      const double phi = (c == last) ? gb[t - 1] : log_add(gb[t - 1], gn[t - 1]);
      psi = log_add(psi, lp(t - 1, c) + phi);
      nb[t] = lp(t - 1, c) + log_add(phi, nb[t - 1]);
      bb[t] = lp(t - 1, blank) + log_add(bb[t - 1], nb[t - 1]);
    }
    gn = std::move(nb);
    gb = std::move(bb);
    last = c;
  }
  return psi;
}

}  // namespace isca
