// Acceptance checks for the decoding framework: each check prints exactly
// one pass/fail line. Tolerances and runtime budgets are pinned below.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "isca/acoustic.hpp"
#include "isca/decoder.hpp"
#include "isca/eval.hpp"
#include "isca/io.hpp"
#include "isca/lm.hpp"
#include "isca/rescore.hpp"
#include "isca/scorer.hpp"
#include "isca/topology.hpp"
#include "isca/tune.hpp"

using namespace isca;

namespace {

constexpr double kLogTol = 1e-9;   // log-domain score agreement
constexpr double kWerTol = 0.1;    // tuner WER vs. exhaustive grid, absolute
constexpr double kNormTol = 1e-4;  // per-history probability sums

std::string format_failure(const char* fmt, double a, double b) {
  char buffer[160];
  std::snprintf(buffer, sizeof(buffer), fmt, a, b);
  return buffer;
}

// ---------------------------------------------------------------------------
// 1. Forward scores over the blank-interleaved graph match a directly
//    implemented recursion and brute-force path enumeration.
// ---------------------------------------------------------------------------

// Independent two-row recursion over the blank-extended label sequence,
// entirely in the probability domain.
double direct_recursion_prob(const PosteriorMatrix& m, const std::vector<int>& sequence) {
  const int T = m.num_frames();
  const int S = 2 * static_cast<int>(sequence.size()) + 1;
  std::vector<int> ext(S, 0);
  for (size_t i = 0; i < sequence.size(); ++i) ext[2 * i + 1] = sequence[i];

  std::vector<double> prev(S, 0.0), cur(S, 0.0);
  prev[0] = m.at(0, 0);
  if (S > 1) prev[1] = m.at(0, ext[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double mass = prev[s];
      if (s >= 1) mass += prev[s - 1];
      if (s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2]) mass += prev[s - 2];
      cur[s] = mass * m.at(t, ext[s]);
    }
    std::swap(prev, cur);
  }
  double total = prev[S - 1];
  if (S > 1) total += prev[S - 2];
  return total;
}

bool log_matches_prob(double logp, double prob) {
  if (prob <= 0.0) return is_log_zero(logp);
  return !is_log_zero(logp) && std::abs(logp - std::log(prob)) <= kLogTol;
}

std::string check_forward_equivalence() {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> units_dist(2, 4);
  std::uniform_int_distribution<int> frames_dist(1, 6);
  std::uniform_int_distribution<int> len_dist(0, 3);

  for (int trial = 0; trial < 200; ++trial) {
    const int U = units_dist(rng);
    const int T = frames_dist(rng);
    std::vector<std::string> names;
    for (int u = 1; u < U; ++u) names.push_back("l" + std::to_string(u));
    const UnitInventory inventory = test_support::blank_inventory(names);

    std::uniform_int_distribution<int> label_dist(1, U - 1);
    std::vector<int> sequence(len_dist(rng));
    for (int& u : sequence) u = label_dist(rng);

    const PosteriorMatrix matrix = test_support::make_matrix(
        "t" + std::to_string(trial), test_support::random_rows(rng, T, U));
    const ScoredFrames frames = test_support::raw_log_frames(matrix, inventory);
    const StateGraph graph = build_ctc_sequence_graph(sequence, inventory);

    const double forward = forward_loglik(graph, frames);
    const double recursion = direct_recursion_prob(matrix, sequence);
    const double enumerated = test_support::brute_force_ctc_mass(matrix, 0, sequence);

    if (!log_matches_prob(forward, recursion)) {
      return format_failure("trial forward %.12f vs direct recursion mass %.3e", forward,
                            recursion);
    }
    if (!log_matches_prob(forward, enumerated)) {
      return format_failure("trial forward %.12f vs enumerated path mass %.3e", forward,
                            enumerated);
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 2. Beam search with an effectively infinite beam reproduces the exhaustive
//    top-5 ranking.
// ---------------------------------------------------------------------------

std::string check_decoder_exactness() {
  std::mt19937 rng(23);
  std::uniform_int_distribution<int> vocab_dist(2, 5);
  std::uniform_int_distribution<int> letters_dist(2, 3);
  std::uniform_int_distribution<int> frames_dist(1, 8);
  std::uniform_int_distribution<int> pron_len_dist(1, 3);
  std::uniform_real_distribution<double> lm_scale_dist(0.0, 1.5);

  for (int trial = 0; trial < 100; ++trial) {
    int V, T, num_letters;
    if (trial == 0) {  // the deliberately largest instance
      V = 5;
      T = 8;
      num_letters = 2;
    } else {
      V = vocab_dist(rng);
      num_letters = letters_dist(rng);
      T = frames_dist(rng);
      // Keep the enumeration space small enough for the oracle.
      auto sequence_count = [&](int depth) {
        double total = 1.0, power = 1.0;
        for (int k = 1; k <= depth; ++k) total += power *= V;
        return total;
      };
      while (T > 1 && sequence_count(T) > 60000.0) --T;
    }

    std::vector<std::string> names;
    for (int l = 0; l < num_letters; ++l) names.push_back(std::string(1, char('a' + l)));
    const UnitInventory inventory = test_support::blank_inventory(names);

    std::uniform_int_distribution<int> unit_dist(1, num_letters);
    Lexicon lexicon;
    for (int v = 0; v < V; ++v) {
      const std::string word = "W" + std::to_string(v);
      std::set<Pronunciation> prons;
      Pronunciation pron(pron_len_dist(rng));
      for (int& u : pron) u = unit_dist(rng);
      prons.insert(pron);
      lexicon.add(word, pron, inventory);
      if (trial != 0 && rng() % 4 == 0) {  // occasional second pronunciation
        Pronunciation extra(pron_len_dist(rng));
        for (int& u : extra) u = unit_dist(rng);
        if (prons.insert(extra).second) lexicon.add(word, extra, inventory);
      }
    }

    std::uniform_int_distribution<int> sentence_len(1, 3);
    std::uniform_int_distribution<int> word_pick(0, V - 1);
    std::vector<std::vector<std::string>> corpus(4 + static_cast<int>(rng() % 5));
    for (auto& sentence : corpus) {
      const int len = sentence_len(rng);
      for (int i = 0; i < len; ++i) sentence.push_back("W" + std::to_string(word_pick(rng)));
    }
    const NGramLM lm = train_ngram(corpus, 1 + static_cast<int>(rng() % 2));

    ScoreWeights weights;
    weights.lm_scale = trial == 0 ? 0.9 : lm_scale_dist(rng);
    weights.insertion_penalty = (rng() % 2 == 0) ? 0.0 : -0.4;

    const PosteriorMatrix matrix = test_support::make_matrix(
        "d" + std::to_string(trial), test_support::random_rows(rng, T, inventory.size()));
    const ScoredFrames frames = score_frames(matrix, inventory, nullptr, weights, 0.0);

    DecodeConfig config;
    config.nbest = 5;
    config.tokens_per_cell = 4096;
    config.weights = weights;
    const PrefixTree tree = build_prefix_tree(lexicon, inventory, Topology::ctc());
    const NBestList beam = beam_decode(frames, tree, lm, config);

    NBestList oracle = exhaustive_decode(frames, lexicon, lm, weights, T);
    if (oracle.hypotheses.size() > 5) oracle.hypotheses.resize(5);

    if (beam.hypotheses.size() != oracle.hypotheses.size()) {
      return format_failure("trial sizes differ: beam %.0f vs exhaustive %.0f",
                            double(beam.hypotheses.size()), double(oracle.hypotheses.size()));
    }
    for (size_t k = 0; k < oracle.hypotheses.size(); ++k) {
      const Hypothesis& b = beam.hypotheses[k];
      const Hypothesis& o = oracle.hypotheses[k];
      if (b.words != o.words) return "trial " + std::to_string(trial) + ": ranking differs";
      if (std::abs(b.acoustic_logp - o.acoustic_logp) > kLogTol ||
          std::abs(b.lm_logp - o.lm_logp) > kLogTol) {
        return format_failure("trial scores differ: %.12f vs %.12f", b.acoustic_logp,
                              o.acoustic_logp);
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 3. Word-level rescoring equals an independent brute-force re-sort; the
//    zero-weight scorer and global rescaling leave the ranking alone.
// ---------------------------------------------------------------------------

double own_logsumexp(const std::vector<double>& values) {
  double top = kLogZero;
  for (double v : values)
    if (v > top) top = v;
  if (is_log_zero(top)) return kLogZero;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - top);
  return top + std::log(sum);
}

void expand_prons(const Lexicon& lexicon, std::span<const std::string> words, size_t index,
                  std::vector<int>& units, std::vector<std::vector<int>>& out) {
  if (index == words.size()) {
    out.push_back(units);
    return;
  }
  for (const Pronunciation& pron : lexicon.pronunciations(words[index])) {
    const size_t before = units.size();
    units.insert(units.end(), pron.begin(), pron.end());
    expand_prons(lexicon, words, index + 1, units, out);
    units.resize(before);
  }
}

std::string check_rescoring_exactness() {
  std::mt19937 rng(31);
  const UnitInventory inventory = test_support::blank_inventory({"x", "y"});
  Lexicon lexicon;
  lexicon.add("K0", {1}, inventory);
  lexicon.add("K1", {2}, inventory);
  lexicon.add("K1", {2, 1}, inventory);
  lexicon.add("K2", {1, 2}, inventory);
  lexicon.add("K3", {2, 2}, inventory);
  lexicon.add("K3", {1, 1}, inventory);
  lexicon.add("K4", {1, 2, 1}, inventory);
  lexicon.add("K5", {2, 1, 2}, inventory);
  const std::vector<std::string> vocab = {"K0", "K1", "K2", "K3", "K4", "K5"};

  std::uniform_real_distribution<double> acoustic_dist(-20.0, -5.0);
  std::uniform_real_distribution<double> lm_dist(-15.0, -3.0);
  std::uniform_real_distribution<double> scorer_dist(-8.0, -1.0);
  std::uniform_int_distribution<int> hyp_len(0, 4);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab.size()) - 1);

  ScoreWeights weights;
  weights.lm_scale = 0.9;
  weights.scorer_scale = 1.2;
  weights.insertion_penalty = -0.3;

  for (int trial = 0; trial < 50; ++trial) {
    const std::string utt = "r" + std::to_string(trial);
    NBestList list;
    list.utterance_id = utt;
    std::set<std::vector<std::string>> used;
    while (list.hypotheses.size() < 20) {
      std::vector<std::string> words(hyp_len(rng));
      for (auto& w : words) w = vocab[pick(rng)];
      if (!used.insert(words).second) continue;
      Hypothesis h;
      h.words = std::move(words);
      h.acoustic_logp = acoustic_dist(rng);
      h.lm_logp = lm_dist(rng);
      list.hypotheses.push_back(std::move(h));
    }
    // Present the list the way a decoder would: ranked by its own key.
    std::stable_sort(list.hypotheses.begin(), list.hypotheses.end(),
                     [&](const Hypothesis& a, const Hypothesis& b) {
                       const double ka = a.acoustic_logp + weights.lm_scale * a.lm_logp +
                                         weights.insertion_penalty * a.word_count();
                       const double kb = b.acoustic_logp + weights.lm_scale * b.lm_logp +
                                         weights.insertion_penalty * b.word_count();
                       if (ka != kb) return ka > kb;
                       return words_less(a.words, b.words);
                     });

    FileScorerTable table;
    std::set<std::vector<int>> seen;
    for (const Hypothesis& h : list.hypotheses) {
      std::vector<std::vector<int>> combos;
      std::vector<int> scratch;
      expand_prons(lexicon, h.words, 0, scratch, combos);
      for (const auto& units : combos) {
        if (seen.insert(units).second) table.add(utt, units, scorer_dist(rng));
      }
    }

    const NBestList ranked = rescore_nbest(list, table, lexicon, weights);

    // Independent oracle: exact log-sum-exp over pronunciation combinations,
    // then a full re-sort.
    struct Scored {
      std::vector<std::string> words;
      double combined;
      double psum;
    };
    std::vector<Scored> oracle;
    for (const Hypothesis& h : list.hypotheses) {
      std::vector<std::vector<int>> combos;
      std::vector<int> scratch;
      expand_prons(lexicon, h.words, 0, scratch, combos);
      std::vector<double> values;
      for (const auto& units : combos) values.push_back(table.score(utt, units));
      const double psum = own_logsumexp(values);
      const double combined = h.acoustic_logp + weights.lm_scale * h.lm_logp +
                              weights.scorer_scale * psum +
                              weights.insertion_penalty * h.word_count();
      oracle.push_back({h.words, combined, psum});
    }
    std::stable_sort(oracle.begin(), oracle.end(), [](const Scored& a, const Scored& b) {
      if (a.combined != b.combined) return a.combined > b.combined;
      return words_less(a.words, b.words);
    });

    if (ranked.hypotheses.size() != oracle.size()) return "rescoring changed the list size";
    for (size_t k = 0; k < oracle.size(); ++k) {
      if (ranked.hypotheses[k].words != oracle[k].words) {
        return "trial " + std::to_string(trial) + ": rescored ranking differs from re-sort";
      }
      if (!ranked.hypotheses[k].scorer_logp ||
          std::abs(*ranked.hypotheses[k].scorer_logp - oracle[k].psum) > kLogTol) {
        return "trial " + std::to_string(trial) + ": pronunciation sum differs";
      }
    }

    // Zero scorer weight: the incoming order survives untouched.
    ScoreWeights zero = weights;
    zero.scorer_scale = 0.0;
    const NBestList same = rescore_nbest(list, table, lexicon, zero);
    for (size_t k = 0; k < list.hypotheses.size(); ++k) {
      if (same.hypotheses[k].words != list.hypotheses[k].words) {
        return "zero scorer weight reordered the list";
      }
    }

    // Scaling every component weight by c > 0 cannot change an argmax or an
    // ordering; the acoustic weight is realized through its input.
    for (const double c : {0.25, 3.0, 17.0}) {
      NBestList scaled_input = list;
      for (Hypothesis& h : scaled_input.hypotheses) h.acoustic_logp *= c;
      ScoreWeights scaled = weights;
      scaled.lm_scale *= c;
      scaled.scorer_scale *= c;
      scaled.insertion_penalty *= c;
      const NBestList scaled_ranked = rescore_nbest(scaled_input, table, lexicon, scaled);
      for (size_t k = 0; k < oracle.size(); ++k) {
        if (scaled_ranked.hypotheses[k].words != ranked.hypotheses[k].words) {
          return "positive rescaling changed the ranking";
        }
      }
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 4. On a corpus where the frame posteriors and a word-sequence scorer err
//    independently, the tuned combination beats either system alone.
// ---------------------------------------------------------------------------

struct SyntheticSystems {
  std::vector<DevUtterance> dev;
  double sc_wer = 0.0;
  double scorer_only_wer = 0.0;
};

SyntheticSystems build_complementary_corpus(unsigned seed) {
  std::mt19937 rng(seed);
  const UnitInventory inventory = test_support::blank_inventory({"A", "B", "C"});
  const std::vector<std::string> vocab = {"A",  "AB", "ABC", "AC", "B",
                                          "BA", "BC", "C",   "CA", "CB"};
  Lexicon lexicon;
  for (const auto& word : vocab) {
    Pronunciation pron;
    for (char ch : word) pron.push_back(*inventory.find(std::string(1, ch)));
    lexicon.add(word, pron, inventory);
  }

  std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab.size()) - 1);
  std::uniform_int_distribution<int> ref_len(1, 2);
  std::vector<std::vector<std::string>> corpus(40);
  for (auto& sentence : corpus) {
    const int len = ref_len(rng);
    for (int i = 0; i < len; ++i) sentence.push_back(vocab[pick(rng)]);
  }
  const NGramLM lm = train_ngram(corpus, 2);
  const PrefixTree tree = build_prefix_tree(lexicon, inventory, Topology::ctc());

  std::uniform_real_distribution<double> unit_noise(0.0, 0.05);
  std::uniform_real_distribution<double> chance(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  const int U = inventory.size();

  auto emission_row = [&](int target, double peak) {
    std::vector<double> row(U);
    double sum = 0.0;
    for (int u = 0; u < U; ++u) sum += row[u] = unit_noise(rng) + (u == target ? peak : 0.03);
    for (double& p : row) p /= sum;
    return row;
  };

  SyntheticSystems out;
  ScoreWeights decode_weights;  // alpha = 1, beta = 0
  for (int utt = 0; utt < 50; ++utt) {
    const std::string id = "s" + std::to_string(seed) + "_" + std::to_string(utt);
    std::vector<std::string> reference(ref_len(rng));
    for (auto& w : reference) w = vocab[pick(rng)];

    // Frame stream: per unit 1-2 peaked frames, blanks between words; an
    // occasional frame peaks at the wrong unit (the acoustic noise source).
    std::vector<std::vector<double>> rows;
    rows.push_back(emission_row(0, 0.8));
    for (const auto& word : reference) {
      for (int unit : lexicon.pronunciations(word)[0]) {
        const int copies = 1 + static_cast<int>(rng() % 2);
        for (int c = 0; c < copies; ++c) {
          int target = unit;
          if (chance(rng) < 0.10) target = 1 + static_cast<int>(rng() % (U - 1));
          rows.push_back(emission_row(target, 0.65));
        }
      }
      rows.push_back(emission_row(0, 0.8));
    }
    const PosteriorMatrix matrix =
        test_support::make_matrix(id, rows);

    DecodeConfig config;
    config.nbest = 10;
    config.weights = decode_weights;
    const ScoredFrames frames = score_frames(matrix, inventory, nullptr, decode_weights, 0.0);
    NBestList list = beam_decode(frames, tree, lm, config);

    // The scorer's own noisy belief about the transcript (independent of the
    // frame corruption above).
    std::vector<std::string> believed = reference;
    if (chance(rng) < 0.25) {
      believed[rng() % believed.size()] = vocab[pick(rng)];
    }
    std::vector<int> believed_units;
    for (const auto& word : believed) {
      const auto& pron = lexicon.pronunciations(word)[0];
      believed_units.insert(believed_units.end(), pron.begin(), pron.end());
    }

    FileScorerTable table;
    std::set<std::vector<int>> seen;
    for (const Hypothesis& h : list.hypotheses) {
      std::vector<int> units;
      for (const auto& word : h.words) {
        const auto& pron = lexicon.pronunciations(word)[0];
        units.insert(units.end(), pron.begin(), pron.end());
      }
      if (!seen.insert(units).second) continue;
      const long long distance =
          align_words(std::span<const int>(believed_units), std::span<const int>(units))
              .stats.errors();
      table.add(id, units, -6.0 * static_cast<double>(distance) + jitter(rng));
    }

    DevUtterance dev;
    dev.nbest = rescore_nbest(list, table, lexicon, decode_weights);
    dev.reference = std::move(reference);
    out.dev.push_back(std::move(dev));
  }

  out.sc_wer = dev_wer(out.dev, decode_weights);

  // The scorer-proxy system alone: pick by scorer score, ties in word order.
  EditStats scorer_only;
  for (const DevUtterance& utterance : out.dev) {
    const std::vector<std::string>* best = nullptr;
    double best_score = 0.0;
    static const std::vector<std::string> empty;
    for (const Hypothesis& h : utterance.nbest.hypotheses) {
      const double s = h.scorer_logp.value_or(kLogZero);
      if (!best || s > best_score || (s == best_score && words_less(h.words, *best))) {
        best = &h.words;
        best_score = s;
      }
    }
    if (!best) best = &empty;
    scorer_only += align_words(std::span<const std::string>(utterance.reference),
                               std::span<const std::string>(*best))
                       .stats;
  }
  out.scorer_only_wer = scorer_only.wer();
  return out;
}

std::string check_combination_gains() {
  int strict_improvements = 0;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const SyntheticSystems systems = build_complementary_corpus(500 + seed);

    TuneOptions options;
    options.generations = 25;
    options.seed = 900 + seed;

    ScoreWeights from_sc;  // start at the source-channel corner
    from_sc.lm_scale = 1.0;
    const ScoreWeights tuned_a = tune_weights(systems.dev, from_sc, options);

    ScoreWeights from_scorer;  // start at the scorer-dominant corner
    from_scorer.lm_scale = 0.0;
    from_scorer.scorer_scale = 10.0;
    options.seed = 950 + seed;
    const ScoreWeights tuned_b = tune_weights(systems.dev, from_scorer, options);

    const double tuned_wer =
        std::min(dev_wer(systems.dev, tuned_a), dev_wer(systems.dev, tuned_b));
    const double floor_wer = std::min(systems.sc_wer, systems.scorer_only_wer);
    if (tuned_wer > floor_wer + 1e-12) {
      return format_failure("tuned WER %.4f above component floor %.4f", tuned_wer, floor_wer);
    }
    if (tuned_wer < systems.sc_wer - 1e-12) ++strict_improvements;
  }
  if (strict_improvements < 8) {
    return format_failure("strict improvement in only %.0f/10 seeds (need %.0f)",
                          double(strict_improvements), 8.0);
  }
  return {};
}

// ---------------------------------------------------------------------------
// 5. The evolutionary tuner lands within 0.1 absolute WER of an exhaustive
//    21x21 weight grid, deterministically per seed.
// ---------------------------------------------------------------------------

std::vector<DevUtterance> build_tuning_set(unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> acoustic_dist(-20.0, -5.0);
  std::uniform_real_distribution<double> lm_dist(-15.0, -3.0);
  std::uniform_real_distribution<double> scorer_dist(-10.0, -1.0);
  std::uniform_real_distribution<double> weight_dist(0.0, 2.0);
  std::uniform_real_distribution<double> chance(0.0, 1.0);
  std::uniform_int_distribution<int> count_dist(3, 8);
  std::uniform_int_distribution<int> len_dist(1, 3);

  const std::vector<std::string> vocab = {"P", "Q", "R", "S", "T"};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab.size()) - 1);

  // A hidden weight point makes the grid landscape non-trivial.
  ScoreWeights hidden;
  hidden.lm_scale = weight_dist(rng);
  hidden.scorer_scale = weight_dist(rng);

  std::vector<DevUtterance> dev;
  for (int utt = 0; utt < 12; ++utt) {
    DevUtterance utterance;
    utterance.nbest.utterance_id = "g" + std::to_string(utt);
    const int count = count_dist(rng);
    std::set<std::vector<std::string>> used;
    while (static_cast<int>(utterance.nbest.hypotheses.size()) < count) {
      std::vector<std::string> words(len_dist(rng));
      for (auto& w : words) w = vocab[pick(rng)];
      if (!used.insert(words).second) continue;
      Hypothesis h;
      h.words = std::move(words);
      h.acoustic_logp = acoustic_dist(rng);
      h.lm_logp = lm_dist(rng);
      h.scorer_logp = scorer_dist(rng);
      utterance.nbest.hypotheses.push_back(std::move(h));
    }
    const Hypothesis* target = &utterance.nbest.hypotheses.front();
    if (chance(rng) < 0.8) {
      double best = kLogZero;
      for (const Hypothesis& h : utterance.nbest.hypotheses) {
        const double s = combine_scores(h, hidden);
        if (s > best) {
          best = s;
          target = &h;
        }
      }
    } else {
      target = &utterance.nbest.hypotheses[rng() % utterance.nbest.hypotheses.size()];
    }
    utterance.reference = target->words;
    dev.push_back(std::move(utterance));
  }
  return dev;
}

std::string check_tuner_against_grid() {
  for (unsigned seed = 1; seed <= 10; ++seed) {
    const std::vector<DevUtterance> dev = build_tuning_set(300 + seed);

    double grid_best = std::numeric_limits<double>::infinity();
    for (int a = 0; a <= 20; ++a) {
      for (int b = 0; b <= 20; ++b) {
        ScoreWeights w;
        w.lm_scale = 0.1 * a;
        w.scorer_scale = 0.1 * b;
        grid_best = std::min(grid_best, dev_wer(dev, w));
      }
    }

    // Start from the grid centre: the squared parameterization explores a
    // zero-valued weight too slowly to cross the whole grid.
    ScoreWeights init;
    init.lm_scale = 1.0;
    init.scorer_scale = 1.0;
    TuneOptions options;
    options.generations = 40;
    options.seed = 200 + seed;
    const ScoreWeights tuned = tune_weights(dev, init, options);
    const double tuned_wer = dev_wer(dev, tuned);
    if (tuned_wer > grid_best + kWerTol + 1e-12) {
      return format_failure("tuned WER %.4f vs grid best %.4f", tuned_wer, grid_best);
    }

    const ScoreWeights again = tune_weights(dev, init, options);
    if (again.lm_scale != tuned.lm_scale || again.scorer_scale != tuned.scorer_scale ||
        again.insertion_penalty != tuned.insertion_penalty) {
      return "same seed produced different weights";
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 6. With a dominant blank prior, prior subtraction pulls the deletions-
//    dominated error rate down.
// ---------------------------------------------------------------------------

std::string check_prior_subtraction() {
  int improved = 0;
  for (unsigned trial = 1; trial <= 10; ++trial) {
    std::mt19937 rng(700 + trial);
    const UnitInventory inventory = test_support::blank_inventory({"A", "B", "C"});
    const std::vector<std::string> vocab = {"A", "B", "C", "AB", "BC", "CA"};
    Lexicon lexicon;
    for (const auto& word : vocab) {
      Pronunciation pron;
      for (char ch : word) pron.push_back(*inventory.find(std::string(1, ch)));
      lexicon.add(word, pron, inventory);
    }
    std::uniform_int_distribution<int> pick(0, static_cast<int>(vocab.size()) - 1);
    std::uniform_int_distribution<int> ref_len(1, 2);
    std::vector<std::vector<std::string>> corpus(30);
    for (auto& sentence : corpus) {
      const int len = ref_len(rng);
      for (int i = 0; i < len; ++i) sentence.push_back(vocab[pick(rng)]);
    }
    const NGramLM lm = train_ngram(corpus, 2);
    const PrefixTree tree = build_prefix_tree(lexicon, inventory, Topology::ctc());

    std::uniform_real_distribution<double> chance(0.0, 1.0);
    std::uniform_real_distribution<double> blank_mass(0.72, 0.78);
    const int U = inventory.size();

    // Every frame keeps most of its mass on the blank; the true unit only
    // leads among the non-blank labels, so plain decoding collapses to
    // near-empty output while the unit posterior still exceeds its prior.
    auto label_row = [&](int target) {
      std::vector<double> row(U, 0.0);
      const double blank = blank_mass(rng);
      row[0] = blank;
      const double rest = 1.0 - blank;
      for (int u = 1; u < U; ++u) row[u] = rest * (u == target ? 0.64 : 0.18);
      return row;
    };
    auto blank_row = [&]() {
      std::vector<double> row(U, 0.033);
      row[0] = 1.0 - 0.033 * (U - 1);
      return row;
    };

    std::vector<PosteriorMatrix> matrices;
    std::vector<std::vector<std::string>> references;
    for (int utt = 0; utt < 15; ++utt) {
      std::vector<std::string> reference(ref_len(rng));
      for (auto& w : reference) w = vocab[pick(rng)];
      std::vector<std::vector<double>> rows;
      rows.push_back(blank_row());
      for (const auto& word : reference) {
        for (int unit : lexicon.pronunciations(word)[0]) {
          int target = unit;
          if (chance(rng) < 0.06) target = 1 + static_cast<int>(rng() % (U - 1));
          const int copies = 1 + static_cast<int>(rng() % 2);
          for (int c = 0; c < copies; ++c) rows.push_back(label_row(target));
        }
        rows.push_back(blank_row());
      }
      matrices.push_back(test_support::make_matrix(
          "p" + std::to_string(trial) + "_" + std::to_string(utt), rows));
      references.push_back(std::move(reference));
    }

    const UnitPrior priors = estimate_priors(matrices);
    if (priors.priors[0] < 0.4) {
      return format_failure("constructed blank prior %.3f below %.1f", priors.priors[0], 0.4);
    }

    ScoreWeights weights;  // alpha = 1
    DecodeConfig config;
    config.nbest = 1;
    config.weights = weights;

    auto decode_corpus = [&](const UnitPrior* prior, double scale) {
      EditStats stats;
      for (size_t i = 0; i < matrices.size(); ++i) {
        const ScoredFrames frames =
            score_frames(matrices[i], inventory, prior, weights, scale);
        const NBestList list = beam_decode(frames, tree, lm, config);
        static const std::vector<std::string> empty;
        const std::vector<std::string>& best =
            list.hypotheses.empty() ? empty : list.hypotheses.front().words;
        stats += align_words(std::span<const std::string>(references[i]),
                             std::span<const std::string>(best))
                     .stats;
      }
      return stats;
    };

    const EditStats raw = decode_corpus(nullptr, 0.0);
    if (!(raw.deletions > raw.substitutions && raw.deletions > raw.insertions)) {
      return "plain decoding was not deletion-dominated";
    }
    const EditStats subtracted = decode_corpus(&priors, 1.0);
    if (subtracted.wer() < raw.wer() - 1e-12) ++improved;
  }
  if (improved < 8) {
    return format_failure("prior subtraction improved only %.0f/10 trials (need %.0f)",
                          double(improved), 8.0);
  }
  return {};
}

// ---------------------------------------------------------------------------
// 7. Trained models are normalized per history; ARPA round trips preserve
//    sentence scores.
// ---------------------------------------------------------------------------

std::string check_lm_normalization() {
  std::mt19937 rng(61);
  for (const int vocab_size : {4, 9, 20}) {
    std::uniform_int_distribution<int> len_dist(0, 6);
    std::uniform_int_distribution<int> word_dist(0, vocab_size - 1);
    std::vector<std::vector<std::string>> corpus(40);
    for (auto& sentence : corpus) {
      const int len = len_dist(rng);
      for (int i = 0; i < len; ++i) sentence.push_back("w" + std::to_string(word_dist(rng)));
    }

    for (int order = 1; order <= 4; ++order) {
      const NGramLM lm = train_ngram(corpus, order);
      const int V = static_cast<int>(lm.vocabulary().size());
      // Exhaustive: every history over the full vocabulary.
      std::vector<int> history(order - 1, 0);
      while (true) {
        double sum = 0.0;
        for (int w = 0; w < V; ++w) sum += std::exp(lm.word_logp_ids(history, w));
        if (std::abs(sum - 1.0) > kNormTol) {
          return format_failure("history sum %.6f at vocab %.0f", sum, double(vocab_size));
        }
        int slot = order - 2;
        while (slot >= 0 && ++history[slot] == V) history[slot--] = 0;
        if (slot < 0) break;
      }
    }
  }

  // Round trip through the interchange format.
  std::uniform_int_distribution<int> len_dist(0, 8);
  std::uniform_int_distribution<int> word_dist(0, 19);
  std::uniform_real_distribution<double> chance(0.0, 1.0);
  std::vector<std::vector<std::string>> corpus(60);
  for (auto& sentence : corpus) {
    const int len = len_dist(rng);
    for (int i = 0; i < len; ++i) sentence.push_back("w" + std::to_string(word_dist(rng)));
  }
  const NGramLM trained = train_ngram(corpus, 3);
  test_support::TempDir dir;
  write_arpa(trained, dir.file("model.arpa"));
  const NGramLM reloaded = read_arpa(dir.file("model.arpa"));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> sentence(len_dist(rng));
    for (auto& w : sentence) {
      w = chance(rng) < 0.05 ? "zzz" : "w" + std::to_string(word_dist(rng));
    }
    const double before = trained.score_sequence(sentence);
    const double after = reloaded.score_sequence(sentence);
    if (std::abs(before - after) > kLogTol) {
      return format_failure("round trip moved a score: %.12f vs %.12f", before, after);
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 8. Alignment distances match a memoized recursive oracle on every pair of
//    sequences up to length 8 over a 3-word alphabet.
// ---------------------------------------------------------------------------

struct DistanceOracle {
  std::vector<std::vector<int>> sequences;
  std::vector<int> head_of, tail_of;
  std::vector<uint8_t> memo;
  size_t count = 0;

  DistanceOracle() {
    std::vector<std::vector<std::vector<int>>> levels(9);
    levels[0] = {{}};
    sequences.push_back({});
    for (int len = 1; len <= 8; ++len) {
      for (const auto& shorter : levels[len - 1]) {
        for (int w = 0; w < 3; ++w) {
          auto longer = shorter;
          longer.push_back(w);
          levels[len].push_back(longer);
          sequences.push_back(std::move(longer));
        }
      }
    }
    count = sequences.size();
    std::map<std::vector<int>, int> index;
    for (size_t i = 0; i < count; ++i) index[sequences[i]] = static_cast<int>(i);
    head_of.assign(count, -1);
    tail_of.assign(count, -1);
    for (size_t i = 0; i < count; ++i) {
      if (sequences[i].empty()) continue;
      head_of[i] = sequences[i].front();
      tail_of[i] = index[{sequences[i].begin() + 1, sequences[i].end()}];
    }
    memo.assign(count * count, 0xFF);
  }

  uint8_t distance(int a, int b) {
    uint8_t& slot = memo[static_cast<size_t>(a) * count + b];
    if (slot != 0xFF) return slot;
    uint8_t d;
    if (head_of[a] < 0) {
      d = static_cast<uint8_t>(sequences[b].size());
    } else if (head_of[b] < 0) {
      d = static_cast<uint8_t>(sequences[a].size());
    } else {
      uint8_t best = static_cast<uint8_t>(distance(tail_of[a], tail_of[b]) +
                                          (head_of[a] != head_of[b] ? 1 : 0));
      const uint8_t ins = static_cast<uint8_t>(distance(a, tail_of[b]) + 1);
      if (ins < best) best = ins;
      const uint8_t del = static_cast<uint8_t>(distance(tail_of[a], b) + 1);
      if (del < best) best = del;
      d = best;
    }
    return slot = d;
  }
};

std::string check_alignment_oracle() {
  DistanceOracle oracle;
  for (size_t a = 0; a < oracle.count; ++a) {
    for (size_t b = 0; b < oracle.count; ++b) {
      const long long expected = oracle.distance(static_cast<int>(a), static_cast<int>(b));
      const long long actual =
          align_words(std::span<const int>(oracle.sequences[a]),
                      std::span<const int>(oracle.sequences[b]))
              .stats.errors();
      if (actual != expected) {
        return format_failure("distance mismatch: got %.0f, oracle %.0f", double(actual),
                              double(expected));
      }
    }
  }
  return {};
}

}  // namespace

int main() {
  struct Check {
    const char* name;
    std::function<std::string()> run;
    double budget_seconds;  // 0: no budget pinned
  };
  const std::vector<Check> checks = {
      {"forward score equals direct recursion and path enumeration", check_forward_equivalence,
       10.0},
      {"infinite-beam decoding reproduces the exhaustive top-5", check_decoder_exactness, 60.0},
      {"rescoring equals brute-force re-sort; order invariances hold",
       check_rescoring_exactness, 10.0},
      {"tuned combination beats both single systems", check_combination_gains, 120.0},
      {"tuner matches the exhaustive weight grid within 0.1 WER", check_tuner_against_grid,
       120.0},
      {"prior subtraction reduces deletion-dominated WER", check_prior_subtraction, 0.0},
      {"trained models normalize per history; ARPA round trip is stable",
       check_lm_normalization, 0.0},
      {"alignment distances match the memoized recursive oracle", check_alignment_oracle, 30.0},
  };

  int failures = 0;
  for (size_t i = 0; i < checks.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    std::string detail;
    try {
      detail = checks[i].run();
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (detail.empty() && checks[i].budget_seconds > 0.0 &&
        elapsed >= checks[i].budget_seconds) {
      detail = format_failure("runtime %.1fs over the %.0fs budget", elapsed,
                              checks[i].budget_seconds);
    }
    if (detail.empty()) {
      std::printf("[%zu/8] %s: pass (%.1fs)\n", i + 1, checks[i].name, elapsed);
    } else {
      std::printf("[%zu/8] %s: FAIL (%.1fs) -- %s\n", i + 1, checks[i].name, elapsed,
                  detail.c_str());
      ++failures;
    }
    std::fflush(stdout);
  }
  return failures;
}
