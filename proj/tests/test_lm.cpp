#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "isca/common.hpp"
#include "isca/io.hpp"
#include "isca/lm.hpp"

using namespace isca;
using test_support::TempDir;

namespace {

constexpr double kLn10 = 2.302585092994046;

std::vector<std::vector<std::string>> sentences(std::initializer_list<const char*> lines) {
  std::vector<std::vector<std::string>> out;
  for (const char* line : lines) {
    out.push_back(split_whitespace(line));
  }
  return out;
}

// Random corpus over a small vocabulary, sentence lengths 0..6.
std::vector<std::vector<std::string>> random_corpus(std::mt19937& rng, int num_sentences,
                                                    int vocab_size) {
  std::uniform_int_distribution<int> len_dist(0, 6);
  std::uniform_int_distribution<int> word_dist(0, vocab_size - 1);
  std::vector<std::vector<std::string>> corpus(num_sentences);
  for (auto& sentence : corpus) {
    const int len = len_dist(rng);
    for (int i = 0; i < len; ++i) sentence.push_back("w" + std::to_string(word_dist(rng)));
  }
  return corpus;
}

// Per-history normalization: sum of P(w|context) over the whole vocabulary.
double context_prob_sum(const NGramLM& lm, const std::vector<int>& context) {
  double sum = 0.0;
  for (int w = 0; w < static_cast<int>(lm.vocabulary().size()); ++w) {
    sum += std::exp(lm.word_logp_ids(context, w));
  }
  return sum;
}

}  // namespace

TEST_CASE("unigram training with absolute discounting") {
  // Counts over ["a b", "a b"]: a:2, b:2, eos:2, N=6, d=0.5.
  const auto corpus = sentences({"a b", "a b"});
  const NGramLM lm = train_ngram(corpus, 1);

  CHECK(lm.order() == 1);
  const double ln_quarter = -1.3862943611198906;  // (2 - 0.5) / 6
  CHECK(lm.word_logp_ids({}, lm.word_id("a")) == doctest::Approx(ln_quarter).epsilon(1e-12));
  CHECK(lm.word_logp_ids({}, lm.word_id("b")) == doctest::Approx(ln_quarter).epsilon(1e-12));
  CHECK(lm.word_logp_ids({}, lm.end_id()) == doctest::Approx(ln_quarter).epsilon(1e-12));
  // Discount mass 3 * 0.5 / 6 lands on the unknown token.
  CHECK(lm.word_logp_ids({}, lm.unknown_id()) == doctest::Approx(ln_quarter).epsilon(1e-12));
  // The begin token carries no probability mass.
  CHECK(lm.word_logp_ids({}, lm.begin_id()) < -200.0);
}

TEST_CASE("bigram training backs off consistently") {
  const auto corpus = sentences({"a"});
  const NGramLM lm = train_ngram(corpus, 2);

  // P(a|<s>) = (1-0.5)/1 + 0.5 * P_uni(a) = 0.5 + 0.5*0.25 = 0.625.
  const std::vector<int> begin_ctx = {lm.begin_id()};
  CHECK(lm.word_logp_ids(begin_ctx, lm.word_id("a")) ==
        doctest::Approx(-0.4700036292457356).epsilon(1e-12));

  // An unseen continuation goes through the backoff weight.
  // P(</s>|<s>) = gamma(<s>) * P_uni(</s>) = 0.5 * 0.25.
  CHECK(lm.word_logp_ids(begin_ctx, lm.end_id()) ==
        doctest::Approx(std::log(0.125)).epsilon(1e-12));

  // P(</s>|a) = (1-0.5)/1 + 0.5 * 0.25 = 0.625.
  const std::vector<int> a_ctx = {lm.word_id("a")};
  CHECK(lm.word_logp_ids(a_ctx, lm.end_id()) ==
        doctest::Approx(std::log(0.625)).epsilon(1e-12));

  // Unseen history falls all the way back to unigrams.
  const std::vector<int> unk_ctx = {lm.unknown_id()};
  CHECK(lm.word_logp_ids(unk_ctx, lm.word_id("a")) ==
        doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("trained models are normalized per history") {
  // Exhaustive per-history sum-to-1, the executable form of back-off
  // consistency.
  CHECK(context_prob_sum(train_ngram(sentences({"a"}), 1), {}) ==
        doctest::Approx(1.0).epsilon(1e-4));

  std::mt19937 rng(41);
  for (int order = 1; order <= 3; ++order) {
    const auto corpus = random_corpus(rng, 25, 6);
    const NGramLM lm = train_ngram(corpus, order);
    const int V = static_cast<int>(lm.vocabulary().size());

    CHECK(context_prob_sum(lm, {}) == doctest::Approx(1.0).epsilon(1e-9));
    if (order >= 2) {
      for (int w = 0; w < V; ++w) {
        CHECK(context_prob_sum(lm, {w}) == doctest::Approx(1.0).epsilon(1e-9));
      }
    }
    if (order >= 3) {
      std::uniform_int_distribution<int> word(0, V - 1);
      for (int i = 0; i < 20; ++i) {
        CHECK(context_prob_sum(lm, {word(rng), word(rng)}) ==
              doctest::Approx(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sequence scoring") {
  // Hand-built unigram: P(a)=P(b)=0.5 and an end-of-sentence factor of 1.
  std::vector<std::string> vocab = {"</s>", "<s>", "<unk>", "a", "b"};
  std::map<std::vector<int>, NGramEntry> unigrams;
  unigrams[{0}] = {0.0, std::nullopt};           // </s>: probability 1
  unigrams[{1}] = {-99.0, std::nullopt};         // <s>
  unigrams[{2}] = {-99.0, std::nullopt};         // <unk>
  unigrams[{3}] = {std::log10(0.5), std::nullopt};
  unigrams[{4}] = {std::log10(0.5), std::nullopt};
  const NGramLM lm(1, vocab, {unigrams});

  const std::vector<std::string> ab = {"a", "b"};
  CHECK(lm.score_sequence(ab) == doctest::Approx(std::log(0.25)).epsilon(1e-12));

  // Empty sequence scores the end-of-sentence alone.
  CHECK(lm.score_sequence(std::vector<std::string>{}) == doctest::Approx(0.0).epsilon(1e-12));

  // OOV words collapse to the unknown token and stay finite.
  const std::vector<std::string> oov = {"zzz"};
  CHECK(std::isfinite(lm.score_sequence(oov)));
  CHECK(lm.word_id("zzz") == lm.unknown_id());

  // score_sequence composes the per-word conditionals.
  const NGramLM trained = train_ngram(sentences({"a b", "b a", "a"}), 2);
  const std::vector<std::string> words = {"a", "b"};
  const std::vector<std::string> ctx_begin = {kSentenceBegin};
  const std::vector<std::string> ctx_a = {"a"};
  const std::vector<int> ab_ids = {trained.word_id("a"), trained.word_id("b")};
  const double by_hand = trained.word_logp(ctx_begin, "a") + trained.word_logp(ctx_a, "b") +
                         trained.word_logp_ids(ab_ids, trained.end_id());
  CHECK(trained.score_sequence(words) == doctest::Approx(by_hand).epsilon(1e-12));

  // Context longer than order-1 is truncated to the most recent words.
  const std::vector<std::string> long_ctx = {"b", "b", "b", "a"};
  CHECK(trained.word_logp(long_ctx, "b") == doctest::Approx(trained.word_logp(ctx_a, "b")));
}

TEST_CASE("hand-written two-gram file scores by back-off arithmetic") {
  TempDir dir;
  const std::string arpa =
      "\\data\\\n"
      "ngram 1=5\n"
      "ngram 2=2\n"
      "\n"
      "\\1-grams:\n"
      "-99\t<s>\t-0.30103\n"
      "-0.60206\t</s>\n"
      "-0.39794\ta\t-0.17609\n"
      "-0.52288\tb\t-0.30103\n"
      "-1.0\t<unk>\n"
      "\n"
      "\\2-grams:\n"
      "-0.30103\t<s> a\n"
      "-0.45\ta b\n"
      "\\end\\\n";
  test_support::write_file(dir.file("hand.arpa"), arpa);
  const NGramLM lm = read_arpa(dir.file("hand.arpa"));

  CHECK(lm.order() == 2);
  const std::vector<std::string> a = {"a"};
  const std::vector<std::string> b = {"b"};
  const std::vector<std::string> begin = {"<s>"};
  // Direct bigram hits.
  CHECK(lm.word_logp(begin, "a") == doctest::Approx(-0.30103 * kLn10).epsilon(1e-12));
  CHECK(lm.word_logp(a, "b") == doctest::Approx(-0.45 * kLn10).epsilon(1e-12));
  // Backed-off: P(</s>|b) = bo(b) * P(</s>).
  CHECK(lm.word_logp(b, "</s>") ==
        doctest::Approx((-0.30103 - 0.60206) * kLn10).epsilon(1e-12));
  // Whole sequence "a b": three factors.
  const std::vector<std::string> ab = {"a", "b"};
  CHECK(lm.score_sequence(ab) == doctest::Approx(-3.8087520540233113).epsilon(1e-9));
}

TEST_CASE("file round-trip preserves scores") {
  TempDir dir;
  std::mt19937 rng(43);
  const auto corpus = random_corpus(rng, 40, 8);
  const NGramLM lm = train_ngram(corpus, 3);
  write_arpa(lm, dir.file("model.arpa"));
  const NGramLM back = read_arpa(dir.file("model.arpa"));

  CHECK(back.order() == lm.order());
  CHECK(back.vocabulary() == lm.vocabulary());

  std::uniform_int_distribution<int> len_dist(0, 5);
  std::uniform_int_distribution<int> word_dist(0, 9);  // includes OOV w8, w9
  for (int i = 0; i < 100; ++i) {
    std::vector<std::string> sentence;
    const int len = len_dist(rng);
    for (int k = 0; k < len; ++k) sentence.push_back("w" + std::to_string(word_dist(rng)));
    CHECK(back.score_sequence(sentence) ==
          doctest::Approx(lm.score_sequence(sentence)).epsilon(1e-9));
  }

  // Identical scores imply identical files on rewrite.
  write_arpa(back, dir.file("again.arpa"));
  CHECK(test_support::read_file(dir.file("again.arpa")) ==
        test_support::read_file(dir.file("model.arpa")));
}

TEST_CASE("file reading rejects malformed models") {
  TempDir dir;

  // A bigram whose history lacks a backoff weight.
  test_support::write_file(dir.file("nobo.arpa"),
                           "\\data\\\n"
                           "ngram 1=4\n"
                           "ngram 2=1\n"
                           "\n"
                           "\\1-grams:\n"
                           "-99\t<s>\t-0.3\n"
                           "-0.5\t</s>\n"
                           "-0.5\ta\n"
                           "-1.0\t<unk>\n"
                           "\n"
                           "\\2-grams:\n"
                           "-0.3\ta a\n"
                           "\\end\\\n");
  CHECK_THROWS_AS(read_arpa(dir.file("nobo.arpa")), InputError);

  // Declared count disagrees with the section.
  test_support::write_file(dir.file("count.arpa"),
                           "\\data\\\n"
                           "ngram 1=3\n"
                           "\n"
                           "\\1-grams:\n"
                           "-99\t<s>\n"
                           "-0.5\t</s>\n"
                           "-0.5\ta\n"
                           "-1.0\t<unk>\n"
                           "\\end\\\n");
  CHECK_THROWS_AS(read_arpa(dir.file("count.arpa")), InputError);

  // Duplicate entry.
  test_support::write_file(dir.file("dup.arpa"),
                           "\\data\\\n"
                           "ngram 1=4\n"
                           "\n"
                           "\\1-grams:\n"
                           "-99\t<s>\n"
                           "-0.5\t</s>\n"
                           "-0.5\ta\n"
                           "-0.5\ta\n"
                           "\\end\\\n");
  CHECK_THROWS_AS(read_arpa(dir.file("dup.arpa")), InputError);

  // Higher-order gram over a word that has no unigram.
  test_support::write_file(dir.file("ghost.arpa"),
                           "\\data\\\n"
                           "ngram 1=4\n"
                           "ngram 2=1\n"
                           "\n"
                           "\\1-grams:\n"
                           "-99\t<s>\t-0.3\n"
                           "-0.5\t</s>\n"
                           "-0.5\ta\t-0.3\n"
                           "-1.0\t<unk>\n"
                           "\n"
                           "\\2-grams:\n"
                           "-0.3\ta zz\n"
                           "\\end\\\n");
  CHECK_THROWS_AS(read_arpa(dir.file("ghost.arpa")), InputError);

  test_support::write_file(dir.file("noheader.arpa"), "hello\n");
  CHECK_THROWS_AS(read_arpa(dir.file("noheader.arpa")), InputError);
  CHECK_THROWS_AS(read_arpa(dir.file("missing.arpa")), InputError);
}

TEST_CASE("training input validation") {
  CHECK_THROWS_AS(train_ngram({}, 1), InputError);
  CHECK_THROWS_AS(train_ngram(sentences({"a"}), 0), InputError);
  CHECK_THROWS_AS(train_ngram(sentences({"a"}), 2, 1.5), InputError);
  CHECK_THROWS_AS(train_ngram(sentences({"a <s> b"}), 1), InputError);
  CHECK_THROWS_AS(train_ngram(sentences({"<unk>"}), 1), InputError);
}

TEST_CASE("scoring is deterministic") {
  std::mt19937 rng(47);
  const auto corpus = random_corpus(rng, 20, 5);
  const NGramLM lm = train_ngram(corpus, 2);
  const std::vector<std::string> sentence = {"w0", "w3", "w1"};
  const double first = lm.score_sequence(sentence);
  for (int i = 0; i < 5; ++i) CHECK(lm.score_sequence(sentence) == first);
}
