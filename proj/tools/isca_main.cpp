#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "isca/acoustic.hpp"
#include "isca/common.hpp"
#include "isca/decoder.hpp"
#include "isca/eval.hpp"
#include "isca/io.hpp"
#include "isca/lm.hpp"
#include "isca/rescore.hpp"
#include "isca/scorer.hpp"
#include "isca/topology.hpp"
#include "isca/tune.hpp"
#include "isca/types.hpp"

namespace fs = std::filesystem;

namespace {

// Plain key=value configuration; '#' starts a comment. Command-line flags
// override file values.
class Config {
 public:
  void load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw isca::InputError("cannot open config file " + path.string());
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      const size_t hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      const auto tokens = isca::split_whitespace(line);
      if (tokens.empty()) continue;
      std::string joined;
      for (const auto& t : tokens) joined += t;
      const size_t eq = joined.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw isca::InputError(path.string() + ":" + std::to_string(line_number) +
                               ": expected key=value");
      }
      values_[joined.substr(0, eq)] = joined.substr(eq + 1);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const { return values_.at(key); }

  void fill(const CLI::Option* option, const std::string& key, std::string& value) const {
    if (option->count() == 0 && has(key)) value = raw(key);
  }
  void fill(const CLI::Option* option, const std::string& key, double& value) const {
    if (option->count() == 0 && has(key)) value = isca::parse_double(raw(key));
  }
  void fill(const CLI::Option* option, const std::string& key, int& value) const {
    if (option->count() == 0 && has(key)) {
      try {
        value = std::stoi(raw(key));
      } catch (const std::exception&) {
        throw isca::InputError("config key " + key + " is not an integer: " + raw(key));
      }
    }
  }
  void fill(const CLI::Option* option, const std::string& key, bool& value) const {
    if (option->count() == 0 && has(key)) {
      const std::string& text = raw(key);
      if (text == "1" || text == "true") {
        value = true;
      } else if (text == "0" || text == "false") {
        value = false;
      } else {
        throw isca::InputError("config key " + key + " is not a boolean: " + text);
      }
    }
  }
  void fill(const CLI::Option* option, const std::string& key,
            unsigned long long& value) const {
    if (option->count() == 0 && has(key)) {
      try {
        value = std::stoull(raw(key));
      } catch (const std::exception&) {
        throw isca::InputError("config key " + key + " is not an integer: " + raw(key));
      }
    }
  }

 private:
  std::map<std::string, std::string> values_;
};

isca::Topology parse_topology(const std::string& text) {
  if (text == "ctc") return isca::Topology::ctc();
  if (text.rfind("hmm:", 0) == 0) {
    try {
      return isca::Topology::hmm(std::stoi(text.substr(4)));
    } catch (const isca::InputError&) {
      throw;
    } catch (const std::exception&) {
      throw isca::InputError("malformed topology: " + text);
    }
  }
  throw isca::InputError("topology must be 'ctc' or 'hmm:<states>', got '" + text + "'");
}

isca::UnitKind parse_unit_kind(const std::string& text) {
  if (text == "graphemic") return isca::UnitKind::graphemic;
  if (text == "phonetic") return isca::UnitKind::phonetic;
  throw isca::InputError("unit kind must be 'graphemic' or 'phonetic', got '" + text + "'");
}

std::string require(const std::string& value, const char* key) {
  if (value.empty()) throw isca::InputError(std::string("required setting missing: ") + key);
  return value;
}

isca::UnitInventory load_units(const std::string& units_path, const std::string& blank,
                               const std::string& kind) {
  return isca::load_inventory(require(units_path, "units"), blank == "none" ? "" : blank,
                              parse_unit_kind(kind));
}

isca::Lexicon load_lexicon_setting(const std::string& value,
                                   const isca::UnitInventory& inventory) {
  if (value.rfind("graphemic:", 0) == 0) {
    const auto transcripts = isca::load_transcripts(value.substr(10));
    std::vector<std::string> words;
    for (const auto& [id, sentence] : transcripts) {
      words.insert(words.end(), sentence.begin(), sentence.end());
    }
    return isca::derive_graphemic_lexicon(words, inventory);
  }
  return isca::load_lexicon(value, inventory);
}

std::vector<fs::path> list_files(const std::string& directory, const char* what) {
  if (!fs::is_directory(directory)) {
    throw isca::InputError(std::string(what) + " directory not found: " + directory);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw isca::InputError(std::string("no ") + what + " files in " + directory);
  }
  return files;
}

fs::path find_by_stem(const std::string& directory, const std::string& stem,
                      const char* what) {
  if (!fs::is_directory(directory)) {
    throw isca::InputError(std::string(what) + " directory not found: " + directory);
  }
  std::vector<fs::path> hits;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().stem().string() == stem) {
      hits.push_back(entry.path());
    }
  }
  if (hits.empty()) {
    throw isca::InputError(std::string("no ") + what + " file for utterance " + stem + " in " +
                           directory);
  }
  std::sort(hits.begin(), hits.end());
  return hits.front();
}

void ensure_output_dir(const std::string& output) {
  fs::create_directories(require(output, "output"));
}

template <typename Fn>
void for_each_parallel(size_t count, int jobs, Fn&& fn) {
  if (jobs < 1) throw isca::InputError("jobs must be positive");
  jobs = static_cast<int>(std::min<size_t>(jobs, count));
  if (jobs <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& thread : threads) thread.join();
  if (error) std::rethrow_exception(error);
}

// Options shared by the pipeline subcommands; each field has a config key
// of the same name.
struct CommonOptions {
  std::string config_path;
  std::string units;
  std::string blank = "<blank>";
  std::string unit_kind = "graphemic";

  Config config;

  CLI::Option* config_opt = nullptr;
  CLI::Option* units_opt = nullptr;
  CLI::Option* blank_opt = nullptr;
  CLI::Option* kind_opt = nullptr;

  void attach(CLI::App* cmd) {
    config_opt = cmd->add_option("--config", config_path, "key=value configuration file");
    units_opt = cmd->add_option("--units", units, "unit inventory file, one label per line");
    blank_opt = cmd->add_option("--blank", blank, "blank label ('none' disables)");
    kind_opt = cmd->add_option("--unit-kind", unit_kind, "graphemic or phonetic");
  }

  void resolve() {
    if (!config_path.empty()) config.load(config_path);
    config.fill(units_opt, "units", units);
    config.fill(blank_opt, "blank", blank);
    config.fill(kind_opt, "unit_kind", unit_kind);
  }
};

struct WeightOptions {
  std::string weights_file;
  double alpha = 1.0;
  double beta = 0.0;
  double insertion_penalty = 0.0;
  double blank_penalty = 0.0;

  CLI::Option* file_opt = nullptr;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* insertion_opt = nullptr;
  CLI::Option* blank_opt = nullptr;

  void attach(CLI::App* cmd) {
    file_opt = cmd->add_option("--weights", weights_file, "weights file to start from");
    alpha_opt = cmd->add_option("--alpha", alpha, "LM scale");
    beta_opt = cmd->add_option("--beta", beta, "scorer scale");
    insertion_opt = cmd->add_option("--insertion-penalty", insertion_penalty,
                                    "log-domain bonus per output word");
    blank_opt = cmd->add_option("--blank-penalty", blank_penalty,
                                "subtracted from blank log-posteriors");
  }

  isca::ScoreWeights resolve(const Config& config) {
    config.fill(file_opt, "weights", weights_file);
    isca::ScoreWeights weights;
    if (!weights_file.empty()) weights = isca::load_weights(weights_file);
    if (alpha_opt->count() || config.has("alpha")) {
      config.fill(alpha_opt, "alpha", alpha);
      weights.lm_scale = alpha;
    }
    if (beta_opt->count() || config.has("beta")) {
      config.fill(beta_opt, "beta", beta);
      weights.scorer_scale = beta;
    }
    if (insertion_opt->count() || config.has("insertion_penalty")) {
      config.fill(insertion_opt, "insertion_penalty", insertion_penalty);
      weights.insertion_penalty = insertion_penalty;
    }
    if (blank_opt->count() || config.has("blank_penalty")) {
      config.fill(blank_opt, "blank_penalty", blank_penalty);
      weights.blank_penalty = blank_penalty;
    }
    weights.validate();
    return weights;
  }
};

struct DecodeCommand {
  CommonOptions common;
  WeightOptions weights;
  std::string posteriors, lexicon, lm, priors = "none", output, topology = "ctc";
  double prior_scale = 1.0;
  double score_margin = std::numeric_limits<double>::infinity();
  int beam_width = 1 << 20;
  int nbest = 10;
  int tokens_per_cell = 0;
  int jobs = 1;
  bool verbose = false;

  CLI::Option *posteriors_opt, *lexicon_opt, *lm_opt, *priors_opt, *output_opt, *topology_opt,
      *prior_scale_opt, *margin_opt, *beam_opt, *nbest_opt, *cell_opt, *jobs_opt;

  void attach(CLI::App* cmd) {
    common.attach(cmd);
    weights.attach(cmd);
    posteriors_opt = cmd->add_option("--posteriors", posteriors, "directory of posterior files");
    lexicon_opt = cmd->add_option("--lexicon", lexicon,
                                  "lexicon file, or graphemic:<transcripts> to derive one");
    lm_opt = cmd->add_option("--lm", lm, "ARPA language model");
    priors_opt = cmd->add_option("--priors", priors, "'none', 'auto', or a priors file");
    prior_scale_opt = cmd->add_option("--prior-scale", prior_scale, "prior subtraction scale");
    output_opt = cmd->add_option("--output", output, "output directory for n-best files");
    topology_opt = cmd->add_option("--topology", topology, "'ctc' or 'hmm:<states>'");
    beam_opt = cmd->add_option("--beam-width", beam_width, "max live tokens per frame");
    margin_opt = cmd->add_option("--score-margin", score_margin, "beam score margin");
    nbest_opt = cmd->add_option("--nbest", nbest, "hypotheses per utterance");
    cell_opt = cmd->add_option("--tokens-per-cell", tokens_per_cell,
                               "word sequences kept per decode cell (0: nbest)");
    jobs_opt = cmd->add_option("--jobs", jobs, "parallel utterances");
    cmd->add_flag("-v,--verbose", verbose, "log per-frame live token counts");
  }

  int run() {
    common.resolve();
    const Config& config = common.config;
    config.fill(posteriors_opt, "posteriors", posteriors);
    config.fill(lexicon_opt, "lexicon", lexicon);
    config.fill(lm_opt, "lm", lm);
    config.fill(priors_opt, "priors", priors);
    config.fill(prior_scale_opt, "prior_scale", prior_scale);
    config.fill(output_opt, "output", output);
    config.fill(topology_opt, "topology", topology);
    config.fill(beam_opt, "beam_width", beam_width);
    config.fill(margin_opt, "score_margin", score_margin);
    config.fill(nbest_opt, "nbest", nbest);
    config.fill(cell_opt, "tokens_per_cell", tokens_per_cell);
    config.fill(jobs_opt, "jobs", jobs);

    const isca::UnitInventory inventory =
        load_units(common.units, common.blank, common.unit_kind);
    const isca::Lexicon lex = load_lexicon_setting(require(lexicon, "lexicon"), inventory);
    const isca::NGramLM model = isca::read_arpa(require(lm, "lm"));
    const isca::Topology topo = parse_topology(topology);
    const isca::PrefixTree tree = isca::build_prefix_tree(lex, inventory, topo);
    const isca::ScoreWeights score_weights = weights.resolve(config);

    const auto files = list_files(require(posteriors, "posteriors"), "posterior");
    std::vector<isca::PosteriorMatrix> matrices;
    matrices.reserve(files.size());
    for (const auto& file : files) matrices.push_back(isca::load_posteriors(file));

    std::optional<isca::UnitPrior> prior;
    double scale = prior_scale;
    if (priors == "none") {
      scale = 0.0;
    } else if (priors == "auto") {
      prior = isca::estimate_priors(matrices);
    } else {
      prior = isca::load_priors(priors, inventory);
    }

    ensure_output_dir(output);
    std::mutex log_mutex;
    for_each_parallel(matrices.size(), jobs, [&](size_t i) {
      std::ostringstream trace;
      isca::DecodeConfig decode_config;
      decode_config.beam_width = beam_width;
      decode_config.score_margin = score_margin;
      decode_config.nbest = nbest;
      decode_config.tokens_per_cell = tokens_per_cell;
      decode_config.weights = score_weights;
      decode_config.trace = verbose ? &trace : nullptr;
      const isca::ScoredFrames frames = isca::score_frames(
          matrices[i], inventory, prior ? &*prior : nullptr, score_weights, scale);
      const isca::NBestList nbest_list = isca::beam_decode(frames, tree, model, decode_config);
      isca::write_nbest(nbest_list,
                        fs::path(output) / (matrices[i].utterance_id() + ".nbest"));
      std::lock_guard<std::mutex> lock(log_mutex);
      if (verbose) std::cerr << "# " << matrices[i].utterance_id() << "\n" << trace.str();
      if (nbest_list.empty_warning) {
        std::cerr << "warning: utterance " << matrices[i].utterance_id()
                  << " produced no hypotheses\n";
      }
    });
    return 0;
  }
};

struct RescoreCommand {
  CommonOptions common;
  WeightOptions weights;
  std::string nbest_dir, lexicon, scorer = "", posteriors, output;
  std::string extra_scorer;
  double extra_scale = 0.0;
  int cap = 64;
  bool normalize = false;
  int jobs = 1;

  CLI::Option *nbest_opt, *lexicon_opt, *scorer_opt, *posteriors_opt, *output_opt, *extra_opt,
      *extra_scale_opt, *cap_opt, *normalize_opt, *jobs_opt;

  void attach(CLI::App* cmd) {
    common.attach(cmd);
    weights.attach(cmd);
    nbest_opt = cmd->add_option("--nbest", nbest_dir, "directory of n-best files");
    lexicon_opt = cmd->add_option("--lexicon", lexicon,
                                  "lexicon file, or graphemic:<transcripts> to derive one");
    scorer_opt = cmd->add_option("--scorer", scorer,
                                 "scorer table file, or 'ctc-prefix' for the built-in scorer");
    posteriors_opt = cmd->add_option("--posteriors", posteriors,
                                     "posterior directory (needed for ctc-prefix)");
    output_opt = cmd->add_option("--output", output, "output directory");
    extra_opt = cmd->add_option("--extra-scorer", extra_scorer, "second scorer table");
    extra_scale_opt = cmd->add_option("--extra-scale", extra_scale, "second scorer weight");
    cap_opt = cmd->add_option("--cap", cap, "pronunciation combinations per hypothesis");
    normalize_opt = cmd->add_flag("--normalize-scorer", normalize,
                                  "divide scorer scores by label count");
    jobs_opt = cmd->add_option("--jobs", jobs, "parallel utterances");
  }

  int run() {
    common.resolve();
    const Config& config = common.config;
    config.fill(nbest_opt, "nbest", nbest_dir);
    config.fill(lexicon_opt, "lexicon", lexicon);
    config.fill(scorer_opt, "scorer", scorer);
    config.fill(posteriors_opt, "posteriors", posteriors);
    config.fill(output_opt, "output", output);
    config.fill(extra_opt, "extra_scorer", extra_scorer);
    config.fill(extra_scale_opt, "extra_scale", extra_scale);
    config.fill(cap_opt, "cap", cap);
    config.fill(normalize_opt, "normalize_scorer", normalize);
    config.fill(jobs_opt, "jobs", jobs);

    const isca::UnitInventory inventory =
        load_units(common.units, common.blank, common.unit_kind);
    const isca::Lexicon lex = load_lexicon_setting(require(lexicon, "lexicon"), inventory);
    const isca::ScoreWeights score_weights = weights.resolve(config);

    const bool builtin = require(scorer, "scorer") == "ctc-prefix";
    std::optional<isca::FileScorerTable> table;
    if (!builtin) table = isca::FileScorerTable::load(scorer, inventory);
    std::optional<isca::FileScorerTable> extra;
    if (!extra_scorer.empty()) extra = isca::FileScorerTable::load(extra_scorer, inventory);

    const auto files = list_files(require(nbest_dir, "nbest"), "n-best");
    ensure_output_dir(output);

    std::mutex log_mutex;
    std::atomic<int> failures{0};
    for_each_parallel(files.size(), jobs, [&](size_t i) {
      std::string message;
      try {
        const isca::NBestList nbest = isca::load_nbest(files[i]);
        std::unique_ptr<isca::LabelScorer> owned;
        const isca::LabelScorer* active = nullptr;
        if (builtin) {
          const fs::path post_file = find_by_stem(require(posteriors, "posteriors"),
                                                  nbest.utterance_id, "posterior");
          owned = isca::make_ctc_label_scorer(isca::load_posteriors(post_file), inventory);
          active = owned.get();
        } else {
          active = &*table;
        }
        isca::RescoreOptions options;
        options.cap = cap;
        options.normalize_by_length = normalize;
        if (extra) {
          options.extra_scorer = &*extra;
          options.extra_scale = extra_scale;
        }
        const isca::NBestList ranked =
            isca::rescore_nbest(nbest, *active, lex, score_weights, options);
        int truncated = 0;
        for (const auto& h : ranked.hypotheses) truncated += h.scorer_truncated ? 1 : 0;
        isca::write_nbest(ranked, fs::path(output) / files[i].filename());
        if (truncated > 0) {
          std::lock_guard<std::mutex> lock(log_mutex);
          std::cerr << "note: " << ranked.utterance_id << ": pronunciation sum truncated for "
                    << truncated << " hypotheses\n";
        }
        return;
      } catch (const isca::InputError& e) {
        message = e.what();
      }
      ++failures;
      std::lock_guard<std::mutex> lock(log_mutex);
      std::cerr << "warning: " << files[i].string() << ": " << message << "\n";
    });
    return failures.load() == 0 ? 0 : 1;
  }
};

struct TuneCommand {
  CommonOptions common;
  WeightOptions weights;
  std::string nbest_dir, references, output;
  int lambda = 0;
  int generations = 50;
  unsigned long long seed = 1;
  double sigma0 = 0.3;
  bool tune_insertion = false;

  CLI::Option *nbest_opt, *references_opt, *output_opt, *lambda_opt, *generations_opt,
      *seed_opt, *sigma_opt, *tune_insertion_opt;

  void attach(CLI::App* cmd) {
    common.attach(cmd);
    weights.attach(cmd);
    nbest_opt = cmd->add_option("--nbest", nbest_dir, "directory of rescored n-best files");
    references_opt = cmd->add_option("--references", references, "reference transcripts");
    output_opt = cmd->add_option("--output", output, "weights file to write");
    lambda_opt = cmd->add_option("--lambda", lambda, "population size (0: default)");
    generations_opt = cmd->add_option("--generations", generations, "generations to run");
    seed_opt = cmd->add_option("--seed", seed, "random seed");
    sigma_opt = cmd->add_option("--sigma0", sigma0, "initial step size");
    tune_insertion_opt = cmd->add_flag("--tune-insertion-penalty", tune_insertion,
                                       "also tune the insertion penalty");
  }

  int run() {
    common.resolve();
    const Config& config = common.config;
    config.fill(nbest_opt, "nbest", nbest_dir);
    config.fill(references_opt, "references", references);
    config.fill(output_opt, "output", output);
    config.fill(lambda_opt, "lambda", lambda);
    config.fill(generations_opt, "generations", generations);
    config.fill(seed_opt, "seed", seed);
    config.fill(sigma_opt, "sigma0", sigma0);
    config.fill(tune_insertion_opt, "tune_insertion_penalty", tune_insertion);

    const isca::ScoreWeights init = weights.resolve(config);
    const auto refs = isca::load_transcripts(require(references, "references"));
    const auto files = list_files(require(nbest_dir, "nbest"), "n-best");
    std::vector<isca::DevUtterance> dev;
    dev.reserve(files.size());
    for (const auto& file : files) {
      isca::DevUtterance utterance;
      utterance.nbest = isca::load_nbest(file);
      const auto it = refs.find(utterance.nbest.utterance_id);
      if (it == refs.end()) {
        throw isca::InputError("no reference for utterance " + utterance.nbest.utterance_id);
      }
      utterance.reference = it->second;
      dev.push_back(std::move(utterance));
    }

    isca::TuneOptions options;
    options.lambda = lambda;
    options.generations = generations;
    options.seed = seed;
    options.sigma0 = sigma0;
    options.tune_insertion_penalty = tune_insertion;
    options.progress = &std::cout;
    const isca::ScoreWeights tuned = isca::tune_weights(dev, init, options);

    std::ostringstream final_line;
    final_line.setf(std::ios::fixed);
    final_line.precision(4);
    final_line << "final best WER " << isca::dev_wer(dev, tuned) << "\n";
    std::cout << final_line.str();
    isca::write_weights(tuned, require(output, "output"));
    return 0;
  }
};

struct WerCommand {
  std::string config_path, hypotheses, references, output;
  CLI::Option *config_opt, *hypotheses_opt, *references_opt, *output_opt;
  Config config;

  void attach(CLI::App* cmd) {
    config_opt = cmd->add_option("--config", config_path, "key=value configuration file");
    hypotheses_opt = cmd->add_option("--hypotheses", hypotheses, "hypothesis transcripts");
    references_opt = cmd->add_option("--references", references, "reference transcripts");
    output_opt = cmd->add_option("--output", output, "also write the report here");
  }

  int run() {
    if (!config_path.empty()) config.load(config_path);
    config.fill(hypotheses_opt, "hypotheses", hypotheses);
    config.fill(references_opt, "references", references);
    config.fill(output_opt, "output", output);

    const auto refs = isca::load_transcripts(require(references, "references"));
    const auto hyps = isca::load_transcripts(require(hypotheses, "hypotheses"));
    for (const auto& [id, sentence] : hyps) {
      if (refs.count(id) == 0) {
        throw isca::InputError("hypothesis utterance " + id + " has no reference");
      }
    }
    std::vector<std::pair<std::string, isca::EditStats>> rows;
    for (const auto& [id, reference] : refs) {
      const auto it = hyps.find(id);
      if (it == hyps.end()) {
        throw isca::InputError("missing utterance in hypotheses: " + id);
      }
      rows.emplace_back(id, isca::align_words(std::span<const std::string>(reference),
                                              std::span<const std::string>(it->second))
                                .stats);
    }
    const std::string report = isca::wer_report(rows);
    std::cout << report;
    if (!output.empty()) isca::write_file_atomic(output, report);
    return 0;
  }
};

struct ScoreCommand {
  CommonOptions common;
  WeightOptions weights;
  std::string posteriors, priors = "none", topology = "ctc", mode = "forward";
  double prior_scale = 1.0;
  std::vector<std::string> labels;

  CLI::Option *posteriors_opt, *priors_opt, *topology_opt, *mode_opt, *prior_scale_opt;

  void attach(CLI::App* cmd) {
    common.attach(cmd);
    weights.attach(cmd);
    posteriors_opt = cmd->add_option("--posteriors", posteriors, "posterior file");
    priors_opt = cmd->add_option("--priors", priors, "'none', 'auto', or a priors file");
    prior_scale_opt = cmd->add_option("--prior-scale", prior_scale, "prior subtraction scale");
    topology_opt = cmd->add_option("--topology", topology, "'ctc' or 'hmm:<states>'");
    mode_opt = cmd->add_option("--mode", mode, "'forward' or 'viterbi'");
    cmd->add_option("labels", labels, "unit label sequence to score");
  }

  int run() {
    common.resolve();
    const Config& config = common.config;
    config.fill(posteriors_opt, "posteriors", posteriors);
    config.fill(priors_opt, "priors", priors);
    config.fill(prior_scale_opt, "prior_scale", prior_scale);
    config.fill(topology_opt, "topology", topology);
    config.fill(mode_opt, "mode", mode);

    const isca::UnitInventory inventory =
        load_units(common.units, common.blank, common.unit_kind);
    const isca::PosteriorMatrix matrix =
        isca::load_posteriors(require(posteriors, "posteriors"));
    const isca::ScoreWeights score_weights = weights.resolve(config);

    std::optional<isca::UnitPrior> prior;
    double scale = prior_scale;
    if (priors == "none") {
      scale = 0.0;
    } else if (priors == "auto") {
      const isca::PosteriorMatrix copies[] = {matrix};
      prior = isca::estimate_priors(copies);
    } else {
      prior = isca::load_priors(priors, inventory);
    }
    const isca::ScoredFrames frames = isca::score_frames(
        matrix, inventory, prior ? &*prior : nullptr, score_weights, scale);

    std::vector<int> units;
    for (const std::string& label : labels) {
      const auto u = inventory.find(label);
      if (!u) throw isca::InputError("unknown unit label: " + label);
      units.push_back(*u);
    }
    const isca::Topology topo = parse_topology(topology);
    isca::StateGraph graph;
    if (topo.kind == isca::Topology::Kind::ctc) {
      graph = isca::build_ctc_sequence_graph(units, inventory);
    } else {
      graph = isca::build_hmm_sequence_graph(units, topo.states_per_unit);
    }

    if (mode == "forward") {
      std::cout << isca::format_double(isca::forward_loglik(graph, frames)) << "\n";
    } else if (mode == "viterbi") {
      const isca::Alignment alignment = isca::viterbi_align(graph, frames);
      std::cout << isca::format_double(alignment.logp) << "\n";
      std::string line;
      for (int s : alignment.states) {
        if (!line.empty()) line += ' ';
        line += inventory.label(*graph.states[s].emission);
      }
      std::cout << line << "\n";
    } else {
      throw isca::InputError("mode must be 'forward' or 'viterbi', got '" + mode + "'");
    }
    return 0;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source-channel decoding with label-synchronous rescoring"};
  app.require_subcommand(1);

  DecodeCommand decode;
  decode.attach(app.add_subcommand("decode", "decode posteriors into n-best lists"));
  RescoreCommand rescore;
  rescore.attach(app.add_subcommand("rescore", "re-rank n-best lists with a label scorer"));
  TuneCommand tune;
  tune.attach(app.add_subcommand("tune", "fit interpolation weights to dev WER"));
  WerCommand wer;
  wer.attach(app.add_subcommand("wer", "score hypotheses against references"));
  ScoreCommand score;
  score.attach(app.add_subcommand("score", "score one unit sequence against one utterance"));

  try {
    app.parse(argc, argv);
    if (app.got_subcommand("decode")) return decode.run();
    if (app.got_subcommand("rescore")) return rescore.run();
    if (app.got_subcommand("tune")) return tune.run();
    if (app.got_subcommand("wer")) return wer.run();
    if (app.got_subcommand("score")) return score.run();
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const isca::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
