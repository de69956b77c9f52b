#include "cotcheck/corpus.hpp"
#include "cotcheck/format.hpp"
#include "cotcheck/heuristics.hpp"
#include "cotcheck/lexicon.hpp"
#include "cotcheck/metrics.hpp"
#include "cotcheck/mlp.hpp"
#include "cotcheck/pipeline.hpp"
#include "cotcheck/sentiment.hpp"
#include "cotcheck/textfeat.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using cotcheck::DataError;
using json = nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

struct FeatureCli {
  std::vector<std::string> words;
  std::string word_file;
  bool use_length = false;
  bool use_volatility = false;
  bool use_hedging = false;
  bool counts = false;
  std::string hedging_lexicon;

  void attach(CLI::App* cmd) {
    cmd->add_option("--words", words, "classifier word list (repeatable)");
    cmd->add_option("--word-file", word_file, "file with one word per line");
    cmd->add_flag("--length", use_length, "include CoT length");
    cmd->add_flag("--volatility", use_volatility, "include sentiment volatility");
    cmd->add_flag("--hedging", use_hedging, "include hedging rate");
    cmd->add_flag("--counts", counts, "word counts instead of presence flags");
    cmd->add_option("--hedging-lexicon", hedging_lexicon, "hedging lexicon override file");
  }

  cotcheck::FeatureConfig config() const {
    cotcheck::FeatureConfig fc;
    fc.use_length = use_length;
    fc.use_volatility = use_volatility;
    fc.use_hedging = use_hedging;
    fc.word_counts = counts;
    fc.word_list = words;
    if (!word_file.empty()) {
      std::ifstream in(word_file);
      if (!in) throw DataError("cannot open word file: " + word_file);
      std::string line;
      while (std::getline(in, line)) {
        auto tokens = cotcheck::tokenize(line);
        for (auto& t : tokens) fc.word_list.push_back(std::move(t));
      }
    }
    return fc;
  }

  cotcheck::HedgingLexicon lexicon() const {
    return hedging_lexicon.empty() ? cotcheck::HedgingLexicon::default_lexicon()
                                   : cotcheck::HedgingLexicon::from_file(hedging_lexicon);
  }
};

cotcheck::Corpus load_one(const std::string& path, bool strict, bool agreement,
                          const std::string& sentiment_path = {}) {
  cotcheck::LoadResult lr = cotcheck::load_corpus(path, strict);
  cotcheck::Corpus corpus = std::move(lr.corpus);
  if (!sentiment_path.empty()) {
    cotcheck::ScoreOptions opts;
    opts.offline_path = sentiment_path;
    corpus = cotcheck::score_corpus(corpus, opts).corpus;
  }
  if (agreement) corpus = cotcheck::filter_agreement(corpus).corpus;
  return corpus;
}

std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  // "a:b" is the half-open range [a, b); a plain number is a single seed.
  std::vector<std::uint64_t> seeds;
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    seeds.push_back(std::stoull(spec));
    return seeds;
  }
  const std::uint64_t from = std::stoull(spec.substr(0, colon));
  const std::uint64_t to = std::stoull(spec.substr(colon + 1));
  for (std::uint64_t s = from; s < to; ++s) seeds.push_back(s);
  if (seeds.empty()) throw DataError("empty seed range: " + spec);
  return seeds;
}

void write_or_print(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw DataError("cannot write " + out_path);
  out << content;
}

int cmd_ingest(const std::string& input, bool strict, bool agreement) {
  cotcheck::LoadResult lr = cotcheck::load_corpus(input, strict);
  json stats;
  stats["path"] = input;
  stats["loaded"] = lr.loaded;
  stats["skipped"] = lr.skipped;
  if (!lr.skip_reasons.empty()) stats["skip_reasons"] = lr.skip_reasons;
  cotcheck::Corpus corpus = std::move(lr.corpus);
  if (agreement) {
    cotcheck::AgreementResult ar = cotcheck::filter_agreement(corpus);
    stats["agreement_rate"] = ar.agreement_rate;
    stats["records_after_agreement"] = ar.corpus.size();
    corpus = std::move(ar.corpus);
  }
  stats["records"] = corpus.size();
  stats["accuracy_pct"] = 100.0 * corpus.accuracy();
  std::size_t with_sentiment = 0;
  for (const auto& rec : corpus.records) {
    if (rec.sentiment) ++with_sentiment;
  }
  stats["sentiment_records"] = with_sentiment;
  std::cout << stats.dump(2) << '\n';
  return kExitOk;
}

int cmd_features(const std::string& input, const FeatureCli& fcli, const std::string& out) {
  const cotcheck::Corpus corpus = load_one(input, false, false);
  const auto fc = fcli.config();
  const auto lex = fcli.lexicon();
  std::ostringstream csv;
  csv << "record_id,grade,length_words,hedging_rate,volatility";
  for (const auto& w : fc.word_list) csv << ",word:" << w;
  csv << '\n';
  for (const auto& rec : corpus.records) {
    cotcheck::FeatureConfig per_record = fc;
    per_record.use_hedging = true;
    per_record.use_length = true;
    per_record.use_volatility = rec.sentiment.has_value();
    const auto fv = cotcheck::featurize(rec, per_record, lex);
    csv << rec.record_id << ',' << cotcheck::grade_value(rec.grade) << ',' << fv.length_words
        << ',' << cotcheck::format_double(fv.hedging_rate) << ',';
    if (fv.volatility) csv << cotcheck::format_double(*fv.volatility);
    for (const auto& [w, flag] : fv.word_flags) {
      (void)w;
      csv << ',' << flag;
    }
    csv << '\n';
  }
  write_or_print(out, csv.str());
  return kExitOk;
}

int cmd_lexicon(const std::vector<std::string>& inputs, std::size_t min_occurrences,
                bool lemma, int resamples, double level, std::uint64_t seed,
                std::size_t top_k, unsigned threads, const std::string& out,
                const std::string& words_out) {
  std::vector<std::pair<std::string, cotcheck::Corpus>> corpora;
  for (const auto& spec : inputs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) {
      throw DataError("--input expects set_id=path, got: " + spec);
    }
    corpora.emplace_back(spec.substr(0, eq), load_one(spec.substr(eq + 1), false, false));
  }
  std::vector<std::pair<std::string, const cotcheck::Corpus*>> set_ptrs;
  for (const auto& [id, corpus] : corpora) set_ptrs.emplace_back(id, &corpus);

  cotcheck::LexiconConfig cfg;
  cfg.min_occurrences = min_occurrences;
  cfg.lemma_mode = lemma;
  cfg.bootstrap_resamples = resamples;
  cfg.bootstrap_level = level;
  cfg.bootstrap_seed = seed;
  cfg.threads = threads;
  const auto entries = cotcheck::build_lexicon(set_ptrs, cfg);

  std::ostringstream csv;
  cotcheck::export_lexicon_csv(entries, csv);
  write_or_print(out, csv.str());

  if (!words_out.empty()) {
    json words;
    words["min_occurrences"] = min_occurrences;
    words["lemma_mode"] = lemma;
    words["entries"] = entries.size();
    if (!entries.empty()) {
      words["harmful"] = cotcheck::select_consistent(entries, cotcheck::WordDirection::harmful, top_k);
      words["booster"] = cotcheck::select_consistent(entries, cotcheck::WordDirection::booster, top_k);
    } else {
      words["harmful"] = json::array();
      words["booster"] = json::array();
    }
    write_or_print(words_out, words.dump(2) + "\n");
  }
  return kExitOk;
}

int cmd_train(const std::string& input, const FeatureCli& fcli, std::uint64_t seed,
              double ratio, bool no_standardize, cotcheck::TrainConfig tc,
              const std::string& model_out) {
  const cotcheck::Corpus corpus = load_one(input, false, false);
  const auto fc = fcli.config();
  const auto lex = fcli.lexicon();

  const cotcheck::SplitPlan plan = cotcheck::split_train_balanced_test(corpus, ratio, seed);
  const cotcheck::Corpus train_sub = cotcheck::subset(corpus, plan.train_ids);
  cotcheck::PreparedFeatures prep = cotcheck::prepare_features(train_sub, fc, lex);
  tc.class_weights = cotcheck::class_weights(prep.labels);
  if (!no_standardize) {
    const auto st = cotcheck::Standardizer::fit(prep.features, fc.word_list.size());
    st.apply(prep.features);
  }
  const cotcheck::TrainResult result = cotcheck::train(prep.features, prep.labels, tc, seed);
  cotcheck::save_model(result.model, model_out);

  json info;
  info["seed"] = seed;
  info["train_records"] = prep.labels.size();
  info["feature_dim"] = prep.features.cols;
  info["class_weights"] = {tc.class_weights.first, tc.class_weights.second};
  info["final_loss"] = result.epoch_losses.back();
  info["model"] = model_out;
  std::cout << info.dump(2) << '\n';
  return kExitOk;
}

int cmd_evaluate(const std::string& train_input, const std::string& test_input,
                 const FeatureCli& fcli, const std::string& seed_spec, double ratio,
                 const std::string& cross_mode, bool no_standardize,
                 cotcheck::TrainConfig tc, const std::string& out) {
  const cotcheck::Corpus train_corpus = load_one(train_input, false, false);
  cotcheck::Corpus test_corpus;
  const bool cross = !test_input.empty() && test_input != train_input;
  if (cross) test_corpus = load_one(test_input, false, false);

  const auto fc = fcli.config();
  const auto lex = fcli.lexicon();
  const auto seeds = parse_seed_range(seed_spec);

  std::ostringstream csv;
  csv << "seed,tn,fp,fn,tp,mcc,accuracy,auc\n";
  std::vector<double> mccs;
  for (const auto seed : seeds) {
    const cotcheck::CellResult r = cotcheck::evaluate_cell(
        "train", train_corpus, cross ? "test" : "train", cross ? test_corpus : train_corpus,
        cross_mode == "full", ratio, fc, lex, tc, !no_standardize, seed);
    csv << seed << ',' << r.cm.tn << ',' << r.cm.fp << ',' << r.cm.fn << ',' << r.cm.tp << ','
        << cotcheck::format_double(r.mcc_value) << ',' << cotcheck::format_double(r.accuracy)
        << ',';
    if (r.auc) csv << cotcheck::format_double(*r.auc);
    csv << '\n';
    mccs.push_back(r.mcc_value);
  }
  double mean = 0.0;
  for (double m : mccs) mean += m;
  mean /= static_cast<double>(mccs.size());
  csv << "# mcc_mean=" << cotcheck::format_double(mean) << '\n';
  write_or_print(out, csv.str());
  return kExitOk;
}

int cmd_heuristics(const std::string& input, const std::string& words_file,
                   std::uint64_t seed, int coinflip_seeds, double ratio,
                   const std::string& seed_spec) {
  const cotcheck::Corpus corpus = load_one(input, false, false);
  cotcheck::HeuristicConfig cfg;
  cfg.rng_seed = seed;
  if (!words_file.empty()) {
    std::ifstream in(words_file);
    if (!in) throw DataError("cannot open harmful words file: " + words_file);
    cfg.harmful_words.clear();
    std::string line;
    while (std::getline(in, line)) {
      for (auto& t : cotcheck::tokenize(line)) cfg.harmful_words.push_back(std::move(t));
    }
    if (cfg.harmful_words.empty()) throw DataError("harmful words file is empty");
  }

  const auto seeds = parse_seed_range(seed_spec);
  json report;
  report["words"] = cfg.harmful_words;

  std::vector<double> rule_mcc;
  for (const auto s : seeds) {
    const auto plan = cotcheck::split_train_balanced_test(corpus, ratio, s);
    const auto test_sub = cotcheck::subset(corpus, plan.test_ids);
    std::vector<int> labels;
    for (const auto& rec : test_sub.records) labels.push_back(cotcheck::grade_value(rec.grade));
    const auto preds = cotcheck::harmful_word_rule(test_sub, cfg);
    rule_mcc.push_back(cotcheck::mcc(cotcheck::confusion(preds, labels)));
  }
  double rule_mean = 0.0;
  for (double m : rule_mcc) rule_mean += m;
  report["harmful_word_rule"] = {{"mcc_mean", rule_mean / static_cast<double>(rule_mcc.size())},
                                 {"splits", rule_mcc.size()}};

  std::vector<double> flip_mcc;
  for (int k = 0; k < coinflip_seeds; ++k) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
    const auto plan = cotcheck::split_train_balanced_test(corpus, ratio, s);
    const auto test_sub = cotcheck::subset(corpus, plan.test_ids);
    std::vector<int> labels;
    for (const auto& rec : test_sub.records) labels.push_back(cotcheck::grade_value(rec.grade));
    const auto preds = cotcheck::confidence_coinflip(test_sub, s);
    flip_mcc.push_back(cotcheck::mcc(cotcheck::confusion(preds, labels)));
  }
  double flip_mean = 0.0;
  for (double m : flip_mcc) flip_mean += m;
  report["confidence_coinflip"] = {{"mcc_mean", flip_mean / static_cast<double>(flip_mcc.size())},
                                   {"seeds", flip_mcc.size()}};
  std::cout << report.dump(2) << '\n';
  return kExitOk;
}

int cmd_calibration(const std::string& input, bool agreement) {
  const cotcheck::Corpus corpus = load_one(input, false, agreement);
  std::vector<std::pair<double, int>> records;
  for (const auto& rec : corpus.records) {
    records.emplace_back(rec.confidence_pct, cotcheck::grade_value(rec.grade));
  }
  const auto report = cotcheck::calibration_error(records);
  json out;
  out["calibration_error_pct"] = report.calibration_error_pct;
  for (const auto& bin : report.bins) {
    json b;
    b["lo"] = bin.lo;
    b["hi"] = bin.hi;
    b["count"] = bin.count;
    if (bin.count > 0) {
      b["mean_confidence_pct"] = bin.mean_confidence_pct;
      b["accuracy_pct"] = bin.accuracy_pct;
    }
    out["bins"].push_back(b);
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_sentiment(const std::string& input, const std::string& out,
                  const std::string& offline, const std::string& cache, bool live,
                  const std::string& endpoint, const std::string& model, int concurrency) {
  const cotcheck::Corpus corpus = load_one(input, false, false);
  cotcheck::ScoreOptions opts;
  opts.offline_path = offline;
  opts.cache_path = cache;
  opts.offline_only = !live;
  opts.concurrency = concurrency;
  opts.endpoint.base_url = endpoint;
  if (!model.empty()) opts.endpoint.model = model;
  const cotcheck::ScoreResult result = cotcheck::score_corpus(corpus, opts);
  cotcheck::save_corpus(result.corpus, out);

  json stats;
  stats["already_present"] = result.stats.already_present;
  stats["from_cache"] = result.stats.from_cache;
  stats["from_offline"] = result.stats.from_offline;
  stats["scored_live"] = result.stats.scored_live;
  stats["failed"] = result.stats.failures.size();
  for (const auto& [id, reason] : result.stats.failures) {
    stats["failures"].push_back({{"record_id", id}, {"reason", reason}});
  }
  std::cout << stats.dump(2) << '\n';
  return result.stats.failures.empty() ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chain-of-thought correctness signals: features, lexicons, classifier, reports"};
  app.require_subcommand(1);

  // pipeline / report
  std::string cfg_path, out_override;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "run the full analysis pipeline");
  pipeline_cmd->add_option("--config", cfg_path, "run config JSON")->required();
  pipeline_cmd->add_option("--out", out_override, "override output directory");
  auto* report_cmd = app.add_subcommand("report", "analysis reports and plots only");
  report_cmd->add_option("--config", cfg_path, "run config JSON")->required();
  report_cmd->add_option("--out", out_override, "override output directory");

  // ingest
  std::string in_path;
  bool strict = false, agreement = false;
  auto* ingest_cmd = app.add_subcommand("ingest", "validate a corpus and print stats");
  ingest_cmd->add_option("--input", in_path, "JSONL corpus")->required();
  ingest_cmd->add_flag("--strict", strict, "abort on the first malformed line");
  ingest_cmd->add_flag("--agreement-filter", agreement, "keep only dual-grade agreement");

  // features
  FeatureCli feat_cli;
  std::string feat_out = "-";
  auto* features_cmd = app.add_subcommand("features", "emit per-record feature CSV");
  features_cmd->add_option("--input", in_path, "JSONL corpus")->required();
  features_cmd->add_option("--out", feat_out, "output CSV path (default stdout)");
  feat_cli.attach(features_cmd);

  // lexicon
  std::vector<std::string> lex_inputs;
  std::size_t min_occ = 300, top_k = 25;
  int resamples = 1000;
  double level = 0.95;
  std::uint64_t lex_seed = 0;
  unsigned lex_threads = 1;
  bool lemma = false;
  std::string lex_out = "-", words_out;
  auto* lexicon_cmd = app.add_subcommand("lexicon", "build a relative-accuracy lexicon");
  lexicon_cmd->add_option("--input", lex_inputs, "set_id=path (repeatable)")->required();
  lexicon_cmd->add_option("--min-occurrences", min_occ, "occurrence threshold per set");
  lexicon_cmd->add_flag("--lemma", lemma, "lemmatize tokens");
  lexicon_cmd->add_option("--resamples", resamples, "bootstrap resamples (0 disables)");
  lexicon_cmd->add_option("--level", level, "bootstrap confidence level");
  lexicon_cmd->add_option("--seed", lex_seed, "bootstrap seed");
  lexicon_cmd->add_option("--top-k", top_k, "size of harmful/booster lists");
  lexicon_cmd->add_option("--threads", lex_threads, "worker threads");
  lexicon_cmd->add_option("--out", lex_out, "lexicon CSV path (default stdout)");
  lexicon_cmd->add_option("--words-out", words_out, "harmful/booster JSON path");

  // train
  FeatureCli train_feat;
  std::uint64_t train_seed = 0;
  double ratio = 0.8;
  bool no_standardize = false;
  cotcheck::TrainConfig tc;
  std::string model_out = "model.bin";
  auto* train_cmd = app.add_subcommand("train", "train one classifier cell");
  train_cmd->add_option("--input", in_path, "training corpus")->required();
  train_cmd->add_option("--seed", train_seed, "split/init seed");
  train_cmd->add_option("--train-ratio", ratio, "train fraction");
  train_cmd->add_option("--epochs", tc.epochs, "training epochs");
  train_cmd->add_option("--batch-size", tc.batch_size, "minibatch size");
  train_cmd->add_option("--learning-rate", tc.learning_rate, "Adam step size");
  train_cmd->add_flag("--no-standardize", no_standardize, "skip feature standardization");
  train_cmd->add_option("--model-out", model_out, "model file")->required();
  train_feat.attach(train_cmd);

  // evaluate
  FeatureCli eval_feat;
  std::string test_path, seed_spec = "0:30", cross_mode = "split", eval_out = "-";
  auto* eval_cmd = app.add_subcommand("evaluate", "train/evaluate across seeds");
  eval_cmd->add_option("--train-input", in_path, "training corpus")->required();
  eval_cmd->add_option("--test-input", test_path, "foreign test corpus (cross-benchmark)");
  eval_cmd->add_option("--seeds", seed_spec, "seed or a:b range (default 0:30)");
  eval_cmd->add_option("--train-ratio", ratio, "train fraction");
  eval_cmd->add_option("--cross-mode", cross_mode, "split|full foreign test construction")
      ->check(CLI::IsMember({"split", "full"}));
  eval_cmd->add_option("--epochs", tc.epochs, "training epochs");
  eval_cmd->add_option("--batch-size", tc.batch_size, "minibatch size");
  eval_cmd->add_option("--learning-rate", tc.learning_rate, "Adam step size");
  eval_cmd->add_flag("--no-standardize", no_standardize, "skip feature standardization");
  eval_cmd->add_option("--out", eval_out, "per-seed CSV (default stdout)");
  eval_feat.attach(eval_cmd);

  // heuristics
  std::string harmful_file;
  std::uint64_t heur_seed = 0;
  int coinflip_seeds = 100;
  std::string heur_seed_spec = "0:30";
  auto* heur_cmd = app.add_subcommand("heuristics", "word-rule and coin-flip baselines");
  heur_cmd->add_option("--input", in_path, "corpus")->required();
  heur_cmd->add_option("--harmful-words", harmful_file, "one token per line");
  heur_cmd->add_option("--seed", heur_seed, "base RNG seed");
  heur_cmd->add_option("--coinflip-seeds", coinflip_seeds, "number of coin-flip seeds");
  heur_cmd->add_option("--splits", heur_seed_spec, "split seeds for the word rule");
  heur_cmd->add_option("--train-ratio", ratio, "train fraction for the splits");

  // calibration
  auto* calib_cmd = app.add_subcommand("calibration", "decile calibration report");
  calib_cmd->add_option("--input", in_path, "corpus")->required();
  calib_cmd->add_flag("--agreement-filter", agreement, "keep only dual-grade agreement");

  // sentiment
  std::string sent_out, offline_path, cache_path, endpoint_url, endpoint_model;
  bool live = false;
  int concurrency = 4;
  auto* sent_cmd = app.add_subcommand("sentiment", "attach sentiment triples to a corpus");
  sent_cmd->add_option("--input", in_path, "corpus")->required();
  sent_cmd->add_option("--out", sent_out, "corpus with sentiment attached")->required();
  sent_cmd->add_option("--offline", offline_path, "precomputed triples JSONL");
  sent_cmd->add_option("--cache", cache_path, "append-only cache JSONL");
  sent_cmd->add_flag("--live", live, "call the configured endpoint for missing records");
  sent_cmd->add_option("--endpoint", endpoint_url, "chat-completion base URL");
  sent_cmd->add_option("--model", endpoint_model, "evaluator model name");
  sent_cmd->add_option("--concurrency", concurrency, "parallel requests");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (pipeline_cmd->parsed() || report_cmd->parsed()) {
      cotcheck::RunConfig config = cotcheck::load_run_config(cfg_path);
      if (!out_override.empty()) config.output_dir = out_override;
      cotcheck::run_pipeline(config, report_cmd->parsed());
      std::cout << "reports written to " << config.output_dir << '\n';
      return kExitOk;
    }
    if (ingest_cmd->parsed()) return cmd_ingest(in_path, strict, agreement);
    if (features_cmd->parsed()) return cmd_features(in_path, feat_cli, feat_out);
    if (lexicon_cmd->parsed()) {
      return cmd_lexicon(lex_inputs, min_occ, lemma, resamples, level, lex_seed, top_k,
                         lex_threads, lex_out, words_out);
    }
    if (train_cmd->parsed()) {
      return cmd_train(in_path, train_feat, train_seed, ratio, no_standardize, tc, model_out);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(in_path, test_path, eval_feat, seed_spec, ratio, cross_mode,
                          no_standardize, tc, eval_out);
    }
    if (heur_cmd->parsed()) {
      return cmd_heuristics(in_path, harmful_file, heur_seed, coinflip_seeds, ratio,
                            heur_seed_spec);
    }
    if (calib_cmd->parsed()) return cmd_calibration(in_path, agreement);
    if (sent_cmd->parsed()) {
      return cmd_sentiment(in_path, sent_out, offline_path, cache_path, live, endpoint_url,
                           endpoint_model, concurrency);
    }
  } catch (const DataError& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitData;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
