#pragma once

#include "cotcheck/corpus.hpp"
#include "cotcheck/heuristics.hpp"
#include "cotcheck/lexicon.hpp"
#include "cotcheck/metrics.hpp"
#include "cotcheck/mlp.hpp"
#include "cotcheck/textfeat.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cotcheck {

struct CorpusSpec {
  std::string path;
  bool strict = false;
  bool agreement_filter = false;   // keep only records with matching dual grades
  std::string sentiment_path;      // optional precomputed triples to attach
};

struct RunConfig {
  std::vector<std::pair<std::string, CorpusSpec>> corpora;  // ordered by set id

  // features
  std::vector<std::vector<std::string>> feature_sets;  // subsets of
                                                       // {words,length,volatility,hedging}
  std::vector<std::string> word_list;  // explicit classifier word list
  std::string word_source = "fixed";   // "fixed" (heuristic defaults / explicit list)
                                       // or "train_lexicon" (derived per training set)
  std::size_t word_top_k = 25;
  bool word_counts = false;
  bool standardize = true;             // z-score the continuous feature columns
  std::string hedging_lexicon_path;

  // lexicon
  LexiconConfig lexicon;
  std::size_t lexicon_top_k = 25;

  // classifier
  TrainConfig classifier;
  std::vector<std::uint64_t> seeds;  // default 0..29
  double train_ratio = 0.8;
  std::string cross_test_mode = "split";  // "split" | "full"
  std::vector<std::pair<std::string, std::string>> evaluations;  // (train, test)

  // heuristics
  HeuristicConfig heuristics;
  int coinflip_seeds = 100;

  // analysis
  std::vector<std::string> group_keys;  // group-accuracy tables to emit
  std::size_t bin_min_count = 30;       // curve bins below this are dropped

  std::string output_dir = "cotcheck-out";
  unsigned threads = 0;  // 0 = hardware concurrency; never affects results
};

// Reads the JSON run file (sections: corpora, features, lexicon, classifier,
// heuristics, analysis, output) and fills defaults.
RunConfig load_run_config(const std::string& path);

struct PreparedFeatures {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> record_ids;
  std::size_t skipped_missing_sentiment = 0;
};

// Feature matrix for a corpus; records without sentiment are skipped (and
// counted) when the volatility feature is enabled.
PreparedFeatures prepare_features(const Corpus& corpus, const FeatureConfig& config,
                                  const HedgingLexicon& lexicon);

// Z-scoring for the continuous feature tail; word-flag columns stay raw.
struct Standardizer {
  std::size_t from_col = 0;
  std::vector<double> mean;   // one per column >= from_col
  std::vector<double> scale;  // sd, or 1 where the column is constant

  static Standardizer fit(const Matrix& features, std::size_t from_col);
  void apply(Matrix& features) const;
};

struct CellResult {
  std::string train_set;
  std::string test_set;
  std::string feature_set;
  std::uint64_t seed = 0;
  ConfusionMatrix cm;
  double mcc_value = 0.0;
  double accuracy = 0.0;
  std::optional<double> auc;
  std::vector<std::pair<double, double>> roc_curve;
  std::size_t train_n = 0;
  std::size_t test_n = 0;
  std::size_t skipped = 0;
};

FeatureConfig make_feature_config(const std::vector<std::string>& feature_set,
                                  const std::vector<std::string>& word_list,
                                  bool word_counts);

std::string feature_set_name(const std::vector<std::string>& feature_set);

// Trains on the seeded 80% split of the training corpus and evaluates on the
// balanced test split of test_corpus (the training corpus itself for
// in-benchmark cells). cross_full balances the whole foreign corpus instead
// of its 20% split.
CellResult evaluate_cell(const std::string& train_set, const Corpus& train_corpus,
                         const std::string& test_set, const Corpus& test_corpus,
                         bool cross_full, double train_ratio, const FeatureConfig& fc,
                         const HedgingLexicon& lexicon, const TrainConfig& tc,
                         bool standardize, std::uint64_t seed);

// Seeded downsample of the majority class over the whole corpus.
Corpus balance_corpus(const Corpus& corpus, std::uint64_t seed);

// Runs ingest -> analysis -> lexicon -> classifier -> heuristics -> reports.
// Writes CSV/JSON/SVG plus a manifest into config.output_dir. With
// analysis_only the classifier and heuristic stages are skipped.
void run_pipeline(const RunConfig& config, bool analysis_only = false);

}  // namespace cotcheck
