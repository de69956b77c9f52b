#pragma once

#include "cotcheck/corpus.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace cotcheck {

// token -> indices of the records whose CoT contains it (each record listed
// once, in corpus order).
using WordIndex = std::unordered_map<std::string, std::vector<std::size_t>>;

WordIndex word_index(const Corpus& corpus, bool lemma_mode);

// Accuracy over the records containing the token divided by the corpus mean
// accuracy. Throws when the token occurs nowhere or the corpus accuracy is 0.
double relative_accuracy(const std::string& token, const Corpus& corpus,
                         const WordIndex& index);

// Seeded percentile bootstrap over the containing-record subset with the
// dataset accuracy held fixed. Needs at least two containing records. The
// per-token stream is derived from (seed, token), so evaluation order is
// irrelevant.
std::pair<double, double> bootstrap_ci(const std::string& token, const Corpus& corpus,
                                       const WordIndex& index, int resamples = 1000,
                                       double level = 0.95, std::uint64_t seed = 0);

struct LexiconSetStats {
  std::size_t occurrences = 0;  // records containing the token
  double subset_accuracy = 0.0;
  double dataset_accuracy = 0.0;
  double relative_accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct LexiconEntry {
  std::string token;
  bool lemma_mode = false;
  std::vector<std::pair<std::string, LexiconSetStats>> per_set;  // ordered by set id
  double mean_relative_accuracy = 0.0;  // unweighted mean over sets
};

struct LexiconConfig {
  std::size_t min_occurrences = 300;  // required in every set
  bool lemma_mode = false;
  int bootstrap_resamples = 1000;  // 0 disables the confidence intervals
  double bootstrap_level = 0.95;
  std::uint64_t bootstrap_seed = 0;
  unsigned threads = 1;
};

// Builds relative-accuracy entries for every token that clears the occurrence
// threshold in every set. Entries come back sorted by token.
std::vector<LexiconEntry> build_lexicon(
    const std::vector<std::pair<std::string, const Corpus*>>& sets,
    const LexiconConfig& config);

enum class WordDirection { harmful, booster };

// Harmful: relative accuracy < 1 in every set, ranked by mean relative
// accuracy ascending. Booster: > 1 in every set, descending. Ties break
// lexicographically; the list is truncated to top_k.
std::vector<std::string> select_consistent(const std::vector<LexiconEntry>& lexicon,
                                           WordDirection direction, std::size_t top_k);

// CSV columns: token, set_id, occurrences, subset_accuracy, dataset_accuracy,
// relative_accuracy, ci_low, ci_high, mean_relative_accuracy.
void export_lexicon_csv(const std::vector<LexiconEntry>& entries, std::ostream& out);

}  // namespace cotcheck
