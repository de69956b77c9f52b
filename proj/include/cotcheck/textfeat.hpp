#pragma once

#include "cotcheck/corpus.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotcheck {

// Lowercases and splits on every non-alphabetic character; digits and
// apostrophes act as separators, so "don't" yields {"don", "t"}.
std::vector<std::string> tokenize(std::string_view text);

// Splits on '.', '!' or '?' followed by whitespace or end of text, and on
// blank lines. Returned sentences are trimmed and never empty.
std::vector<std::string> split_sentences(std::string_view text);

// Deterministic rule-based lemmatizer for lowercase tokens: an exception
// table plus English inflection suffix rules (-s/-es/-ies, -ed, -ing with
// undoubling and e-restoration). Tokens the rules do not cover pass through
// unchanged.
std::string lemmatize(std::string_view token);

// Number of word tokens in the text.
std::size_t cot_length(std::string_view cot);

double volatility(const SentimentTriple& s);

struct HedgingLexicon {
  std::vector<std::string> single_words;
  std::vector<std::vector<std::string>> phrases;  // token sequences

  // The built-in lexicon: modal/uncertainty verbs, uncertainty adverbs,
  // common hedging phrases, and the qualifiers "in part" / "to some extent".
  static const HedgingLexicon& default_lexicon();

  // Plain-text override: one entry per line, multi-word entries allowed.
  static HedgingLexicon from_file(const std::string& path);
  static HedgingLexicon from_lines(const std::vector<std::string>& lines);
};

// Fraction of sentences containing at least one hedging expression, either a
// single-word hedge as a whole token or a phrase as a contiguous token
// subsequence. A sentence counts once no matter how many hedges it holds.
// Throws DataError when the text has no sentences.
double hedging_rate(std::string_view cot, const HedgingLexicon& lexicon);

struct FeatureConfig {
  bool use_length = false;
  bool use_volatility = false;
  bool use_hedging = false;
  std::vector<std::string> word_list;  // ordered; empty = no word flags
  bool word_counts = false;            // count occurrences instead of presence
};

struct FeatureVector {
  std::size_t length_words = 0;
  double hedging_rate = 0.0;
  std::optional<double> volatility;
  std::vector<std::pair<std::string, int>> word_flags;  // ordered per config

  // Numeric row in canonical order: word flags, then length, volatility,
  // hedging rate (whichever are enabled).
  std::vector<double> to_row(const FeatureConfig& config) const;
};

// Assembles the configured features for one record. Requires sentiment when
// the volatility feature is enabled. Word flags match surface (non-
// lemmatized) whole tokens.
FeatureVector featurize(const CotRecord& record, const FeatureConfig& config,
                        const HedgingLexicon& lexicon);

std::size_t feature_dim(const FeatureConfig& config);
std::vector<std::string> feature_names(const FeatureConfig& config);

}  // namespace cotcheck
