#pragma once

#include "cotcheck/corpus.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cotcheck {

struct HeuristicConfig {
  // First row of the harmful-word ranking; overridable so a freshly built
  // lexicon can feed in directly.
  std::vector<std::string> harmful_words{"complexity", "guess", "stuck", "hard", "involved"};
  std::uint64_t rng_seed = 0;
};

// Predicts incorrect (0) iff any configured surface token appears as a whole
// token in the CoT; otherwise correct (1).
int harmful_word_rule(const CotRecord& record, const HeuristicConfig& config);

// Predicts correct with probability confidence_pct/100. The draw comes from
// a stream derived from (seed, record_id), so evaluation order and
// parallelism cannot change the outcome.
int confidence_coinflip(const CotRecord& record, std::uint64_t seed);

std::vector<int> harmful_word_rule(const Corpus& corpus, const HeuristicConfig& config);
std::vector<int> confidence_coinflip(const Corpus& corpus, std::uint64_t seed);

}  // namespace cotcheck
