#include "cotcheck/heuristics.hpp"

#include "cotcheck/rng.hpp"
#include "cotcheck/textfeat.hpp"

#include <unordered_set>

namespace cotcheck {

int harmful_word_rule(const CotRecord& record, const HeuristicConfig& config) {
  if (config.harmful_words.empty()) {
    throw DataError("harmful_word_rule: empty harmful word list");
  }
  const std::unordered_set<std::string> bad(config.harmful_words.begin(),
                                            config.harmful_words.end());
  for (const auto& token : tokenize(record.cot)) {
    if (bad.count(token)) return 0;
  }
  return 1;
}

int confidence_coinflip(const CotRecord& record, std::uint64_t seed) {
  if (!(record.confidence_pct >= 0.0 && record.confidence_pct <= 100.0)) {
    throw DataError("confidence_coinflip: record " + record.record_id +
                    " has confidence outside [0,100]");
  }
  Rng rng(derive_seed(seed, record.record_id));
  return rng.bernoulli(record.confidence_pct / 100.0) ? 1 : 0;
}

std::vector<int> harmful_word_rule(const Corpus& corpus, const HeuristicConfig& config) {
  std::vector<int> preds;
  preds.reserve(corpus.size());
  for (const auto& rec : corpus.records) preds.push_back(harmful_word_rule(rec, config));
  return preds;
}

std::vector<int> confidence_coinflip(const Corpus& corpus, std::uint64_t seed) {
  std::vector<int> preds;
  preds.reserve(corpus.size());
  for (const auto& rec : corpus.records) preds.push_back(confidence_coinflip(rec, seed));
  return preds;
}

}  // namespace cotcheck
