#include "cotcheck/lexicon.hpp"

#include "cotcheck/format.hpp"
#include "cotcheck/rng.hpp"
#include "cotcheck/textfeat.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ostream>
#include <thread>
#include <unordered_set>

namespace cotcheck {
namespace {

double subset_accuracy_of(const Corpus& corpus, const std::vector<std::size_t>& records) {
  std::size_t correct = 0;
  for (std::size_t idx : records) {
    if (corpus.records[idx].grade == Grade::correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

// Linear-interpolated sample quantile on a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted.front();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

WordIndex word_index(const Corpus& corpus, bool lemma_mode) {
  if (corpus.records.empty()) throw DataError("word_index: empty corpus");
  WordIndex index;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    seen.clear();
    for (auto& token : tokenize(corpus.records[i].cot)) {
      std::string key = lemma_mode ? lemmatize(token) : std::move(token);
      if (seen.insert(key).second) {
        index[std::move(key)].push_back(i);
      }
    }
  }
  return index;
}

double relative_accuracy(const std::string& token, const Corpus& corpus,
                         const WordIndex& index) {
  auto it = index.find(token);
  if (it == index.end() || it->second.empty()) {
    throw DataError("relative_accuracy: token \"" + token + "\" occurs in no record");
  }
  const double dataset = corpus.accuracy();
  if (dataset == 0.0) {
    throw DataError("relative_accuracy: dataset accuracy is zero, ratio undefined");
  }
  return subset_accuracy_of(corpus, it->second) / dataset;
}

std::pair<double, double> bootstrap_ci(const std::string& token, const Corpus& corpus,
                                       const WordIndex& index, int resamples,
                                       double level, std::uint64_t seed) {
  auto it = index.find(token);
  if (it == index.end() || it->second.size() < 2) {
    throw DataError("bootstrap_ci: token \"" + token + "\" has fewer than 2 containing records");
  }
  if (resamples < 1) throw DataError("bootstrap_ci: resamples must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw DataError("bootstrap_ci: level must be in (0,1)");

  const auto& containing = it->second;
  const std::size_t m = containing.size();
  const double dataset = corpus.accuracy();
  if (dataset == 0.0) throw DataError("bootstrap_ci: dataset accuracy is zero");

  // Only the grade of a drawn record matters, so precompute the 0/1 grades.
  std::vector<std::uint8_t> grades(m);
  for (std::size_t i = 0; i < m; ++i) {
    grades[i] = corpus.records[containing[i]].grade == Grade::correct ? 1 : 0;
  }

  Rng rng(derive_seed(seed, token));
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  for (auto& stat : stats) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < m; ++i) {
      correct += grades[rng.uniform_index(m)];
    }
    stat = (static_cast<double>(correct) / static_cast<double>(m)) / dataset;
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  return {quantile_sorted(stats, alpha / 2.0), quantile_sorted(stats, 1.0 - alpha / 2.0)};
}

std::vector<LexiconEntry> build_lexicon(
    const std::vector<std::pair<std::string, const Corpus*>>& sets,
    const LexiconConfig& config) {
  if (sets.empty()) throw DataError("build_lexicon: need at least one corpus");
  if (config.min_occurrences == 0) throw DataError("build_lexicon: min_occurrences must be >= 1");

  std::vector<WordIndex> indices;
  indices.reserve(sets.size());
  for (const auto& [set_id, corpus] : sets) {
    (void)set_id;
    indices.push_back(word_index(*corpus, config.lemma_mode));
  }

  // Candidates must clear the occurrence threshold in every set.
  std::vector<std::string> candidates;
  for (const auto& [token, postings] : indices.front()) {
    if (postings.size() < config.min_occurrences) continue;
    bool everywhere = true;
    for (std::size_t s = 1; s < indices.size(); ++s) {
      auto it = indices[s].find(token);
      if (it == indices[s].end() || it->second.size() < config.min_occurrences) {
        everywhere = false;
        break;
      }
    }
    if (everywhere) candidates.push_back(token);
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<LexiconEntry> entries(candidates.size());
  auto build_entry = [&](std::size_t c) {
    const std::string& token = candidates[c];
    LexiconEntry entry;
    entry.token = token;
    entry.lemma_mode = config.lemma_mode;
    double rel_sum = 0.0;
    for (std::size_t s = 0; s < sets.size(); ++s) {
      const Corpus& corpus = *sets[s].second;
      const auto& postings = indices[s].at(token);
      LexiconSetStats stats;
      stats.occurrences = postings.size();
      stats.subset_accuracy = subset_accuracy_of(corpus, postings);
      stats.dataset_accuracy = corpus.accuracy();
      if (stats.dataset_accuracy == 0.0) {
        throw DataError("build_lexicon: dataset accuracy is zero in set " + sets[s].first);
      }
      stats.relative_accuracy = stats.subset_accuracy / stats.dataset_accuracy;
      if (config.bootstrap_resamples > 0) {
        std::tie(stats.ci_low, stats.ci_high) =
            bootstrap_ci(token, corpus, indices[s], config.bootstrap_resamples,
                         config.bootstrap_level,
                         derive_seed(config.bootstrap_seed, sets[s].first));
      }
      rel_sum += stats.relative_accuracy;
      entry.per_set.emplace_back(sets[s].first, stats);
    }
    entry.mean_relative_accuracy = rel_sum / static_cast<double>(sets.size());
    entries[c] = std::move(entry);
  };

  const unsigned threads = std::max(1u, config.threads);
  if (threads == 1 || candidates.size() < 2) {
    for (std::size_t c = 0; c < candidates.size(); ++c) build_entry(c);
  } else {
    // Per-token seeds make the result independent of scheduling.
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
      for (std::size_t c = next.fetch_add(1); c < candidates.size(); c = next.fetch_add(1)) {
        build_entry(c);
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return entries;
}

std::vector<std::string> select_consistent(const std::vector<LexiconEntry>& lexicon,
                                           WordDirection direction, std::size_t top_k) {
  if (lexicon.empty()) throw DataError("select_consistent: empty lexicon");
  if (top_k == 0) throw DataError("select_consistent: top_k must be positive");

  std::vector<const LexiconEntry*> picked;
  for (const auto& entry : lexicon) {
    bool consistent = true;
    for (const auto& [set_id, stats] : entry.per_set) {
      (void)set_id;
      const bool ok = direction == WordDirection::harmful ? stats.relative_accuracy < 1.0
                                                          : stats.relative_accuracy > 1.0;
      if (!ok) {
        consistent = false;
        break;
      }
    }
    if (consistent) picked.push_back(&entry);
  }

  std::sort(picked.begin(), picked.end(), [direction](const LexiconEntry* a, const LexiconEntry* b) {
    if (a->mean_relative_accuracy != b->mean_relative_accuracy) {
      return direction == WordDirection::harmful
                 ? a->mean_relative_accuracy < b->mean_relative_accuracy
                 : a->mean_relative_accuracy > b->mean_relative_accuracy;
    }
    return a->token < b->token;
  });
  if (picked.size() > top_k) picked.resize(top_k);

  std::vector<std::string> out;
  out.reserve(picked.size());
  for (const auto* entry : picked) out.push_back(entry->token);
  return out;
}

void export_lexicon_csv(const std::vector<LexiconEntry>& entries, std::ostream& out) {
  out << "token,set_id,occurrences,subset_accuracy,dataset_accuracy,"
         "relative_accuracy,ci_low,ci_high,mean_relative_accuracy\n";
  for (const auto& entry : entries) {
    for (const auto& [set_id, stats] : entry.per_set) {
      out << entry.token << ',' << set_id << ',' << stats.occurrences << ','
          << format_double(stats.subset_accuracy) << ','
          << format_double(stats.dataset_accuracy) << ','
          << format_double(stats.relative_accuracy) << ','
          << format_double(stats.ci_low) << ',' << format_double(stats.ci_high) << ','
          << format_double(entry.mean_relative_accuracy) << '\n';
    }
  }
}

}  // namespace cotcheck
