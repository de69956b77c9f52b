#include "cotcheck/lexicon.hpp"

#include "../support/synthetic.hpp"
#include "cotcheck/rng.hpp"
#include "cotcheck/textfeat.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

using namespace cotcheck;
using testsupport::make_record;

namespace {

// Naive membership scan: token -> set of record indices.
std::map<std::string, std::set<std::size_t>> naive_index(const Corpus& corpus, bool lemma) {
  std::map<std::string, std::set<std::size_t>> index;
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    for (const auto& token : tokenize(corpus.records[i].cot)) {
      index[lemma ? lemmatize(token) : token].insert(i);
    }
  }
  return index;
}

double naive_relative_accuracy(const std::string& token, const Corpus& corpus, bool lemma) {
  std::size_t containing = 0, containing_correct = 0, correct = 0;
  for (const auto& rec : corpus.records) {
    bool has = false;
    for (const auto& t : tokenize(rec.cot)) {
      if ((lemma ? lemmatize(t) : t) == token) has = true;
    }
    if (rec.grade == Grade::correct) ++correct;
    if (has) {
      ++containing;
      if (rec.grade == Grade::correct) ++containing_correct;
    }
  }
  const double dataset = static_cast<double>(correct) / static_cast<double>(corpus.size());
  return (static_cast<double>(containing_correct) / static_cast<double>(containing)) / dataset;
}

}  // namespace

TEST_CASE("word_index membership") {
  Corpus corpus;
  corpus.records.push_back(make_record("r1", 1, "we guess the answer."));
  corpus.records.push_back(make_record("r2", 0, "we compute the answer."));
  const WordIndex index = word_index(corpus, false);
  REQUIRE(index.count("guess") == 1);
  CHECK(index.at("guess") == std::vector<std::size_t>{0});
  CHECK(index.at("answer").size() == 2);

  SUBCASE("lemma mode folds inflections") {
    Corpus c2 = corpus;
    c2.records.push_back(make_record("r3", 0, "they guessed wrong."));
    const WordIndex lemma_index = word_index(c2, true);
    CHECK(lemma_index.at("guess") == std::vector<std::size_t>{0, 2});
  }
}

TEST_CASE("word_index equals a naive per-record scan on a synthetic corpus") {
  const Corpus corpus = testsupport::random_corpus(50, 0.5, 13);
  for (bool lemma : {false, true}) {
    const WordIndex index = word_index(corpus, lemma);
    const auto naive = naive_index(corpus, lemma);
    REQUIRE(index.size() == naive.size());
    for (const auto& [token, records] : naive) {
      REQUIRE(index.count(token) == 1);
      const auto& postings = index.at(token);
      CHECK(std::set<std::size_t>(postings.begin(), postings.end()) == records);
    }
  }
}

TEST_CASE("relative_accuracy hand computation") {
  // token in 4 records (3 correct), corpus of 10 records (5 correct) -> 1.5
  Corpus corpus;
  for (int i = 0; i < 10; ++i) {
    const bool has_token = i < 4;
    const int grade = (i < 3 || i == 4 || i == 5) ? 1 : 0;  // 3 correct with token, 2 without
    corpus.records.push_back(make_record("r" + std::to_string(i), grade,
                                         has_token ? "special word here." : "plain words here."));
  }
  const WordIndex index = word_index(corpus, false);
  CHECK(relative_accuracy("special", corpus, index) == doctest::Approx(1.5));

  SUBCASE("token present in every record gives exactly 1") {
    CHECK(relative_accuracy("here", corpus, index) == doctest::Approx(1.0));
  }
  SUBCASE("unknown token is an error") {
    CHECK_THROWS_AS(relative_accuracy("zebra", corpus, index), DataError);
  }
  SUBCASE("zero dataset accuracy is an error") {
    Corpus all_wrong;
    all_wrong.records.push_back(make_record("a", 0, "word."));
    all_wrong.records.push_back(make_record("b", 0, "word."));
    const WordIndex idx = word_index(all_wrong, false);
    CHECK_THROWS_AS(relative_accuracy("word", all_wrong, idx), DataError);
  }
}

TEST_CASE("token appearing only in incorrect records has relative accuracy zero") {
  Corpus corpus;
  for (int i = 0; i < 10; ++i) {
    corpus.records.push_back(make_record("r" + std::to_string(i), i < 5 ? 1 : 0,
                                         i >= 5 ? "doom and more." : "fine and more."));
  }
  const WordIndex index = word_index(corpus, false);
  CHECK(relative_accuracy("doom", corpus, index) == doctest::Approx(0.0));
}

TEST_CASE("relative_accuracy agrees with the naive scan on a 200-record corpus") {
  const Corpus corpus = testsupport::random_corpus(200, 0.45, 77);
  const WordIndex index = word_index(corpus, false);
  for (const auto& token : testsupport::filler_vocab()) {
    if (!index.count(token)) continue;
    CHECK(relative_accuracy(token, corpus, index) ==
          doctest::Approx(naive_relative_accuracy(token, corpus, false)).epsilon(1e-12));
  }
}

TEST_CASE("bootstrap_ci determinism and degenerate subset") {
  Corpus corpus;
  for (int i = 0; i < 20; ++i) {
    corpus.records.push_back(
        make_record("r" + std::to_string(i), i < 10 ? 1 : 0, i < 6 ? "token text." : "other text."));
  }
  const WordIndex index = word_index(corpus, false);

  SUBCASE("same seed gives the identical interval") {
    // "other" spans both grades, so the resampled statistic actually varies
    const auto a = bootstrap_ci("other", corpus, index, 500, 0.95, 42);
    const auto b = bootstrap_ci("other", corpus, index, 500, 0.95, 42);
    CHECK(a == b);
    CHECK(a.first <= a.second);
    CHECK(a.first >= 0.0);
    CHECK(a.first < a.second);  // mixed grades leave real resampling variance
  }
  SUBCASE("all-correct subset collapses the interval") {
    // "token" appears only in records 0..5, all correct; dataset accuracy 0.5
    const auto [lo, hi] = bootstrap_ci("token", corpus, index, 300, 0.95, 1);
    CHECK(lo == doctest::Approx(2.0));
    CHECK(hi == doctest::Approx(2.0));
  }
  SUBCASE("fewer than two containing records is an error") {
    Corpus tiny;
    tiny.records.push_back(make_record("a", 1, "unique word."));
    tiny.records.push_back(make_record("b", 0, "plain text."));
    const WordIndex idx = word_index(tiny, false);
    CHECK_THROWS_AS(bootstrap_ci("unique", tiny, idx, 100, 0.95, 0), DataError);
  }
}

TEST_CASE("bootstrap_ci coverage on a seeded Monte-Carlo ensemble") {
  // 200 seeded trials; the interval must bracket the analytic ratio
  // (true subset accuracy over the realized dataset accuracy) at least 93%
  // of the time for a 95% interval.
  const double p_with = 0.6, p_without = 0.5;
  Rng gen(4242);
  int covered = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    Corpus corpus;
    for (int i = 0; i < 400; ++i) {
      const bool with_token = i < 200;
      const double p = with_token ? p_with : p_without;
      corpus.records.push_back(make_record("r" + std::to_string(i),
                                           gen.bernoulli(p) ? 1 : 0,
                                           with_token ? "marker text." : "plain text."));
    }
    const WordIndex index = word_index(corpus, false);
    const auto [lo, hi] =
        bootstrap_ci("marker", corpus, index, 1000, 0.95, 1000 + static_cast<std::uint64_t>(trial));
    const double truth = p_with / corpus.accuracy();
    if (truth >= lo && truth <= hi) ++covered;
  }
  CHECK(covered >= static_cast<int>(0.93 * trials));
}

TEST_CASE("build_lexicon enforces the occurrence threshold in every set") {
  // token "rare" appears in 2 records of set A and many of set B
  Corpus a, b;
  for (int i = 0; i < 30; ++i) {
    a.records.push_back(make_record("a" + std::to_string(i), i % 2,
                                    i < 2 ? "rare shared stuff." : "shared stuff."));
    b.records.push_back(make_record("b" + std::to_string(i), i % 2, "rare shared stuff."));
  }
  LexiconConfig cfg;
  cfg.min_occurrences = 3;
  cfg.bootstrap_resamples = 50;
  const auto entries = build_lexicon({{"a", &a}, {"b", &b}}, cfg);
  std::set<std::string> tokens;
  for (const auto& e : entries) tokens.insert(e.token);
  CHECK(tokens.count("shared") == 1);
  CHECK(tokens.count("stuff") == 1);
  CHECK(tokens.count("rare") == 0);  // below threshold in set a

  SUBCASE("per-entry invariant: relative x dataset = subset accuracy") {
    for (const auto& entry : entries) {
      double mean = 0.0;
      for (const auto& [set_id, stats] : entry.per_set) {
        (void)set_id;
        CHECK(stats.relative_accuracy * stats.dataset_accuracy ==
              doctest::Approx(stats.subset_accuracy).epsilon(1e-12));
        CHECK(stats.occurrences >= cfg.min_occurrences);
        mean += stats.relative_accuracy;
      }
      CHECK(entry.mean_relative_accuracy ==
            doctest::Approx(mean / static_cast<double>(entry.per_set.size())));
    }
  }

  SUBCASE("raising the threshold never adds entries") {
    LexiconConfig stricter = cfg;
    stricter.min_occurrences = 10;
    const auto fewer = build_lexicon({{"a", &a}, {"b", &b}}, stricter);
    std::set<std::string> fewer_tokens;
    for (const auto& e : fewer) fewer_tokens.insert(e.token);
    for (const auto& t : fewer_tokens) CHECK(tokens.count(t) == 1);
    CHECK(fewer_tokens.size() <= tokens.size());
  }
}

TEST_CASE("build_lexicon with threshold 1 equals brute-force enumeration") {
  const Corpus a = testsupport::random_corpus(40, 0.5, 301);
  const Corpus b = testsupport::random_corpus(40, 0.6, 302);
  LexiconConfig cfg;
  cfg.min_occurrences = 1;
  cfg.bootstrap_resamples = 0;
  const auto entries = build_lexicon({{"a", &a}, {"b", &b}}, cfg);

  const auto index_a = naive_index(a, false);
  const auto index_b = naive_index(b, false);
  std::set<std::string> expected;
  for (const auto& [token, recs] : index_a) {
    if (index_b.count(token)) expected.insert(token);
  }
  std::set<std::string> got;
  for (const auto& e : entries) got.insert(e.token);
  CHECK(got == expected);

  for (const auto& entry : entries) {
    CHECK(entry.per_set[0].second.relative_accuracy ==
          doctest::Approx(naive_relative_accuracy(entry.token, a, false)));
    CHECK(entry.per_set[1].second.relative_accuracy ==
          doctest::Approx(naive_relative_accuracy(entry.token, b, false)));
  }
}

TEST_CASE("build_lexicon is thread-count invariant") {
  const Corpus a = testsupport::random_corpus(60, 0.5, 401);
  const Corpus b = testsupport::random_corpus(60, 0.5, 402);
  LexiconConfig cfg;
  cfg.min_occurrences = 2;
  cfg.bootstrap_resamples = 200;
  cfg.threads = 1;
  const auto serial = build_lexicon({{"a", &a}, {"b", &b}}, cfg);
  cfg.threads = 4;
  const auto parallel = build_lexicon({{"a", &a}, {"b", &b}}, cfg);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].token == parallel[i].token);
    for (std::size_t s = 0; s < serial[i].per_set.size(); ++s) {
      CHECK(serial[i].per_set[s].second.ci_low == parallel[i].per_set[s].second.ci_low);
      CHECK(serial[i].per_set[s].second.ci_high == parallel[i].per_set[s].second.ci_high);
    }
  }
}

TEST_CASE("select_consistent on a planted-signal corpus") {
  const std::vector<std::string> planted = {"alphaz", "betaz", "gammaz", "deltaz", "omegaz"};
  const Corpus corpus = testsupport::planted_corpus(600, 0.5, planted, 0.7, 0.05, 55);
  LexiconConfig cfg;
  cfg.min_occurrences = 20;
  cfg.bootstrap_resamples = 0;
  const auto entries = build_lexicon({{"synth", &corpus}}, cfg);
  REQUIRE(!entries.empty());

  const auto harmful = select_consistent(entries, WordDirection::harmful, 5);
  CHECK(std::set<std::string>(harmful.begin(), harmful.end()) ==
        std::set<std::string>(planted.begin(), planted.end()));

  SUBCASE("selection equals an exhaustive check of the per-set inequalities") {
    std::vector<std::pair<double, std::string>> expected;
    for (const auto& e : entries) {
      bool all_below = true;
      for (const auto& [id, stats] : e.per_set) {
        (void)id;
        if (stats.relative_accuracy >= 1.0) all_below = false;
      }
      if (all_below) expected.emplace_back(e.mean_relative_accuracy, e.token);
    }
    std::sort(expected.begin(), expected.end());
    const auto all_harmful = select_consistent(entries, WordDirection::harmful, entries.size());
    REQUIRE(all_harmful.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) {
      CHECK(all_harmful[i] == expected[i].second);
    }
  }

  SUBCASE("harmful and booster selections are disjoint") {
    const auto boosters = select_consistent(entries, WordDirection::booster, entries.size());
    const auto harmful_all = select_consistent(entries, WordDirection::harmful, entries.size());
    for (const auto& b : boosters) {
      CHECK(std::find(harmful_all.begin(), harmful_all.end(), b) == harmful_all.end());
    }
  }

  SUBCASE("top_k zero is an error") {
    CHECK_THROWS_AS(select_consistent(entries, WordDirection::harmful, 0), DataError);
  }
}

TEST_CASE("select_consistent returns nothing when every entry crosses 1 somewhere") {
  Corpus a;
  for (int i = 0; i < 8; ++i) {
    a.records.push_back(make_record("r" + std::to_string(i), i % 2, "same words."));
  }
  LexiconConfig cfg;
  cfg.min_occurrences = 1;
  cfg.bootstrap_resamples = 0;
  const auto entries = build_lexicon({{"a", &a}}, cfg);
  // every token appears everywhere, so relative accuracy is exactly 1
  CHECK(select_consistent(entries, WordDirection::harmful, 10).empty());
  CHECK(select_consistent(entries, WordDirection::booster, 10).empty());
}

TEST_CASE("lexicon CSV export shape") {
  Corpus a;
  for (int i = 0; i < 6; ++i) {
    a.records.push_back(make_record("r" + std::to_string(i), i % 2, "alpha beta."));
  }
  LexiconConfig cfg;
  cfg.min_occurrences = 1;
  cfg.bootstrap_resamples = 10;
  const auto entries = build_lexicon({{"s1", &a}}, cfg);
  std::ostringstream out;
  export_lexicon_csv(entries, out);
  const std::string csv = out.str();
  CHECK(csv.rfind("token,set_id,occurrences,subset_accuracy,dataset_accuracy,"
                  "relative_accuracy,ci_low,ci_high,mean_relative_accuracy\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + static_cast<long>(entries.size()));
}
