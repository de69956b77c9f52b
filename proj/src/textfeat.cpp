#include "cotcheck/textfeat.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cotcheck {
namespace {

inline bool is_alpha(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

inline char lower(char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Surface forms the suffix rules cannot reach, seeded from irregular English
// inflections plus the surface/lemma pairs visible in the lexicon exports.
const std::unordered_map<std::string, std::string>& lemma_exceptions() {
  static const std::unordered_map<std::string, std::string> table = {
      {"goes", "go"},      {"does", "do"},      {"did", "do"},
      {"done", "do"},      {"doing", "do"},     {"being", "be"},
      {"been", "be"},      {"was", "be"},       {"were", "be"},
      {"are", "be"},       {"is", "be"},        {"am", "be"},
      {"has", "have"},     {"had", "have"},     {"having", "have"},
      {"going", "go"},     {"went", "go"},      {"gone", "go"},
      {"seeing", "see"},   {"saw", "see"},      {"seen", "see"},
      {"using", "use"},    {"used", "use"},     {"uses", "use"},
      {"gave", "give"},    {"given", "give"},   {"giving", "give"},
      {"took", "take"},    {"taken", "take"},   {"taking", "take"},
      {"made", "make"},    {"making", "make"},
      {"found", "find"},   {"finding", "find"},
      {"got", "get"},      {"getting", "get"},
      {"came", "come"},    {"coming", "come"},
      {"said", "say"},     {"saying", "say"},
      {"knew", "know"},    {"known", "know"},   {"knowing", "know"},
      {"thought", "think"},{"thinking", "think"},
      {"led", "lead"},     {"leading", "lead"},
      {"created", "create"},   {"creates", "create"},   {"creating", "create"},
      {"assumed", "assume"},   {"assuming", "assume"},
      {"focused", "focus"},    {"focuses", "focus"},    {"focusing", "focus"},
      {"dying", "die"},        {"tying", "tie"},        {"lying", "lie"},
      {"ties", "tie"},         {"dies", "die"},         {"lies", "lie"},
      {"writing", "write"},    {"written", "write"},    {"wrote", "write"},
      {"proceeding", "proceed"},
      {"added", "add"},        {"adding", "add"},
      {"required", "require"}, {"requiring", "require"},
      {"compared", "compare"}, {"comparing", "compare"},
      {"agreed", "agree"},     {"freed", "free"},       {"guaranteed", "guarantee"},
      // adverbs and other -s/-ing lookalikes that must pass through unchanged
      {"always", "always"},    {"perhaps", "perhaps"},  {"sometimes", "sometimes"},
      {"besides", "besides"},  {"towards", "towards"},  {"afterwards", "afterwards"},
      {"series", "series"},    {"during", "during"},
      {"something", "something"}, {"anything", "anything"},
      {"nothing", "nothing"},  {"everything", "everything"},
  };
  return table;
}

// After stripping -ed/-ing: undouble trailing consonants (ll/ss/ff/zz are
// legitimate word endings and stay) and restore the silent e where the
// orthography makes it recoverable.
std::string fix_stripped_stem(std::string stem) {
  const std::size_t n = stem.size();
  if (n >= 2 && stem[n - 1] == stem[n - 2]) {
    const char c = stem[n - 1];
    if (!is_vowel(c) && c != 'l' && c != 's' && c != 'f' && c != 'z') {
      stem.pop_back();
      return stem;
    }
  }
  // Endings that recover a silent e: solv->solve, notic->notice,
  // continu->continue, bas->base, clos->close, confus->confuse,
  // rais->raise, realiz->realize.
  static const std::array<std::string_view, 8> restore = {
      "v", "c", "u", "as", "os", "us", "is", "iz"};
  for (auto suffix : restore) {
    if (ends_with(stem, suffix) && stem.size() > suffix.size()) {
      stem.push_back('e');
      return stem;
    }
  }
  // consonant + "at" / consonant + "bl": relat->relate, doubl->double;
  // vowel + "at" stays (repeat, float).
  if (stem.size() >= 3) {
    const char prev = stem[stem.size() - 3];
    if ((ends_with(stem, "at") || ends_with(stem, "bl") || ends_with(stem, "pl")) && !is_vowel(prev)) {
      stem.push_back('e');
    }
  }
  return stem;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_alpha(c)) {
      current.push_back(lower(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::string current;

  auto flush = [&]() {
    // trim surrounding whitespace
    std::size_t b = current.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
      current.clear();
      return;
    }
    std::size_t e = current.find_last_not_of(" \t\r\n");
    sentences.push_back(current.substr(b, e - b + 1));
    current.clear();
  };

  const std::size_t n = text.size();
  for (std::size_t i = 0; i < n; ++i) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      const bool at_end = (i + 1 == n);
      const char next = at_end ? '\0' : text[i + 1];
      if (at_end || next == ' ' || next == '\t' || next == '\n' || next == '\r') {
        current.push_back(c);
        flush();
        continue;
      }
      current.push_back(c);
      continue;
    }
    if (c == '\n') {
      // A blank line (newline, optional spaces, newline) is a boundary.
      std::size_t j = i + 1;
      while (j < n && (text[j] == ' ' || text[j] == '\t' || text[j] == '\r')) ++j;
      if (j < n && text[j] == '\n') {
        flush();
        i = j;
        continue;
      }
    }
    current.push_back(c);
  }
  flush();
  return sentences;
}

std::string lemmatize(std::string_view token) {
  std::string word(token);
  const auto& exceptions = lemma_exceptions();
  if (auto it = exceptions.find(word); it != exceptions.end()) return it->second;
  const std::size_t n = word.size();
  if (n < 4) return word;

  // plural / third-person -s
  if (word.back() == 's') {
    if (ends_with(word, "ss") || ends_with(word, "us") || ends_with(word, "is")) return word;
    if (ends_with(word, "ies") && n >= 5) {
      word.erase(n - 3);
      word.push_back('y');
      return word;
    }
    if ((ends_with(word, "shes") || ends_with(word, "ches") || ends_with(word, "xes") ||
         ends_with(word, "zes") || ends_with(word, "sses")) && n >= 5) {
      word.erase(word.size() - 2);
      return word;
    }
    word.pop_back();
    return word;
  }

  if (ends_with(word, "ed")) {
    if (ends_with(word, "ied") && n >= 5) {
      word.erase(n - 3);
      word.push_back('y');
      return word;
    }
    // "eed" words (need, proceed, exceed) are not -ed inflections; the few
    // genuine ones (agreed, freed) live in the exception table.
    if (ends_with(word, "eed")) return word;
    std::string stem = word.substr(0, n - 2);
    if (stem.size() < 3) return word;
    bool has_vowel = std::any_of(stem.begin(), stem.end(), [](char c) { return is_vowel(c) || c == 'y'; });
    if (!has_vowel) return word;
    return fix_stripped_stem(std::move(stem));
  }

  if (n >= 5 && ends_with(word, "ing")) {
    std::string stem = word.substr(0, n - 3);
    if (stem.size() < 3) return word;
    bool has_vowel = std::any_of(stem.begin(), stem.end(), [](char c) { return is_vowel(c) || c == 'y'; });
    if (!has_vowel) return word;
    return fix_stripped_stem(std::move(stem));
  }

  return word;
}

std::size_t cot_length(std::string_view cot) { return tokenize(cot).size(); }

double volatility(const SentimentTriple& s) {
  return static_cast<double>(s.direction) * (s.most_positive - s.most_negative);
}

const HedgingLexicon& HedgingLexicon::default_lexicon() {
  static const HedgingLexicon lexicon = [] {
    HedgingLexicon lex;
    lex.single_words = {
        // modal and uncertainty verbs
        "might", "may", "could", "should", "would", "seems", "suggests", "appears",
        // uncertainty adverbs
        "possibly", "perhaps", "likely", "unlikely", "probably", "generally",
        "usually", "sometimes", "often", "tends", "somewhat", "rather", "quite",
        "almost", "nearly", "virtually", "presumably", "arguably", "relatively",
        "fairly", "reasonably", "mostly", "partially", "mainly", "primarily",
        "essentially", "basically"};
    const char* phrases[] = {"it seems that", "it appears that", "it suggests that",
                             "it is possible that", "it is likely that",
                             "in part", "to some extent"};
    for (const char* p : phrases) lex.phrases.push_back(tokenize(p));
    return lex;
  }();
  return lexicon;
}

HedgingLexicon HedgingLexicon::from_lines(const std::vector<std::string>& lines) {
  HedgingLexicon lex;
  for (const auto& line : lines) {
    auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    if (tokens.size() == 1) {
      lex.single_words.push_back(std::move(tokens.front()));
    } else {
      lex.phrases.push_back(std::move(tokens));
    }
  }
  return lex;
}

HedgingLexicon HedgingLexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open hedging lexicon file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return from_lines(lines);
}

namespace {

bool contains_subsequence(const std::vector<std::string>& tokens,
                          const std::vector<std::string>& phrase) {
  if (phrase.empty() || phrase.size() > tokens.size()) return false;
  for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < phrase.size(); ++j) {
      if (tokens[i + j] != phrase[j]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace

double hedging_rate(std::string_view cot, const HedgingLexicon& lexicon) {
  const auto sentences = split_sentences(cot);
  if (sentences.empty()) throw DataError("hedging_rate: text has no sentences");

  const std::unordered_set<std::string> singles(lexicon.single_words.begin(),
                                                lexicon.single_words.end());
  std::size_t hedged = 0;
  for (const auto& sentence : sentences) {
    const auto tokens = tokenize(sentence);
    bool hit = false;
    for (const auto& token : tokens) {
      if (singles.count(token)) {
        hit = true;
        break;
      }
    }
    if (!hit) {
      for (const auto& phrase : lexicon.phrases) {
        if (contains_subsequence(tokens, phrase)) {
          hit = true;
          break;
        }
      }
    }
    if (hit) ++hedged;
  }
  return static_cast<double>(hedged) / static_cast<double>(sentences.size());
}

std::vector<double> FeatureVector::to_row(const FeatureConfig& config) const {
  std::vector<double> row;
  row.reserve(word_flags.size() + 3);
  for (const auto& [token, flag] : word_flags) {
    (void)token;
    row.push_back(static_cast<double>(flag));
  }
  if (config.use_length) row.push_back(static_cast<double>(length_words));
  if (config.use_volatility) row.push_back(volatility.value_or(0.0));
  if (config.use_hedging) row.push_back(hedging_rate);
  return row;
}

FeatureVector featurize(const CotRecord& record, const FeatureConfig& config,
                        const HedgingLexicon& lexicon) {
  FeatureVector fv;
  const auto tokens = tokenize(record.cot);
  fv.length_words = tokens.size();
  if (config.use_hedging) fv.hedging_rate = cotcheck::hedging_rate(record.cot, lexicon);
  if (config.use_volatility) {
    if (!record.sentiment) {
      throw DataError("record " + record.record_id +
                      ": volatility feature requested but sentiment is missing");
    }
    fv.volatility = cotcheck::volatility(*record.sentiment);
  }
  if (!config.word_list.empty()) {
    std::unordered_map<std::string, int> counts;
    for (const auto& token : tokens) ++counts[token];
    fv.word_flags.reserve(config.word_list.size());
    for (const auto& word : config.word_list) {
      auto it = counts.find(word);
      const int c = (it == counts.end()) ? 0 : it->second;
      fv.word_flags.emplace_back(word, config.word_counts ? c : (c > 0 ? 1 : 0));
    }
  }
  return fv;
}

std::size_t feature_dim(const FeatureConfig& config) {
  return config.word_list.size() + (config.use_length ? 1 : 0) +
         (config.use_volatility ? 1 : 0) + (config.use_hedging ? 1 : 0);
}

std::vector<std::string> feature_names(const FeatureConfig& config) {
  std::vector<std::string> names;
  for (const auto& w : config.word_list) names.push_back("word:" + w);
  if (config.use_length) names.push_back("length_words");
  if (config.use_volatility) names.push_back("volatility");
  if (config.use_hedging) names.push_back("hedging_rate");
  return names;
}

}  // namespace cotcheck
