#pragma once

#include "cotcheck/corpus.hpp"

#include <string>
#include <vector>

namespace cotcheck {

// Thrown when an evaluator response cannot be turned into a SentimentTriple;
// carries the raw response text.
class SentimentParseError : public DataError {
public:
  SentimentParseError(const std::string& message, std::string raw)
      : DataError(message + "\n--- raw response ---\n" + raw), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

private:
  std::string raw_;
};

// The evaluator instruction wrapped around the CoT; always ends with the
// three trailer labels the parser expects.
std::string build_sentiment_prompt(const std::string& cot);

// The canonical trailer for a triple; parse_sentiment_response inverts it.
std::string format_sentiment_trailer(const SentimentTriple& triple);

// Extracts the last occurrence of each trailer label, validates ranges and
// the direction domain, and enforces most_positive >= most_negative.
SentimentTriple parse_sentiment_response(const std::string& text);

struct EndpointConfig {
  std::string base_url;                       // e.g. https://api.example.com
  std::string path = "/v1/chat/completions";
  std::string model = "o3-mini";
  std::string api_key_env = "SENTIMENT_API_KEY";
  int timeout_seconds = 60;
};

struct ScoreOptions {
  EndpointConfig endpoint;
  std::string offline_path;   // precomputed triples, JSONL keyed by record_id
  std::string cache_path;     // append-only JSONL cache; written through
  bool offline_only = true;   // no network unless explicitly enabled
  int concurrency = 4;
  int max_retries = 3;
  int backoff_initial_ms = 500;
  int parse_reasks = 1;
};

struct ScoreStats {
  std::size_t already_present = 0;
  std::size_t from_cache = 0;
  std::size_t from_offline = 0;
  std::size_t scored_live = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // (record_id, reason)
};

struct ScoreResult {
  Corpus corpus;  // input records with sentiment attached where available
  ScoreStats stats;
};

// Attaches a SentimentTriple to every record it can, consulting (in order)
// the record itself, the cache, the offline file, and finally the live
// endpoint when offline_only is false. Newly scored triples are appended to
// the cache so the operation is resumable.
ScoreResult score_corpus(const Corpus& corpus, const ScoreOptions& options);

// JSONL helpers shared by the cache and offline files: one object per line
// with record_id, most_positive, most_negative, direction.
std::vector<std::pair<std::string, SentimentTriple>> load_sentiment_file(const std::string& path);
void append_sentiment_line(const std::string& path, const std::string& record_id,
                           const SentimentTriple& triple);

}  // namespace cotcheck
