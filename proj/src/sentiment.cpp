#include "cotcheck/sentiment.hpp"

#include "cotcheck/format.hpp"

#include <nlohmann/json.hpp>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace cotcheck {
namespace {

using json = nlohmann::json;

constexpr const char* kPositiveLabel = "Most positive emotion Score:";
constexpr const char* kNegativeLabel = "Most negative emotion Score:";
constexpr const char* kDirectionLabel = "Direction:";

constexpr const char* kInstruction =
    "Judge how emotional this text is by reporting on its most positive emotion "
    "and its most negative emotion on a scale from -1 (negative) to 1 (positive), "
    "and the order in which they appear, i.e. direction in which they appear, if "
    "the most negative emotion appears before the most positive emotion the "
    "direction is upward so, 1, if inverse is true the direction is -1 if the "
    "text is completely neutral and no gradient exists present between the two "
    "emotional extremes the direction is 0, picking up on small effects.";

std::size_t find_last_ci(const std::string& haystack, const std::string& needle) {
  if (needle.empty() || haystack.size() < needle.size()) return std::string::npos;
  auto eq = [](char a, char b) {
    return std::tolower(static_cast<unsigned char>(a)) ==
           std::tolower(static_cast<unsigned char>(b));
  };
  for (std::size_t i = haystack.size() - needle.size() + 1; i-- > 0;) {
    if (std::equal(needle.begin(), needle.end(), haystack.begin() + static_cast<long>(i), eq)) {
      return i;
    }
  }
  return std::string::npos;
}

double parse_number_after(const std::string& text, const std::string& label) {
  const std::size_t pos = find_last_ci(text, label);
  if (pos == std::string::npos) {
    throw SentimentParseError("missing label \"" + label + "\"", text);
  }
  const char* start = text.c_str() + pos + label.size();
  char* end = nullptr;
  const double value = std::strtod(start, &end);
  if (end == start) {
    throw SentimentParseError("no numeric value after \"" + label + "\"", text);
  }
  return value;
}

// Minimal chat-completion body; if the response is not in that shape the raw
// body itself is treated as the evaluator text.
std::string extract_content(const std::string& body) {
  try {
    const json payload = json::parse(body);
    if (payload.contains("choices") && payload["choices"].is_array() &&
        !payload["choices"].empty()) {
      const auto& choice = payload["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content")) {
        return choice["message"]["content"].get<std::string>();
      }
      if (choice.contains("text")) return choice["text"].get<std::string>();
    }
  } catch (const json::exception&) {
  }
  return body;
}

class LiveClient {
public:
  explicit LiveClient(const EndpointConfig& config) : config_(config) {
    if (config_.base_url.empty()) {
      throw DataError("sentiment endpoint base_url is not configured");
    }
    if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
  }

  std::string complete(const std::string& prompt) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    json body;
    body["model"] = config_.model;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt}}});
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    if (!res) {
      throw DataError("sentiment endpoint unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw DataError("sentiment endpoint returned HTTP " + std::to_string(res->status));
    }
    return extract_content(res->body);
  }

private:
  EndpointConfig config_;
  std::string api_key_;
};

}  // namespace

std::string build_sentiment_prompt(const std::string& cot) {
  if (cot.empty()) throw DataError("build_sentiment_prompt: empty CoT");
  std::string prompt;
  prompt.reserve(cot.size() + 700);
  prompt += kInstruction;
  prompt += "\n\n";
  prompt += cot;
  prompt += "\n\nAlways end your response with:\n\n";
  prompt += kPositiveLabel;
  prompt += " ...\n";
  prompt += kNegativeLabel;
  prompt += " ...\n";
  prompt += kDirectionLabel;
  prompt += " ...";
  return prompt;
}

std::string format_sentiment_trailer(const SentimentTriple& triple) {
  std::string out;
  out += kPositiveLabel;
  out += ' ';
  out += format_double(triple.most_positive);
  out += '\n';
  out += kNegativeLabel;
  out += ' ';
  out += format_double(triple.most_negative);
  out += '\n';
  out += kDirectionLabel;
  out += ' ';
  out += std::to_string(triple.direction);
  return out;
}

SentimentTriple parse_sentiment_response(const std::string& text) {
  SentimentTriple triple;
  triple.most_positive = parse_number_after(text, kPositiveLabel);
  triple.most_negative = parse_number_after(text, kNegativeLabel);
  const double direction = parse_number_after(text, kDirectionLabel);
  if (direction != -1.0 && direction != 0.0 && direction != 1.0) {
    throw SentimentParseError("direction must be -1, 0 or 1, got " + format_double(direction),
                              text);
  }
  triple.direction = static_cast<int>(direction);
  if (triple.most_positive < -1.0 || triple.most_positive > 1.0 ||
      triple.most_negative < -1.0 || triple.most_negative > 1.0) {
    throw SentimentParseError("sentiment scores must lie in [-1, 1]", text);
  }
  if (triple.most_positive < triple.most_negative) {
    throw SentimentParseError("most positive score is below most negative score", text);
  }
  return triple;
}

std::vector<std::pair<std::string, SentimentTriple>> load_sentiment_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open sentiment file: " + path);
  std::vector<std::pair<std::string, SentimentTriple>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json obj = json::parse(line);
      SentimentTriple t;
      t.most_positive = obj.at("most_positive").get<double>();
      t.most_negative = obj.at("most_negative").get<double>();
      t.direction = obj.at("direction").get<int>();
      out.emplace_back(obj.at("record_id").get<std::string>(), t);
    } catch (const json::exception& ex) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

void append_sentiment_line(const std::string& path, const std::string& record_id,
                           const SentimentTriple& triple) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to sentiment cache: " + path);
  json obj;
  obj["record_id"] = record_id;
  obj["most_positive"] = triple.most_positive;
  obj["most_negative"] = triple.most_negative;
  obj["direction"] = triple.direction;
  out << obj.dump() << '\n';
}

ScoreResult score_corpus(const Corpus& corpus, const ScoreOptions& options) {
  ScoreResult result;
  result.corpus = corpus;

  std::unordered_map<std::string, SentimentTriple> known;
  std::unordered_set<std::string> cached_ids;
  if (!options.cache_path.empty()) {
    if (std::ifstream probe(options.cache_path); probe.good()) {
      for (auto& [id, triple] : load_sentiment_file(options.cache_path)) {
        cached_ids.insert(id);
        known.emplace(std::move(id), triple);
      }
    }
  }
  if (!options.offline_path.empty()) {
    for (auto& [id, triple] : load_sentiment_file(options.offline_path)) {
      known.emplace(std::move(id), triple);
    }
  }

  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < result.corpus.records.size(); ++i) {
    auto& rec = result.corpus.records[i];
    if (rec.sentiment) {
      ++result.stats.already_present;
      continue;
    }
    auto it = known.find(rec.record_id);
    if (it != known.end()) {
      rec.sentiment = it->second;
      cached_ids.count(rec.record_id) ? ++result.stats.from_cache
                                      : ++result.stats.from_offline;
      continue;
    }
    pending.push_back(i);
  }

  if (pending.empty()) return result;

  if (options.offline_only) {
    for (std::size_t i : pending) {
      result.stats.failures.emplace_back(result.corpus.records[i].record_id,
                                         "no precomputed sentiment and live scoring disabled");
    }
    return result;
  }

  LiveClient client(options.endpoint);
  std::mutex io_mutex;
  std::atomic<std::size_t> next{0};

  auto score_one = [&](std::size_t rec_idx) {
    auto& rec = result.corpus.records[rec_idx];
    const std::string prompt = build_sentiment_prompt(rec.cot);
    std::string failure;
    int parse_budget = 1 + std::max(0, options.parse_reasks);
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      if (attempt > 0) {
        const auto delay = std::chrono::milliseconds(
            static_cast<long long>(options.backoff_initial_ms) * (1LL << (attempt - 1)));
        std::this_thread::sleep_for(delay);
      }
      try {
        const std::string content = client.complete(prompt);
        try {
          const SentimentTriple triple = parse_sentiment_response(content);
          std::lock_guard<std::mutex> lock(io_mutex);
          rec.sentiment = triple;
          ++result.stats.scored_live;
          if (!options.cache_path.empty()) {
            append_sentiment_line(options.cache_path, rec.record_id, triple);
          }
          return;
        } catch (const SentimentParseError& ex) {
          failure = ex.what();
          if (--parse_budget <= 0) break;
        }
      } catch (const DataError& ex) {
        failure = ex.what();
      }
    }
    std::lock_guard<std::mutex> lock(io_mutex);
    result.stats.failures.emplace_back(rec.record_id, failure);
  };

  const int workers = std::clamp(options.concurrency, 1,
                                 static_cast<int>(std::max<std::size_t>(1, pending.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (std::size_t k = next.fetch_add(1); k < pending.size(); k = next.fetch_add(1)) {
        score_one(pending[k]);
      }
    });
  }
  for (auto& t : pool) t.join();

  std::sort(result.stats.failures.begin(), result.stats.failures.end());
  return result;
}

}  // namespace cotcheck
