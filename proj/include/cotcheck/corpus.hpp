#pragma once

#include <chrono>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cotcheck {

// Thrown for malformed or inconsistent input data.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Grade : int { incorrect = 0, correct = 1 };

inline int grade_value(Grade g) { return static_cast<int>(g); }

// Sentiment summary of one chain of thought as produced by the external
// evaluator: the most positive and most negative scores (both in [-1, 1])
// and the order in which the extremes appear (+1 negative-then-positive,
// -1 positive-then-negative, 0 neutral throughout).
struct SentimentTriple {
  double most_positive = 0.0;
  double most_negative = 0.0;
  int direction = 0;
};

// One graded model response: the chain of thought, the final answer, the
// self-reported confidence, and the grade(s) attached to it.
struct CotRecord {
  std::string record_id;
  std::string benchmark;
  std::string model;
  std::optional<std::string> question;
  std::string cot;
  std::string final_answer;
  double confidence_pct = 0.0;
  Grade grade = Grade::incorrect;
  std::optional<Grade> grade_human;
  std::optional<Grade> grade_auto;
  std::optional<SentimentTriple> sentiment;
  std::optional<std::string> category;
  std::optional<std::string> tier;
};

struct Provenance {
  std::string source_path;
  std::chrono::system_clock::time_point loaded_at{};
};

struct Corpus {
  std::vector<CotRecord> records;
  Provenance provenance;

  std::size_t size() const { return records.size(); }

  // Fraction of records graded correct. Throws DataError on an empty corpus.
  double accuracy() const;
};

struct LoadResult {
  Corpus corpus;
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::vector<std::string> skip_reasons;  // one entry per skipped line
};

// Reads a line-delimited JSON corpus. In strict mode the first malformed
// line aborts the load; otherwise malformed lines are skipped and the reason
// recorded. A line is malformed if it is not valid JSON, misses a required
// field, violates a record invariant, repeats a record_id, or carries dual
// grades that disagree while no explicit grade is given.
LoadResult load_corpus(const std::string& path, bool strict = false);

// Parses one JSONL line into a record. Throws DataError on any violation.
CotRecord parse_record_line(const std::string& line);

// Serializes a single record / a whole corpus back to the JSONL schema.
std::string record_to_jsonl(const CotRecord& record);
void save_corpus(const Corpus& corpus, const std::string& path);

struct AgreementResult {
  Corpus corpus;
  double agreement_rate = 0.0;  // matches / total
};

// Keeps only records whose human and automatic grades agree. Every record
// must carry both grades; a missing grade is an error naming the record.
AgreementResult filter_agreement(const Corpus& corpus);

enum class GroupKey { category, tier, benchmark, model };

GroupKey group_key_from_string(const std::string& name);
std::string to_string(GroupKey key);

struct GroupAccuracy {
  std::string group;
  double accuracy = 0.0;
  std::size_t count = 0;
};

// Per-group mean accuracy with group sizes, sorted by accuracy descending
// (ties broken by group name). The key field must be populated on every
// record.
std::vector<GroupAccuracy> group_accuracy(const Corpus& corpus, GroupKey key);

}  // namespace cotcheck
