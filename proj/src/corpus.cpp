#include "cotcheck/corpus.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <unordered_set>

namespace cotcheck {
namespace {

using json = nlohmann::json;

Grade parse_grade(const json& value, const char* field) {
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    if (s == "correct") return Grade::correct;
    if (s == "incorrect") return Grade::incorrect;
    throw DataError(std::string(field) + " must be \"correct\" or \"incorrect\", got \"" + s + "\"");
  }
  if (value.is_boolean()) return value.get<bool>() ? Grade::correct : Grade::incorrect;
  if (value.is_number_integer()) {
    const auto v = value.get<long long>();
    if (v == 0) return Grade::incorrect;
    if (v == 1) return Grade::correct;
  }
  throw DataError(std::string(field) + " has an unrecognized value");
}

std::optional<std::string> optional_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw DataError(std::string(field) + " must be a string");
  const auto& s = it->get_ref<const std::string&>();
  if (s.empty()) return std::nullopt;
  return s;
}

std::string required_string(const json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || !it->is_string()) {
    throw DataError(std::string("missing or non-string field: ") + field);
  }
  return it->get<std::string>();
}

SentimentTriple parse_sentiment_object(const json& obj) {
  SentimentTriple t;
  if (!obj.is_object()) throw DataError("sentiment must be an object");
  t.most_positive = obj.at("most_positive").get<double>();
  t.most_negative = obj.at("most_negative").get<double>();
  t.direction = obj.at("direction").get<int>();
  if (t.most_positive < -1.0 || t.most_positive > 1.0 ||
      t.most_negative < -1.0 || t.most_negative > 1.0) {
    throw DataError("sentiment scores must lie in [-1, 1]");
  }
  if (t.most_positive < t.most_negative) {
    throw DataError("sentiment most_positive must be >= most_negative");
  }
  if (t.direction != -1 && t.direction != 0 && t.direction != 1) {
    throw DataError("sentiment direction must be -1, 0 or 1");
  }
  return t;
}

const char* grade_name(Grade g) {
  return g == Grade::correct ? "correct" : "incorrect";
}

}  // namespace

double Corpus::accuracy() const {
  if (records.empty()) throw DataError("accuracy of an empty corpus is undefined");
  std::size_t correct = 0;
  for (const auto& r : records) {
    if (r.grade == Grade::correct) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(records.size());
}

CotRecord parse_record_line(const std::string& line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::exception& ex) {
    throw DataError(std::string("invalid JSON: ") + ex.what());
  }
  if (!obj.is_object()) throw DataError("line is not a JSON object");

  CotRecord rec;
  rec.record_id = required_string(obj, "record_id");
  if (rec.record_id.empty()) throw DataError("record_id is empty");
  rec.benchmark = required_string(obj, "benchmark");
  rec.model = required_string(obj, "model");
  rec.question = optional_string(obj, "question");
  rec.cot = required_string(obj, "cot");
  if (rec.cot.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw DataError("record " + rec.record_id + ": cot is empty");
  }
  rec.final_answer = required_string(obj, "final_answer");

  auto conf_it = obj.find("confidence_pct");
  if (conf_it == obj.end() || !conf_it->is_number()) {
    throw DataError("record " + rec.record_id + ": missing numeric confidence_pct");
  }
  rec.confidence_pct = conf_it->get<double>();
  if (!(rec.confidence_pct >= 0.0 && rec.confidence_pct <= 100.0)) {
    throw DataError("record " + rec.record_id + ": confidence_pct out of [0,100]");
  }

  if (auto it = obj.find("grade_human"); it != obj.end() && !it->is_null()) {
    rec.grade_human = parse_grade(*it, "grade_human");
  }
  if (auto it = obj.find("grade_auto"); it != obj.end() && !it->is_null()) {
    rec.grade_auto = parse_grade(*it, "grade_auto");
  }

  auto grade_it = obj.find("grade");
  if (grade_it != obj.end() && !grade_it->is_null()) {
    rec.grade = parse_grade(*grade_it, "grade");
    if (rec.grade_human && rec.grade_auto && *rec.grade_human == *rec.grade_auto &&
        rec.grade != *rec.grade_human) {
      throw DataError("record " + rec.record_id +
                      ": grade contradicts agreeing dual grades");
    }
  } else if (rec.grade_human && rec.grade_auto) {
    // No explicit grade: derive it from agreeing dual grades.
    if (*rec.grade_human != *rec.grade_auto) {
      throw DataError("record " + rec.record_id +
                      ": dual grades disagree and no explicit grade is given");
    }
    rec.grade = *rec.grade_human;
  } else {
    throw DataError("record " + rec.record_id + ": no grade available");
  }

  if (auto it = obj.find("sentiment"); it != obj.end() && !it->is_null()) {
    try {
      rec.sentiment = parse_sentiment_object(*it);
    } catch (const json::exception& ex) {
      throw DataError("record " + rec.record_id + ": bad sentiment: " + ex.what());
    } catch (const DataError& ex) {
      throw DataError("record " + rec.record_id + ": " + ex.what());
    }
  }

  rec.category = optional_string(obj, "category");
  rec.tier = optional_string(obj, "tier");
  return rec;
}

LoadResult load_corpus(const std::string& path, bool strict) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);

  LoadResult result;
  result.corpus.provenance.source_path = path;
  result.corpus.provenance.loaded_at = std::chrono::system_clock::now();

  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      CotRecord rec = parse_record_line(line);
      if (!seen_ids.insert(rec.record_id).second) {
        throw DataError("duplicate record_id: " + rec.record_id);
      }
      result.corpus.records.push_back(std::move(rec));
      ++result.loaded;
    } catch (const DataError& ex) {
      if (strict) {
        throw DataError(path + ":" + std::to_string(line_no) + ": " + ex.what());
      }
      ++result.skipped;
      result.skip_reasons.push_back("line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  if (in.bad()) throw DataError("I/O error while reading " + path);
  if (result.corpus.records.empty()) {
    throw DataError("corpus is empty after loading " + path);
  }
  return result;
}

std::string record_to_jsonl(const CotRecord& record) {
  json obj;
  obj["record_id"] = record.record_id;
  obj["benchmark"] = record.benchmark;
  obj["model"] = record.model;
  if (record.question) obj["question"] = *record.question;
  obj["cot"] = record.cot;
  obj["final_answer"] = record.final_answer;
  obj["confidence_pct"] = record.confidence_pct;
  obj["grade"] = grade_name(record.grade);
  if (record.grade_human) obj["grade_human"] = grade_name(*record.grade_human);
  if (record.grade_auto) obj["grade_auto"] = grade_name(*record.grade_auto);
  if (record.sentiment) {
    obj["sentiment"] = {{"most_positive", record.sentiment->most_positive},
                        {"most_negative", record.sentiment->most_negative},
                        {"direction", record.sentiment->direction}};
  }
  if (record.category) obj["category"] = *record.category;
  if (record.tier) obj["tier"] = *record.tier;
  return obj.dump();
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open file for writing: " + path);
  for (const auto& rec : corpus.records) {
    out << record_to_jsonl(rec) << '\n';
  }
  if (!out) throw DataError("I/O error while writing " + path);
}

AgreementResult filter_agreement(const Corpus& corpus) {
  AgreementResult result;
  result.corpus.provenance = corpus.provenance;
  std::size_t matches = 0;
  for (const auto& rec : corpus.records) {
    if (!rec.grade_human || !rec.grade_auto) {
      throw DataError("record " + rec.record_id + " lacks dual grades; cannot apply agreement filter");
    }
    if (*rec.grade_human == *rec.grade_auto) {
      ++matches;
      result.corpus.records.push_back(rec);
    }
  }
  result.agreement_rate = corpus.records.empty()
                              ? 0.0
                              : static_cast<double>(matches) / static_cast<double>(corpus.records.size());
  return result;
}

GroupKey group_key_from_string(const std::string& name) {
  if (name == "category") return GroupKey::category;
  if (name == "tier") return GroupKey::tier;
  if (name == "benchmark") return GroupKey::benchmark;
  if (name == "model") return GroupKey::model;
  throw DataError("unknown group key: " + name);
}

std::string to_string(GroupKey key) {
  switch (key) {
    case GroupKey::category: return "category";
    case GroupKey::tier: return "tier";
    case GroupKey::benchmark: return "benchmark";
    case GroupKey::model: return "model";
  }
  return "unknown";
}

std::vector<GroupAccuracy> group_accuracy(const Corpus& corpus, GroupKey key) {
  auto field_of = [key](const CotRecord& rec) -> std::optional<std::string> {
    switch (key) {
      case GroupKey::category: return rec.category;
      case GroupKey::tier: return rec.tier;
      case GroupKey::benchmark: return rec.benchmark;
      case GroupKey::model: return rec.model;
    }
    return std::nullopt;
  };

  struct Tally {
    std::size_t correct = 0;
    std::size_t total = 0;
  };
  std::vector<std::pair<std::string, Tally>> tallies;
  auto find_group = [&tallies](const std::string& g) -> Tally& {
    for (auto& [name, tally] : tallies) {
      if (name == g) return tally;
    }
    tallies.emplace_back(g, Tally{});
    return tallies.back().second;
  };

  for (const auto& rec : corpus.records) {
    auto group = field_of(rec);
    if (!group || group->empty()) {
      throw DataError("record " + rec.record_id + " has no " + to_string(key));
    }
    auto& tally = find_group(*group);
    ++tally.total;
    if (rec.grade == Grade::correct) ++tally.correct;
  }

  std::vector<GroupAccuracy> out;
  out.reserve(tallies.size());
  for (const auto& [name, tally] : tallies) {
    out.push_back({name,
                   static_cast<double>(tally.correct) / static_cast<double>(tally.total),
                   tally.total});
  }
  std::sort(out.begin(), out.end(), [](const GroupAccuracy& a, const GroupAccuracy& b) {
    if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
    return a.group < b.group;
  });
  return out;
}

}  // namespace cotcheck
