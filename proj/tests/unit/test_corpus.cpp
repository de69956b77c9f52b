#include "cotcheck/corpus.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace cotcheck;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

std::string line(const std::string& id, const std::string& grade, double conf = 80.0,
                 const std::string& extra = "") {
  std::ostringstream os;
  os << R"({"record_id":")" << id << R"(","benchmark":"hle","model":"r1",)"
     << R"("cot":"We reason about it. The answer follows.","final_answer":"42",)"
     << R"("confidence_pct":)" << conf << R"(,"grade":")" << grade << '"' << extra << '}';
  return os.str();
}

}  // namespace

TEST_CASE("load_corpus parses well-formed lines") {
  TempDir tmp("corpus_load");
  write_file(tmp.path("c.jsonl"),
             line("a", "correct") + "\n" + line("b", "incorrect") + "\n" + line("c", "correct") + "\n");
  const LoadResult lr = load_corpus(tmp.path("c.jsonl").string());
  CHECK(lr.loaded == 3);
  CHECK(lr.skipped == 0);
  CHECK(lr.corpus.size() == 3);
  CHECK(lr.corpus.records[0].record_id == "a");
  CHECK(lr.corpus.records[0].grade == Grade::correct);
  CHECK(lr.corpus.records[1].grade == Grade::incorrect);
  CHECK(lr.corpus.accuracy() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("load_corpus skips invariant violations when not strict") {
  TempDir tmp("corpus_skip");
  write_file(tmp.path("c.jsonl"), line("a", "correct") + "\n" + line("bad", "correct", 250.0) + "\n");
  const LoadResult lr = load_corpus(tmp.path("c.jsonl").string(), false);
  CHECK(lr.loaded == 1);
  CHECK(lr.skipped == 1);
  REQUIRE(lr.skip_reasons.size() == 1);
  CHECK(lr.skip_reasons[0].find("confidence_pct") != std::string::npos);
}

TEST_CASE("load_corpus strict mode aborts on the first malformed line") {
  TempDir tmp("corpus_strict");
  write_file(tmp.path("c.jsonl"), line("a", "correct", 250.0) + "\n" + line("b", "correct") + "\n");
  CHECK_THROWS_AS(load_corpus(tmp.path("c.jsonl").string(), true), DataError);
}

TEST_CASE("load_corpus rejects duplicate record ids") {
  TempDir tmp("corpus_dup");
  write_file(tmp.path("c.jsonl"), line("a", "correct") + "\n" + line("a", "incorrect") + "\n");
  SUBCASE("strict") {
    CHECK_THROWS_WITH_AS(load_corpus(tmp.path("c.jsonl").string(), true),
                         doctest::Contains("duplicate record_id"), DataError);
  }
  SUBCASE("lenient skips the repeat") {
    const LoadResult lr = load_corpus(tmp.path("c.jsonl").string(), false);
    CHECK(lr.loaded == 1);
    CHECK(lr.skipped == 1);
  }
}

TEST_CASE("grade resolution from dual grades") {
  SUBCASE("agreeing dual grades fill a missing grade") {
    const CotRecord rec = parse_record_line(
        R"({"record_id":"x","benchmark":"hle","model":"r1","cot":"t","final_answer":"a",)"
        R"("confidence_pct":10,"grade_human":"correct","grade_auto":"correct"})");
    CHECK(rec.grade == Grade::correct);
  }
  SUBCASE("disagreeing dual grades without explicit grade are rejected") {
    CHECK_THROWS_AS(parse_record_line(
                        R"({"record_id":"x","benchmark":"hle","model":"r1","cot":"t",)"
                        R"("final_answer":"a","confidence_pct":10,)"
                        R"("grade_human":"correct","grade_auto":"incorrect"})"),
                    DataError);
  }
  SUBCASE("explicit grade contradicting agreeing dual grades is rejected") {
    CHECK_THROWS_AS(parse_record_line(
                        R"({"record_id":"x","benchmark":"hle","model":"r1","cot":"t",)"
                        R"("final_answer":"a","confidence_pct":10,"grade":"incorrect",)"
                        R"("grade_human":"correct","grade_auto":"correct"})"),
                    DataError);
  }
  SUBCASE("explicit grade wins over disagreeing dual grades") {
    const CotRecord rec = parse_record_line(
        R"({"record_id":"x","benchmark":"hle","model":"r1","cot":"t","final_answer":"a",)"
        R"("confidence_pct":10,"grade":"correct","grade_human":"correct","grade_auto":"incorrect"})");
    CHECK(rec.grade == Grade::correct);
  }
}

TEST_CASE("whitespace-only cot is rejected") {
  CHECK_THROWS_AS(parse_record_line(
                      R"({"record_id":"x","benchmark":"b","model":"m","cot":"   ",)"
                      R"("final_answer":"a","confidence_pct":10,"grade":"correct"})"),
                  DataError);
}

TEST_CASE("sentiment invariants are validated at parse time") {
  CHECK_THROWS_AS(parse_record_line(
                      R"({"record_id":"x","benchmark":"b","model":"m","cot":"t",)"
                      R"("final_answer":"a","confidence_pct":10,"grade":"correct",)"
                      R"("sentiment":{"most_positive":-0.5,"most_negative":0.5,"direction":1}})"),
                  DataError);
  CHECK_THROWS_AS(parse_record_line(
                      R"({"record_id":"x","benchmark":"b","model":"m","cot":"t",)"
                      R"("final_answer":"a","confidence_pct":10,"grade":"correct",)"
                      R"("sentiment":{"most_positive":0.5,"most_negative":-0.5,"direction":2}})"),
                  DataError);
}

TEST_CASE("filter_agreement hand count") {
  Corpus corpus;
  auto add = [&corpus](const std::string& id, Grade h, Grade a) {
    auto rec = testsupport::make_record(id, 1, "text here.");
    rec.grade_human = h;
    rec.grade_auto = a;
    rec.grade = h == a ? h : Grade::incorrect;
    corpus.records.push_back(std::move(rec));
  };
  add("1", Grade::correct, Grade::correct);
  add("2", Grade::incorrect, Grade::incorrect);
  add("3", Grade::correct, Grade::incorrect);
  add("4", Grade::incorrect, Grade::correct);

  const AgreementResult result = filter_agreement(corpus);
  CHECK(result.corpus.size() == 2);
  CHECK(result.agreement_rate == doctest::Approx(0.5));

  SUBCASE("idempotent") {
    const AgreementResult again = filter_agreement(result.corpus);
    CHECK(again.corpus.size() == result.corpus.size());
    CHECK(again.agreement_rate == doctest::Approx(1.0));
  }
}

TEST_CASE("filter_agreement is the identity when all grades agree") {
  Corpus corpus;
  for (int i = 0; i < 5; ++i) {
    auto rec = testsupport::make_record("r" + std::to_string(i), i % 2, "some text.");
    rec.grade_human = rec.grade;
    rec.grade_auto = rec.grade;
    corpus.records.push_back(std::move(rec));
  }
  const AgreementResult result = filter_agreement(corpus);
  CHECK(result.corpus.size() == 5);
  CHECK(result.agreement_rate == doctest::Approx(1.0));
}

TEST_CASE("filter_agreement names the record missing dual grades") {
  Corpus corpus;
  auto rec = testsupport::make_record("lonely", 1, "text.");
  corpus.records.push_back(rec);
  CHECK_THROWS_WITH_AS(filter_agreement(corpus), doctest::Contains("lonely"), DataError);
}

TEST_CASE("group_accuracy hand count and ordering") {
  Corpus corpus;
  auto add = [&corpus](const std::string& id, int grade, const std::string& cat) {
    auto rec = testsupport::make_record(id, grade, "text.");
    rec.category = cat;
    corpus.records.push_back(std::move(rec));
  };
  add("1", 1, "math");
  add("2", 1, "math");
  add("3", 1, "math");
  add("4", 0, "math");
  add("5", 0, "physics");
  add("6", 1, "physics");

  const auto rows = group_accuracy(corpus, GroupKey::category);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].group == "math");  // sorted by accuracy descending
  CHECK(rows[0].accuracy == doctest::Approx(0.75));
  CHECK(rows[0].count == 4);
  CHECK(rows[1].accuracy == doctest::Approx(0.5));

  // counts partition the corpus
  std::size_t total = 0;
  for (const auto& row : rows) total += row.count;
  CHECK(total == corpus.size());
}

TEST_CASE("group_accuracy errors when the key is missing") {
  Corpus corpus;
  corpus.records.push_back(testsupport::make_record("x", 1, "text."));
  CHECK_THROWS_AS(group_accuracy(corpus, GroupKey::category), DataError);
}

TEST_CASE("load -> save -> load round-trips the corpus") {
  TempDir tmp("corpus_roundtrip");
  Corpus corpus = testsupport::random_corpus(40, 0.4, 99);
  corpus.records[3].sentiment = SentimentTriple{0.25, -0.5, -1};
  corpus.records[5].category = "math";
  corpus.records[7].tier = "Tier 1";
  corpus.records[9].grade_human = Grade::correct;
  corpus.records[9].grade_auto = Grade::correct;
  corpus.records[9].grade = Grade::correct;
  corpus.records[11].question = "what is 6 times 7?";

  save_corpus(corpus, tmp.path("out.jsonl").string());
  const LoadResult reloaded = load_corpus(tmp.path("out.jsonl").string(), true);
  REQUIRE(reloaded.corpus.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& a = corpus.records[i];
    const auto& b = reloaded.corpus.records[i];
    CHECK(a.record_id == b.record_id);
    CHECK(a.cot == b.cot);
    CHECK(a.confidence_pct == b.confidence_pct);
    CHECK(a.grade == b.grade);
    CHECK(a.sentiment.has_value() == b.sentiment.has_value());
    if (a.sentiment) {
      CHECK(a.sentiment->most_positive == b.sentiment->most_positive);
      CHECK(a.sentiment->most_negative == b.sentiment->most_negative);
      CHECK(a.sentiment->direction == b.sentiment->direction);
    }
    CHECK(a.category == b.category);
    CHECK(a.tier == b.tier);
    CHECK(a.question == b.question);
  }

  // a second save produces identical bytes
  save_corpus(reloaded.corpus, tmp.path("out2.jsonl").string());
  CHECK(testsupport::read_file(tmp.path("out.jsonl")) ==
        testsupport::read_file(tmp.path("out2.jsonl")));
}

TEST_CASE("empty or unreadable input is an error") {
  TempDir tmp("corpus_empty");
  write_file(tmp.path("empty.jsonl"), "");
  CHECK_THROWS_AS(load_corpus(tmp.path("empty.jsonl").string()), DataError);
  CHECK_THROWS_AS(load_corpus((tmp.dir() / "missing.jsonl").string()), DataError);
}
