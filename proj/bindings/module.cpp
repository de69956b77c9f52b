#include "cotcheck/corpus.hpp"
#include "cotcheck/heuristics.hpp"
#include "cotcheck/lexicon.hpp"
#include "cotcheck/metrics.hpp"
#include "cotcheck/mlp.hpp"
#include "cotcheck/pipeline.hpp"
#include "cotcheck/sentiment.hpp"
#include "cotcheck/textfeat.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace cotcheck;

namespace {

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) throw DataError("feature matrix must not be empty");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols) throw DataError("ragged feature matrix");
    for (std::size_t c = 0; c < m.cols; ++c) m.at(r, c) = rows[r][c];
  }
  return m;
}

HedgingLexicon lexicon_from(const std::vector<std::string>& lines) {
  return lines.empty() ? HedgingLexicon::default_lexicon() : HedgingLexicon::from_lines(lines);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "chain-of-thought correctness signals: corpus, features, lexicon, "
            "classifier and evaluation metrics";

  py::register_exception<DataError>(m, "DataError");

  py::class_<SentimentTriple>(m, "SentimentTriple")
      .def(py::init<>())
      .def(py::init([](double pos, double neg, int dir) {
             return SentimentTriple{pos, neg, dir};
           }),
           py::arg("most_positive"), py::arg("most_negative"), py::arg("direction"))
      .def_readwrite("most_positive", &SentimentTriple::most_positive)
      .def_readwrite("most_negative", &SentimentTriple::most_negative)
      .def_readwrite("direction", &SentimentTriple::direction);

  py::enum_<Grade>(m, "Grade")
      .value("incorrect", Grade::incorrect)
      .value("correct", Grade::correct);

  py::class_<CotRecord>(m, "CotRecord")
      .def(py::init<>())
      .def_readwrite("record_id", &CotRecord::record_id)
      .def_readwrite("benchmark", &CotRecord::benchmark)
      .def_readwrite("model", &CotRecord::model)
      .def_readwrite("cot", &CotRecord::cot)
      .def_readwrite("final_answer", &CotRecord::final_answer)
      .def_readwrite("confidence_pct", &CotRecord::confidence_pct)
      .def_readwrite("grade", &CotRecord::grade)
      .def_readwrite("grade_human", &CotRecord::grade_human)
      .def_readwrite("grade_auto", &CotRecord::grade_auto)
      .def_readwrite("sentiment", &CotRecord::sentiment)
      .def_readwrite("category", &CotRecord::category)
      .def_readwrite("tier", &CotRecord::tier);

  py::class_<Corpus>(m, "Corpus")
      .def(py::init<>())
      .def_readwrite("records", &Corpus::records)
      .def("__len__", [](const Corpus& c) { return c.size(); })
      .def("accuracy", &Corpus::accuracy);

  py::class_<LoadResult>(m, "LoadResult")
      .def_readonly("corpus", &LoadResult::corpus)
      .def_readonly("loaded", &LoadResult::loaded)
      .def_readonly("skipped", &LoadResult::skipped)
      .def_readonly("skip_reasons", &LoadResult::skip_reasons);

  m.def("load_corpus", &load_corpus, py::arg("path"), py::arg("strict") = false);
  m.def("save_corpus", &save_corpus, py::arg("corpus"), py::arg("path"));
  m.def("parse_record_line", &parse_record_line, py::arg("line"));
  m.def(
      "filter_agreement",
      [](const Corpus& corpus) {
        AgreementResult r = filter_agreement(corpus);
        return py::make_tuple(std::move(r.corpus), r.agreement_rate);
      },
      py::arg("corpus"), "returns (filtered_corpus, agreement_rate)");
  m.def(
      "group_accuracy",
      [](const Corpus& corpus, const std::string& key) {
        std::vector<std::tuple<std::string, double, std::size_t>> rows;
        for (const auto& g : group_accuracy(corpus, group_key_from_string(key))) {
          rows.emplace_back(g.group, g.accuracy, g.count);
        }
        return rows;
      },
      py::arg("corpus"), py::arg("key"));

  // text features
  m.def("tokenize", [](const std::string& s) { return tokenize(s); }, py::arg("text"));
  m.def("split_sentences", [](const std::string& s) { return split_sentences(s); },
        py::arg("text"));
  m.def("lemmatize", [](const std::string& s) { return lemmatize(s); }, py::arg("token"));
  m.def("cot_length", [](const std::string& s) { return cot_length(s); }, py::arg("cot"));
  m.def("volatility", &volatility, py::arg("sentiment"));
  m.def(
      "hedging_rate",
      [](const std::string& cot, const std::vector<std::string>& lexicon_lines) {
        return hedging_rate(cot, lexicon_from(lexicon_lines));
      },
      py::arg("cot"), py::arg("lexicon_lines") = std::vector<std::string>{},
      "hedged-sentence fraction; empty lexicon_lines selects the built-in lexicon");

  // metrics
  py::class_<ConfusionMatrix>(m, "ConfusionMatrix")
      .def(py::init<>())
      .def(py::init([](std::uint64_t tn, std::uint64_t fp, std::uint64_t fn, std::uint64_t tp) {
             return ConfusionMatrix{tn, fp, fn, tp};
           }),
           py::arg("tn"), py::arg("fp"), py::arg("fn"), py::arg("tp"))
      .def_readwrite("tn", &ConfusionMatrix::tn)
      .def_readwrite("fp", &ConfusionMatrix::fp)
      .def_readwrite("fn", &ConfusionMatrix::fn)
      .def_readwrite("tp", &ConfusionMatrix::tp)
      .def("total", &ConfusionMatrix::total)
      .def("accuracy", &ConfusionMatrix::accuracy);

  m.def("confusion", &confusion, py::arg("preds"), py::arg("labels"));
  m.def("mcc", py::overload_cast<const ConfusionMatrix&>(&mcc), py::arg("cm"));
  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        RocResult r = roc_auc(scores, labels);
        return py::make_tuple(r.auc, r.curve);
      },
      py::arg("scores"), py::arg("labels"), "returns (auc, [(fpr, tpr), ...])");
  m.def(
      "calibration_error",
      [](const std::vector<std::pair<double, int>>& records) {
        const CalibrationReport report = calibration_error(records);
        py::list bins;
        for (const auto& b : report.bins) {
          py::dict d;
          d["lo"] = b.lo;
          d["hi"] = b.hi;
          d["count"] = b.count;
          d["mean_confidence_pct"] = b.mean_confidence_pct;
          d["accuracy_pct"] = b.accuracy_pct;
          bins.append(d);
        }
        return py::make_tuple(report.calibration_error_pct, bins);
      },
      py::arg("records"), "records are (confidence_pct, grade) pairs");
  m.def(
      "cohen_kappa",
      [](const std::vector<int>& a, const std::vector<int>& b) {
        const KappaResult r = cohen_kappa(a, b);
        return py::make_tuple(r.kappa, r.agreement);
      },
      py::arg("a"), py::arg("b"));
  m.def(
      "pointbiserial",
      [](const std::vector<double>& x, const std::vector<int>& y) {
        const Correlation c = pointbiserial(x, y);
        return py::make_tuple(c.r, c.p);
      },
      py::arg("x"), py::arg("y"));
  m.def(
      "length_slope",
      [](const std::vector<std::pair<std::size_t, int>>& records) {
        const LengthSlope s = length_slope(records);
        return py::make_tuple(s.per_1000_words, s.stderr_per_1000, s.p_value);
      },
      py::arg("records"), "returns (slope_per_1000_words, stderr, p_value)");
  m.def(
      "binned_accuracy",
      [](const std::vector<std::pair<double, int>>& records, double bin_width,
         std::size_t min_count, bool mean_center) {
        std::vector<std::tuple<double, double, std::size_t>> rows;
        for (const auto& p : binned_accuracy(records, bin_width, min_count, mean_center)) {
          rows.emplace_back(p.center, p.accuracy, p.count);
        }
        return rows;
      },
      py::arg("records"), py::arg("bin_width"), py::arg("min_count") = 30,
      py::arg("mean_center") = false);

  py::class_<SplitPlan>(m, "SplitPlan")
      .def_readonly("train_ids", &SplitPlan::train_ids)
      .def_readonly("test_ids", &SplitPlan::test_ids)
      .def_readonly("seed", &SplitPlan::seed);
  m.def("split_train_balanced_test", &split_train_balanced_test, py::arg("corpus"),
        py::arg("ratio") = 0.8, py::arg("seed") = 0);
  m.def("subset", &subset, py::arg("corpus"), py::arg("ids"));

  // lexicon
  m.def(
      "relative_accuracy",
      [](const std::string& token, const Corpus& corpus, bool lemma_mode) {
        const WordIndex index = word_index(corpus, lemma_mode);
        return relative_accuracy(token, corpus, index);
      },
      py::arg("token"), py::arg("corpus"), py::arg("lemma_mode") = false);
  m.def(
      "build_lexicon",
      [](const std::vector<std::pair<std::string, Corpus>>& sets, std::size_t min_occurrences,
         bool lemma_mode, int resamples, std::uint64_t seed) {
        std::vector<std::pair<std::string, const Corpus*>> ptrs;
        ptrs.reserve(sets.size());
        for (const auto& [id, corpus] : sets) ptrs.emplace_back(id, &corpus);
        LexiconConfig cfg;
        cfg.min_occurrences = min_occurrences;
        cfg.lemma_mode = lemma_mode;
        cfg.bootstrap_resamples = resamples;
        cfg.bootstrap_seed = seed;
        py::list out;
        for (const auto& entry : build_lexicon(ptrs, cfg)) {
          py::dict d;
          d["token"] = entry.token;
          d["mean_relative_accuracy"] = entry.mean_relative_accuracy;
          py::dict per_set;
          for (const auto& [set_id, stats] : entry.per_set) {
            py::dict s;
            s["occurrences"] = stats.occurrences;
            s["subset_accuracy"] = stats.subset_accuracy;
            s["dataset_accuracy"] = stats.dataset_accuracy;
            s["relative_accuracy"] = stats.relative_accuracy;
            s["ci_low"] = stats.ci_low;
            s["ci_high"] = stats.ci_high;
            per_set[set_id.c_str()] = s;
          }
          d["per_set"] = per_set;
          out.append(d);
        }
        return out;
      },
      py::arg("sets"), py::arg("min_occurrences") = 300, py::arg("lemma_mode") = false,
      py::arg("resamples") = 0, py::arg("seed") = 0);

  // classifier
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("class_weights", &TrainConfig::class_weights);

  py::class_<MlpModel>(m, "MlpModel")
      .def_readonly("layer_dims", &MlpModel::layer_dims)
      .def_readonly("seed", &MlpModel::seed)
      .def("feature_dim", &MlpModel::feature_dim);

  m.def("class_weights", &class_weights, py::arg("labels"));
  m.def(
      "train_mlp",
      [](const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
         const TrainConfig& config, std::uint64_t seed) {
        return train(matrix_from_rows(rows), labels, config, seed).model;
      },
      py::arg("features"), py::arg("labels"), py::arg("config") = TrainConfig{},
      py::arg("seed") = 0);
  m.def(
      "forward",
      [](const MlpModel& model, const std::vector<double>& x) {
        return forward(model, std::span<const double>(x.data(), x.size()));
      },
      py::arg("model"), py::arg("x"));
  m.def(
      "predict_label",
      [](const MlpModel& model, const std::vector<double>& x, double threshold) {
        return predict_label(model, std::span<const double>(x.data(), x.size()), threshold);
      },
      py::arg("model"), py::arg("x"), py::arg("threshold") = 0.5);
  m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &load_model, py::arg("path"));

  // heuristics
  m.def(
      "harmful_word_rule",
      [](const std::string& cot, const std::vector<std::string>& words) {
        CotRecord rec;
        rec.cot = cot;
        HeuristicConfig cfg;
        if (!words.empty()) cfg.harmful_words = words;
        return harmful_word_rule(rec, cfg);
      },
      py::arg("cot"), py::arg("words") = std::vector<std::string>{},
      "1 = predicted correct, 0 = predicted incorrect");
  m.def(
      "confidence_coinflip",
      [](const std::string& record_id, double confidence_pct, std::uint64_t seed) {
        CotRecord rec;
        rec.record_id = record_id;
        rec.confidence_pct = confidence_pct;
        return confidence_coinflip(rec, seed);
      },
      py::arg("record_id"), py::arg("confidence_pct"), py::arg("seed") = 0);

  // sentiment
  m.def("build_sentiment_prompt", &build_sentiment_prompt, py::arg("cot"));
  m.def("format_sentiment_trailer", &format_sentiment_trailer, py::arg("triple"));
  m.def("parse_sentiment_response", &parse_sentiment_response, py::arg("text"));

  // pipeline
  m.def(
      "run_pipeline",
      [](const std::string& config_path, const std::string& out_dir, bool analysis_only) {
        RunConfig config = load_run_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        run_pipeline(config, analysis_only);
        return config.output_dir;
      },
      py::arg("config_path"), py::arg("out_dir") = std::string(),
      py::arg("analysis_only") = false);
}
