#include "cotcheck/pipeline.hpp"

#include "cotcheck/format.hpp"
#include "cotcheck/rng.hpp"
#include "cotcheck/sentiment.hpp"
#include "cotcheck/svg.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>
#include <unordered_map>

namespace fs = std::filesystem;

namespace cotcheck {
namespace {

using json = nlohmann::json;

// The 25 surface-form words used as the default bag-of-words feature list;
// overridable through the run config or derivable from a fresh lexicon.
const std::vector<std::string>& default_word_features() {
  static const std::vector<std::string> words = {
      "complexity", "guess",    "stuck",       "hard",        "involved",
      "positions",  "involves", "involve",     "information", "comes",
      "likely",     "probably", "constraints", "called",      "depend",
      "missing",    "often",    "possibly",    "combination", "based",
      "four",       "require",  "structure",   "per",         "requires"};
  return words;
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
  if (!out) throw DataError("write failed for " + path.string());
}

void write_json_file(const fs::path& path, const json& value) {
  write_text_file(path, value.dump(2) + "\n");
}

std::vector<std::uint64_t> default_seeds() {
  std::vector<std::uint64_t> seeds(30);
  std::iota(seeds.begin(), seeds.end(), 0);
  return seeds;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

std::string feature_set_name(const std::vector<std::string>& feature_set) {
  std::string name;
  for (const auto& f : feature_set) {
    if (!name.empty()) name += '+';
    name += f;
  }
  return name.empty() ? "none" : name;
}

FeatureConfig make_feature_config(const std::vector<std::string>& feature_set,
                                  const std::vector<std::string>& word_list,
                                  bool word_counts) {
  FeatureConfig fc;
  fc.word_counts = word_counts;
  for (const auto& f : feature_set) {
    if (f == "words") fc.word_list = word_list;
    else if (f == "length") fc.use_length = true;
    else if (f == "volatility") fc.use_volatility = true;
    else if (f == "hedging") fc.use_hedging = true;
    else throw DataError("unknown feature name: " + f);
  }
  return fc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open run config: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& ex) {
    throw DataError("run config " + path + ": " + ex.what());
  }

  RunConfig rc;
  if (!cfg.contains("corpora") || !cfg["corpora"].is_object() || cfg["corpora"].empty()) {
    throw DataError("run config needs a non-empty corpora section");
  }
  for (const auto& [set_id, spec] : cfg["corpora"].items()) {
    CorpusSpec cs;
    cs.path = spec.at("path").get<std::string>();
    cs.strict = spec.value("strict", false);
    cs.agreement_filter = spec.value("agreement_filter", false);
    cs.sentiment_path = spec.value("sentiment_path", std::string());
    rc.corpora.emplace_back(set_id, std::move(cs));
  }

  const json features = cfg.value("features", json::object());
  if (features.contains("sets")) {
    for (const auto& set : features["sets"]) {
      rc.feature_sets.push_back(set.get<std::vector<std::string>>());
    }
  } else {
    rc.feature_sets = {{"words"}};
  }
  rc.word_list = features.value("word_list", std::vector<std::string>{});
  rc.word_source = features.value("word_source", std::string("fixed"));
  if (rc.word_source != "fixed" && rc.word_source != "train_lexicon") {
    throw DataError("features.word_source must be \"fixed\" or \"train_lexicon\"");
  }
  rc.word_top_k = features.value("word_top_k", std::size_t{25});
  rc.word_counts = features.value("counts", false);
  rc.standardize = features.value("standardize", true);
  rc.hedging_lexicon_path = features.value("hedging_lexicon", std::string());

  const json lex = cfg.value("lexicon", json::object());
  rc.lexicon.min_occurrences = lex.value("min_occurrences", std::size_t{300});
  rc.lexicon.bootstrap_resamples = lex.value("resamples", 1000);
  rc.lexicon.bootstrap_level = lex.value("level", 0.95);
  rc.lexicon.bootstrap_seed = lex.value("seed", std::uint64_t{0});
  rc.lexicon_top_k = lex.value("top_k", std::size_t{25});

  const json clf = cfg.value("classifier", json::object());
  rc.classifier.learning_rate = clf.value("learning_rate", 0.001);
  rc.classifier.epochs = clf.value("epochs", 100);
  rc.classifier.batch_size = clf.value("batch_size", 32);
  rc.classifier.adam_beta1 = clf.value("adam_beta1", 0.9);
  rc.classifier.adam_beta2 = clf.value("adam_beta2", 0.999);
  rc.classifier.adam_epsilon = clf.value("adam_epsilon", 1e-8);
  rc.train_ratio = clf.value("train_ratio", 0.8);
  rc.cross_test_mode = clf.value("cross_test_mode", std::string("split"));
  if (rc.cross_test_mode != "split" && rc.cross_test_mode != "full") {
    throw DataError("classifier.cross_test_mode must be \"split\" or \"full\"");
  }
  if (clf.contains("seeds")) {
    const auto& seeds = clf["seeds"];
    if (seeds.is_array()) {
      rc.seeds = seeds.get<std::vector<std::uint64_t>>();
    } else {
      const std::uint64_t from = seeds.value("from", std::uint64_t{0});
      const std::uint64_t count = seeds.value("count", std::uint64_t{30});
      for (std::uint64_t s = 0; s < count; ++s) rc.seeds.push_back(from + s);
    }
  } else {
    rc.seeds = default_seeds();
  }
  if (rc.seeds.empty()) throw DataError("classifier.seeds must not be empty");
  if (clf.contains("evaluations")) {
    if (!clf["evaluations"].is_array()) {
      throw DataError("classifier.evaluations must be an array of [train, test] pairs");
    }
    for (const auto& pair : clf["evaluations"]) {
      if (!pair.is_array() || pair.size() != 2) {
        throw DataError("classifier.evaluations entries must be [train, test] pairs");
      }
      rc.evaluations.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    }
  } else {
    for (const auto& [set_id, spec] : rc.corpora) {
      (void)spec;
      rc.evaluations.emplace_back(set_id, set_id);
    }
  }

  const json heur = cfg.value("heuristics", json::object());
  if (heur.contains("harmful_words")) {
    rc.heuristics.harmful_words = heur["harmful_words"].get<std::vector<std::string>>();
  }
  rc.heuristics.rng_seed = heur.value("seed", std::uint64_t{0});
  rc.coinflip_seeds = heur.value("coinflip_seeds", 100);

  const json analysis = cfg.value("analysis", json::object());
  rc.group_keys = analysis.value("group_keys", std::vector<std::string>{});
  rc.bin_min_count = analysis.value("bin_min_count", std::size_t{30});

  const json output = cfg.value("output", json::object());
  rc.output_dir = output.value("dir", std::string("cotcheck-out"));
  rc.threads = cfg.value("threads", 0u);

  // sanity: evaluations must reference known sets
  auto known = [&rc](const std::string& id) {
    for (const auto& [set_id, spec] : rc.corpora) {
      (void)spec;
      if (set_id == id) return true;
    }
    return false;
  };
  for (const auto& [train_id, test_id] : rc.evaluations) {
    if (!known(train_id) || !known(test_id)) {
      throw DataError("evaluation references unknown corpus: " + train_id + " -> " + test_id);
    }
  }
  return rc;
}

PreparedFeatures prepare_features(const Corpus& corpus, const FeatureConfig& config,
                                  const HedgingLexicon& lexicon) {
  PreparedFeatures prepared;
  std::vector<std::vector<double>> rows;
  for (const auto& rec : corpus.records) {
    if (config.use_volatility && !rec.sentiment) {
      ++prepared.skipped_missing_sentiment;
      continue;
    }
    const FeatureVector fv = featurize(rec, config, lexicon);
    rows.push_back(fv.to_row(config));
    prepared.labels.push_back(grade_value(rec.grade));
    prepared.record_ids.push_back(rec.record_id);
  }
  const std::size_t dim = feature_dim(config);
  prepared.features = Matrix(rows.size(), dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < dim; ++c) prepared.features.at(r, c) = rows[r][c];
  }
  return prepared;
}

Standardizer Standardizer::fit(const Matrix& features, std::size_t from_col) {
  Standardizer st;
  st.from_col = from_col;
  if (features.rows == 0 || from_col >= features.cols) return st;
  const std::size_t k = features.cols - from_col;
  st.mean.assign(k, 0.0);
  st.scale.assign(k, 1.0);
  for (std::size_t c = 0; c < k; ++c) {
    double sum = 0.0;
    for (std::size_t r = 0; r < features.rows; ++r) sum += features.at(r, from_col + c);
    st.mean[c] = sum / static_cast<double>(features.rows);
    double var = 0.0;
    for (std::size_t r = 0; r < features.rows; ++r) {
      const double d = features.at(r, from_col + c) - st.mean[c];
      var += d * d;
    }
    const double sd = std::sqrt(var / static_cast<double>(features.rows));
    st.scale[c] = sd > 0.0 ? sd : 1.0;
  }
  return st;
}

void Standardizer::apply(Matrix& features) const {
  if (mean.empty()) return;
  if (from_col + mean.size() != features.cols) {
    throw DataError("standardizer and feature matrix disagree on shape");
  }
  for (std::size_t r = 0; r < features.rows; ++r) {
    for (std::size_t c = 0; c < mean.size(); ++c) {
      auto& v = features.at(r, from_col + c);
      v = (v - mean[c]) / scale[c];
    }
  }
}

Corpus balance_corpus(const Corpus& corpus, std::uint64_t seed) {
  std::size_t correct = 0, incorrect = 0;
  for (const auto& rec : corpus.records) {
    rec.grade == Grade::correct ? ++correct : ++incorrect;
  }
  if (correct == 0 || incorrect == 0) {
    throw DataError("balance_corpus: corpus is single-class");
  }
  const std::size_t per_class = std::min(correct, incorrect);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "balance"));
  rng.shuffle(order);
  std::vector<std::string> ids;
  std::size_t took_c = 0, took_i = 0;
  for (std::size_t idx : order) {
    const auto& rec = corpus.records[idx];
    if (rec.grade == Grade::correct) {
      if (took_c < per_class) {
        ids.push_back(rec.record_id);
        ++took_c;
      }
    } else if (took_i < per_class) {
      ids.push_back(rec.record_id);
      ++took_i;
    }
  }
  return subset(corpus, ids);
}

namespace {

struct TrainedCell {
  MlpModel model;
  Standardizer standardizer;
  SplitPlan split;
};

TrainedCell train_on_split(const Corpus& train_corpus, double ratio, const FeatureConfig& fc,
                           const HedgingLexicon& lexicon, TrainConfig tc, bool standardize,
                           std::uint64_t seed) {
  TrainedCell cell;
  cell.split = split_train_balanced_test(train_corpus, ratio, seed);
  const Corpus train_sub = subset(train_corpus, cell.split.train_ids);
  PreparedFeatures prep = prepare_features(train_sub, fc, lexicon);
  if (prep.features.rows == 0) throw DataError("training split has no usable records");
  tc.class_weights = class_weights(prep.labels);
  if (standardize) {
    cell.standardizer = Standardizer::fit(prep.features, fc.word_list.size());
    cell.standardizer.apply(prep.features);
  }
  cell.model = train(prep.features, prep.labels, tc, seed).model;
  return cell;
}

CellResult evaluate_on(const TrainedCell& cell, const std::string& train_set,
                       const std::string& test_set, const Corpus& test_sub,
                       const FeatureConfig& fc, const HedgingLexicon& lexicon,
                       const std::string& fs_name, std::uint64_t seed) {
  PreparedFeatures prep = prepare_features(test_sub, fc, lexicon);
  if (prep.features.rows == 0) throw DataError("test split has no usable records");
  Matrix features = prep.features;
  cell.standardizer.apply(features);

  CellResult result;
  result.train_set = train_set;
  result.test_set = test_set;
  result.feature_set = fs_name;
  result.seed = seed;
  result.train_n = cell.split.train_ids.size();
  result.test_n = prep.labels.size();
  result.skipped = prep.skipped_missing_sentiment;

  std::vector<int> preds;
  std::vector<double> scores;
  preds.reserve(features.rows);
  scores.reserve(features.rows);
  for (std::size_t r = 0; r < features.rows; ++r) {
    const double p = forward(cell.model, features.row(r));
    scores.push_back(p);
    preds.push_back(p >= 0.5 ? 1 : 0);
  }
  result.cm = confusion(preds, prep.labels);
  result.mcc_value = mcc(result.cm);
  result.accuracy = result.cm.accuracy();
  const bool has_both = std::count(prep.labels.begin(), prep.labels.end(), 1) > 0 &&
                        std::count(prep.labels.begin(), prep.labels.end(), 0) > 0;
  if (has_both) {
    RocResult roc = roc_auc(scores, prep.labels);
    result.auc = roc.auc;
    result.roc_curve = std::move(roc.curve);
  }
  return result;
}

}  // namespace

CellResult evaluate_cell(const std::string& train_set, const Corpus& train_corpus,
                         const std::string& test_set, const Corpus& test_corpus,
                         bool cross_full, double train_ratio, const FeatureConfig& fc,
                         const HedgingLexicon& lexicon, const TrainConfig& tc,
                         bool standardize, std::uint64_t seed) {
  const TrainedCell cell =
      train_on_split(train_corpus, train_ratio, fc, lexicon, tc, standardize, seed);
  Corpus test_sub;
  if (test_set == train_set) {
    test_sub = subset(train_corpus, cell.split.test_ids);
  } else if (cross_full) {
    test_sub = balance_corpus(test_corpus, derive_seed(seed, "cross_full:" + test_set));
  } else {
    const SplitPlan foreign = split_train_balanced_test(test_corpus, train_ratio, seed);
    test_sub = subset(test_corpus, foreign.test_ids);
  }
  std::vector<std::string> parts;
  if (!fc.word_list.empty()) parts.push_back("words");
  if (fc.use_length) parts.push_back("length");
  if (fc.use_volatility) parts.push_back("volatility");
  if (fc.use_hedging) parts.push_back("hedging");
  return evaluate_on(cell, train_set, test_set, test_sub, fc, lexicon,
                     feature_set_name(parts), seed);
}

namespace {

// ---------------------------------------------------------------------------
// pipeline stages
// ---------------------------------------------------------------------------

struct LoadedSet {
  std::string id;
  Corpus corpus;
  std::size_t loaded = 0;
  std::size_t skipped = 0;
  std::optional<double> agreement_rate;
  std::size_t sentiment_count = 0;
};

std::vector<LoadedSet> load_all(const RunConfig& config) {
  std::vector<LoadedSet> sets;
  for (const auto& [set_id, spec] : config.corpora) {
    LoadedSet set;
    set.id = set_id;
    LoadResult lr = load_corpus(spec.path, spec.strict);
    set.loaded = lr.loaded;
    set.skipped = lr.skipped;
    set.corpus = std::move(lr.corpus);
    if (!spec.sentiment_path.empty()) {
      ScoreOptions opts;
      opts.offline_path = spec.sentiment_path;
      opts.offline_only = true;
      set.corpus = score_corpus(set.corpus, opts).corpus;
    }
    if (spec.agreement_filter) {
      AgreementResult ar = filter_agreement(set.corpus);
      set.agreement_rate = ar.agreement_rate;
      set.corpus = std::move(ar.corpus);
    }
    for (const auto& rec : set.corpus.records) {
      if (rec.sentiment) ++set.sentiment_count;
    }
    if (set.corpus.records.empty()) {
      throw DataError("corpus " + set_id + " is empty after filtering");
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string calibration_csv(const CalibrationReport& report) {
  std::ostringstream out;
  out << "bin_lo,bin_hi,count,mean_confidence_pct,accuracy_pct\n";
  for (const auto& bin : report.bins) {
    out << format_double(bin.lo) << ',' << format_double(bin.hi) << ',' << bin.count << ',';
    if (bin.count > 0) {
      out << format_double(bin.mean_confidence_pct) << ',' << format_double(bin.accuracy_pct);
    } else {
      out << ',';
    }
    out << '\n';
  }
  return out.str();
}

json analysis_stage(const std::vector<LoadedSet>& sets, const RunConfig& config,
                    const HedgingLexicon& hedge_lex, const fs::path& out_dir) {
  json report;
  fs::create_directories(out_dir / "curves");

  struct CurveSpec {
    const char* name;
    double bin_width;
  };
  const CurveSpec curve_specs[] = {
      {"length", 1000.0}, {"hedging", 0.1}, {"volatility", 0.1}, {"volatility_centered", 0.1}};
  std::map<std::string, SvgPlot> curve_plots;

  for (const auto& set : sets) {
    json set_report;
    const auto& corpus = set.corpus;

    // calibration
    std::vector<std::pair<double, int>> conf;
    conf.reserve(corpus.size());
    for (const auto& rec : corpus.records) {
      conf.emplace_back(rec.confidence_pct, grade_value(rec.grade));
    }
    const CalibrationReport calib = calibration_error(conf);
    write_text_file(out_dir / ("calibration_" + set.id + ".csv"), calibration_csv(calib));
    set_report["accuracy_pct"] = 100.0 * corpus.accuracy();
    set_report["calibration_error_pct"] = calib.calibration_error_pct;
    set_report["records"] = corpus.size();

    // group accuracy tables
    for (const auto& key_name : config.group_keys) {
      const GroupKey key = group_key_from_string(key_name);
      const bool covered = std::all_of(corpus.records.begin(), corpus.records.end(),
                                       [&](const CotRecord& rec) {
                                         switch (key) {
                                           case GroupKey::category: return rec.category.has_value();
                                           case GroupKey::tier: return rec.tier.has_value();
                                           default: return true;
                                         }
                                       });
      if (!covered) {
        set_report["group_accuracy_skipped"].push_back(key_name);
        continue;
      }
      std::ostringstream csv;
      csv << "group,accuracy,count\n";
      for (const auto& row : group_accuracy(corpus, key)) {
        csv << row.group << ',' << format_double(row.accuracy) << ',' << row.count << '\n';
      }
      write_text_file(out_dir / ("group_accuracy_" + set.id + "_" + key_name + ".csv"),
                      csv.str());
    }

    // per-record surface feature columns, used by the curves and correlations
    std::vector<double> lengths, hedges, vols;
    std::vector<int> grades, grades_with_vol;
    lengths.reserve(corpus.size());
    for (const auto& rec : corpus.records) {
      lengths.push_back(static_cast<double>(cot_length(rec.cot)));
      hedges.push_back(hedging_rate(rec.cot, hedge_lex));
      grades.push_back(grade_value(rec.grade));
      if (rec.sentiment) {
        vols.push_back(volatility(*rec.sentiment));
        grades_with_vol.push_back(grade_value(rec.grade));
      }
    }

    // correlations (feature vs correctness); degenerate features are skipped
    // with a note so tiny synthetic corpora still produce a report
    json corr;
    auto put_corr = [&corr](const char* name, const std::vector<double>& x,
                            const std::vector<int>& y) {
      try {
        const Correlation c = pointbiserial(x, y);
        corr[name] = json{{"r", c.r}, {"p", c.p}, {"n", c.n}};
      } catch (const DataError& ex) {
        corr[name] = json{{"skipped", ex.what()}};
      }
    };
    put_corr("hedging", hedges, grades);
    put_corr("length", lengths, grades);
    if (!vols.empty()) put_corr("volatility", vols, grades_with_vol);
    set_report["correlations"] = corr;

    // length slopes
    std::vector<std::pair<std::size_t, int>> len_records;
    len_records.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      len_records.emplace_back(static_cast<std::size_t>(lengths[i]), grades[i]);
    }
    try {
      const LengthSlope slope = length_slope(len_records);
      set_report["length_slope"] = {{"per_1000_words", slope.per_1000_words},
                                    {"stderr", slope.stderr_per_1000},
                                    {"p", slope.p_value},
                                    {"n", slope.n}};
    } catch (const DataError& ex) {
      set_report["length_slope"] = {{"skipped", ex.what()}};
    }
    try {
      const LengthSlope binned = length_slope_binned(len_records, 1000.0, config.bin_min_count);
      set_report["length_slope_binned"] = {{"per_1000_words", binned.per_1000_words},
                                           {"stderr", binned.stderr_per_1000},
                                           {"p", binned.p_value},
                                           {"n_bins", binned.n}};
    } catch (const DataError&) {
      // too few populated bins; the per-item estimate stands alone
    }

    // binned accuracy curves
    for (const auto& spec : curve_specs) {
      std::vector<std::pair<double, int>> values;
      bool centered = std::string(spec.name) == "volatility_centered";
      if (std::string(spec.name) == "length") {
        for (std::size_t i = 0; i < lengths.size(); ++i) values.emplace_back(lengths[i], grades[i]);
      } else if (std::string(spec.name) == "hedging") {
        for (std::size_t i = 0; i < hedges.size(); ++i) values.emplace_back(hedges[i], grades[i]);
      } else {
        for (std::size_t i = 0; i < vols.size(); ++i) {
          values.emplace_back(vols[i], grades_with_vol[i]);
        }
      }
      if (values.empty()) continue;
      const auto points = binned_accuracy(values, spec.bin_width, config.bin_min_count, centered);
      std::ostringstream csv;
      csv << "bin_center,accuracy,count\n";
      SvgSeries series;
      series.label = set.id;
      for (const auto& p : points) {
        csv << format_double(p.center) << ',' << format_double(p.accuracy) << ',' << p.count
            << '\n';
        series.points.emplace_back(p.center, p.accuracy);
      }
      write_text_file(out_dir / "curves" / ("binned_" + std::string(spec.name) + "_" + set.id + ".csv"),
                      csv.str());
      auto& plot = curve_plots[spec.name];
      plot.title = std::string("accuracy vs ") + spec.name;
      plot.x_label = spec.name;
      plot.y_label = "accuracy";
      if (!series.points.empty()) plot.series.push_back(std::move(series));
    }

    report[set.id] = std::move(set_report);
  }

  for (const auto& [name, plot] : curve_plots) {
    if (plot.series.empty()) continue;
    write_text_file(out_dir / "curves" / ("binned_" + name + ".svg"), render_line_plot(plot));
  }
  return report;
}

json lexicon_stage(const std::vector<LoadedSet>& sets, const RunConfig& config,
                   const fs::path& out_dir, unsigned threads,
                   std::vector<std::string>& harmful_surface_out) {
  std::vector<std::pair<std::string, const Corpus*>> set_ptrs;
  for (const auto& set : sets) set_ptrs.emplace_back(set.id, &set.corpus);

  LexiconConfig lemma_cfg = config.lexicon;
  lemma_cfg.lemma_mode = true;
  lemma_cfg.threads = threads;
  LexiconConfig surface_cfg = lemma_cfg;
  surface_cfg.lemma_mode = false;

  const auto lemma_entries = build_lexicon(set_ptrs, lemma_cfg);
  const auto surface_entries = build_lexicon(set_ptrs, surface_cfg);

  {
    std::ostringstream csv;
    export_lexicon_csv(lemma_entries, csv);
    write_text_file(out_dir / "lexicon_lemma.csv", csv.str());
  }
  {
    std::ostringstream csv;
    export_lexicon_csv(surface_entries, csv);
    write_text_file(out_dir / "lexicon_surface.csv", csv.str());
  }

  json report;
  auto select_or_empty = [](const std::vector<LexiconEntry>& entries, WordDirection dir,
                            std::size_t top_k) -> std::vector<std::string> {
    if (entries.empty()) return {};
    return select_consistent(entries, dir, top_k);
  };
  const auto harmful_lemma = select_or_empty(lemma_entries, WordDirection::harmful,
                                             config.lexicon_top_k);
  const auto booster_lemma = select_or_empty(lemma_entries, WordDirection::booster,
                                             config.lexicon_top_k);
  harmful_surface_out = select_or_empty(surface_entries, WordDirection::harmful,
                                        config.word_top_k);
  report["lemma"] = {{"harmful", harmful_lemma}, {"booster", booster_lemma}};
  report["surface"] = {{"harmful", harmful_surface_out}};
  report["entries_lemma"] = lemma_entries.size();
  report["entries_surface"] = surface_entries.size();

  // bar data for the top harmful lemmas: relative accuracy per set + mean
  std::ostringstream bar_csv;
  bar_csv << "token";
  for (const auto& set : sets) bar_csv << ',' << set.id;
  bar_csv << ",mean_relative_accuracy\n";
  std::vector<SvgBarGroup> bar_groups;
  for (const auto& token : harmful_lemma) {
    auto it = std::find_if(lemma_entries.begin(), lemma_entries.end(),
                           [&token](const LexiconEntry& e) { return e.token == token; });
    if (it == lemma_entries.end()) continue;
    bar_csv << token;
    SvgBarGroup group;
    group.label = token;
    for (const auto& [set_id, stats] : it->per_set) {
      bar_csv << ',' << format_double(stats.relative_accuracy);
      group.bars.push_back({set_id, stats.relative_accuracy, stats.ci_low, stats.ci_high});
    }
    bar_csv << ',' << format_double(it->mean_relative_accuracy) << '\n';
    bar_groups.push_back(std::move(group));
  }
  write_text_file(out_dir / "harmful_words_bars.csv", bar_csv.str());
  if (!bar_groups.empty()) {
    write_text_file(out_dir / "harmful_words_bars.svg",
                    render_bar_plot("relative accuracy of harmful lemmas", "relative accuracy",
                                    bar_groups));
  }
  return report;
}

struct ClassifierOutputs {
  std::vector<CellResult> results;
  json summary;
};

ClassifierOutputs classifier_stage(const std::vector<LoadedSet>& sets, const RunConfig& config,
                                   const HedgingLexicon& hedge_lex,
                                   const std::map<std::string, std::vector<std::string>>& word_lists,
                                   const fs::path& out_dir, unsigned threads) {
  auto corpus_of = [&sets](const std::string& id) -> const Corpus& {
    for (const auto& set : sets) {
      if (set.id == id) return set.corpus;
    }
    throw DataError("unknown corpus id: " + id);
  };

  // job = (train_set, feature_set, seed); the trained model is reused for
  // every test set mapped to that training set.
  struct Job {
    std::string train_set;
    std::vector<std::string> test_sets;
    std::vector<std::string> feature_set;
    std::uint64_t seed;
  };
  std::map<std::string, std::vector<std::string>> tests_by_train;
  for (const auto& [train_id, test_id] : config.evaluations) {
    tests_by_train[train_id].push_back(test_id);
  }
  std::vector<Job> jobs;
  for (const auto& [train_id, test_ids] : tests_by_train) {
    for (const auto& fs_set : config.feature_sets) {
      for (std::uint64_t seed : config.seeds) {
        jobs.push_back({train_id, test_ids, fs_set, seed});
      }
    }
  }

  std::vector<std::vector<CellResult>> job_results(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure_message;
  std::mutex failure_mutex;

  auto run_job = [&](std::size_t j) {
    const Job& job = jobs[j];
    const auto& words = word_lists.at(job.train_set);
    const FeatureConfig fc = make_feature_config(job.feature_set, words, config.word_counts);
    const std::string fs_name = feature_set_name(job.feature_set);
    const Corpus& train_corpus = corpus_of(job.train_set);
    const TrainedCell cell = train_on_split(train_corpus, config.train_ratio, fc, hedge_lex,
                                            config.classifier, config.standardize, job.seed);
    for (const auto& test_id : job.test_sets) {
      Corpus test_sub;
      if (test_id == job.train_set) {
        test_sub = subset(train_corpus, cell.split.test_ids);
      } else if (config.cross_test_mode == "full") {
        test_sub = balance_corpus(corpus_of(test_id), derive_seed(job.seed, "cross_full:" + test_id));
      } else {
        const SplitPlan foreign =
            split_train_balanced_test(corpus_of(test_id), config.train_ratio, job.seed);
        test_sub = subset(corpus_of(test_id), foreign.test_ids);
      }
      job_results[j].push_back(evaluate_on(cell, job.train_set, test_id, test_sub, fc,
                                           hedge_lex, fs_name, job.seed));
    }
  };

  auto worker = [&]() {
    for (std::size_t j = next.fetch_add(1); j < jobs.size(); j = next.fetch_add(1)) {
      if (failed.load()) return;
      try {
        run_job(j);
      } catch (const std::exception& ex) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        failed.store(true);
        if (failure_message.empty()) failure_message = ex.what();
      }
    }
  };

  const unsigned pool_size = std::max(1u, std::min<unsigned>(threads, jobs.size()));
  if (pool_size == 1) {
    for (std::size_t j = 0; j < jobs.size() && !failed.load(); ++j) {
      try {
        run_job(j);
      } catch (const std::exception& ex) {
        failed.store(true);
        failure_message = ex.what();
      }
    }
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < pool_size; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failed.load()) throw DataError("classifier stage failed: " + failure_message);

  ClassifierOutputs outputs;
  for (auto& cell_results : job_results) {
    for (auto& r : cell_results) outputs.results.push_back(std::move(r));
  }
  std::sort(outputs.results.begin(), outputs.results.end(),
            [](const CellResult& a, const CellResult& b) {
              return std::tie(a.train_set, a.test_set, a.feature_set, a.seed) <
                     std::tie(b.train_set, b.test_set, b.feature_set, b.seed);
            });

  // per-seed rows
  std::ostringstream csv;
  csv << "train_set,test_set,feature_set,seed,tn,fp,fn,tp,mcc,accuracy,auc,train_n,test_n,"
         "skipped_missing_sentiment\n";
  for (const auto& r : outputs.results) {
    csv << r.train_set << ',' << r.test_set << ',' << r.feature_set << ',' << r.seed << ','
        << r.cm.tn << ',' << r.cm.fp << ',' << r.cm.fn << ',' << r.cm.tp << ','
        << format_double(r.mcc_value) << ',' << format_double(r.accuracy) << ',';
    if (r.auc) csv << format_double(*r.auc);
    csv << ',' << r.train_n << ',' << r.test_n << ',' << r.skipped << '\n';
  }
  write_text_file(out_dir / "classifier_results.csv", csv.str());

  // aggregates across seeds
  struct Agg {
    std::vector<double> mcc, acc, auc;
  };
  std::map<std::tuple<std::string, std::string, std::string>, Agg> aggregates;
  for (const auto& r : outputs.results) {
    auto& agg = aggregates[{r.train_set, r.test_set, r.feature_set}];
    agg.mcc.push_back(r.mcc_value);
    agg.acc.push_back(r.accuracy);
    if (r.auc) agg.auc.push_back(*r.auc);
  }
  std::ostringstream summary_csv;
  summary_csv << "train_set,test_set,feature_set,seeds,mcc_mean,mcc_sd,accuracy_mean,"
                 "accuracy_sd,auc_mean,auc_sd\n";
  json summary_json;
  std::map<std::pair<std::string, std::string>, SvgBarGroup> bar_by_cell;
  for (const auto& [key, agg] : aggregates) {
    const auto& [train_id, test_id, fs_name] = key;
    summary_csv << train_id << ',' << test_id << ',' << fs_name << ',' << agg.mcc.size() << ','
                << format_double(mean_of(agg.mcc)) << ',' << format_double(sd_of(agg.mcc)) << ','
                << format_double(mean_of(agg.acc)) << ',' << format_double(sd_of(agg.acc)) << ',';
    if (!agg.auc.empty()) {
      summary_csv << format_double(mean_of(agg.auc)) << ',' << format_double(sd_of(agg.auc));
    } else {
      summary_csv << ',';
    }
    summary_csv << '\n';
    json cell;
    cell["train_set"] = train_id;
    cell["test_set"] = test_id;
    cell["feature_set"] = fs_name;
    cell["seeds"] = agg.mcc.size();
    cell["mcc_mean"] = mean_of(agg.mcc);
    cell["mcc_sd"] = sd_of(agg.mcc);
    cell["accuracy_mean"] = mean_of(agg.acc);
    cell["accuracy_sd"] = sd_of(agg.acc);
    if (!agg.auc.empty()) {
      cell["auc_mean"] = mean_of(agg.auc);
      cell["auc_sd"] = sd_of(agg.auc);
    }
    summary_json.push_back(cell);
    auto& bar_group = bar_by_cell[{train_id, test_id}];
    bar_group.label = train_id + "->" + test_id;
    const double mcc_mean = mean_of(agg.mcc);
    const double mcc_sd = sd_of(agg.mcc);
    bar_group.bars.push_back({fs_name, mcc_mean, mcc_mean - mcc_sd, mcc_mean + mcc_sd});
  }
  write_text_file(out_dir / "classifier_summary.csv", summary_csv.str());
  outputs.summary = std::move(summary_json);

  std::vector<SvgBarGroup> bar_groups;
  for (auto& [key, group] : bar_by_cell) bar_groups.push_back(std::move(group));
  if (!bar_groups.empty()) {
    write_text_file(out_dir / "classifier_mcc.svg",
                    render_bar_plot("classifier MCC by feature set", "mean MCC", bar_groups));
  }

  // ROC bands per cell
  fs::create_directories(out_dir / "roc");
  std::map<std::tuple<std::string, std::string, std::string>,
           std::vector<std::vector<std::pair<double, double>>>>
      curves_by_cell;
  for (const auto& r : outputs.results) {
    if (!r.roc_curve.empty()) {
      curves_by_cell[{r.train_set, r.test_set, r.feature_set}].push_back(r.roc_curve);
    }
  }
  for (const auto& [key, curves] : curves_by_cell) {
    if (curves.size() < 2) continue;
    const auto& [train_id, test_id, fs_name] = key;
    const RocBand band = roc_band(curves);
    std::ostringstream band_csv;
    band_csv << "fpr,mean_tpr,ci_lo,ci_hi\n";
    SvgPlot plot;
    plot.title = "ROC " + train_id + "->" + test_id + " (" + fs_name + ")";
    plot.x_label = "false positive rate";
    plot.y_label = "true positive rate";
    SvgSeries mean_series;
    mean_series.label = "mean across seeds";
    SvgBand svg_band;
    for (std::size_t g = 0; g < band.fpr.size(); ++g) {
      band_csv << format_double(band.fpr[g]) << ',' << format_double(band.mean_tpr[g]) << ','
               << format_double(band.lo[g]) << ',' << format_double(band.hi[g]) << '\n';
      mean_series.points.emplace_back(band.fpr[g], band.mean_tpr[g]);
      svg_band.x.push_back(band.fpr[g]);
      svg_band.lo.push_back(band.lo[g]);
      svg_band.hi.push_back(band.hi[g]);
    }
    SvgSeries diagonal;
    diagonal.label = "chance";
    diagonal.points = {{0.0, 0.0}, {1.0, 1.0}};
    plot.series.push_back(std::move(mean_series));
    plot.series.push_back(std::move(diagonal));
    plot.bands.push_back(std::move(svg_band));
    const std::string stem = "roc_" + train_id + "__" + test_id + "__" + fs_name;
    write_text_file(out_dir / "roc" / (stem + ".csv"), band_csv.str());
    write_text_file(out_dir / "roc" / (stem + ".svg"), render_line_plot(plot));
  }
  return outputs;
}

json heuristics_stage(const std::vector<LoadedSet>& sets, const RunConfig& config,
                      const fs::path& out_dir) {
  json report;
  std::ostringstream csv;
  csv << "set,heuristic,seeds,mcc_mean,mcc_sd,accuracy_mean\n";
  for (const auto& set : sets) {
    // 5-word rule, evaluated on every classifier seed's balanced test split
    std::vector<double> rule_mcc, rule_acc;
    ConfusionMatrix rule_total;
    for (std::uint64_t seed : config.seeds) {
      const SplitPlan plan = split_train_balanced_test(set.corpus, config.train_ratio, seed);
      const Corpus test_sub = subset(set.corpus, plan.test_ids);
      std::vector<int> labels;
      labels.reserve(test_sub.size());
      for (const auto& rec : test_sub.records) labels.push_back(grade_value(rec.grade));
      const std::vector<int> preds = harmful_word_rule(test_sub, config.heuristics);
      const ConfusionMatrix cm = confusion(preds, labels);
      rule_total.tn += cm.tn;
      rule_total.fp += cm.fp;
      rule_total.fn += cm.fn;
      rule_total.tp += cm.tp;
      rule_mcc.push_back(mcc(cm));
      rule_acc.push_back(cm.accuracy());
    }
    csv << set.id << ",harmful_words," << rule_mcc.size() << ','
        << format_double(mean_of(rule_mcc)) << ',' << format_double(sd_of(rule_mcc)) << ','
        << format_double(mean_of(rule_acc)) << '\n';
    report[set.id]["harmful_words"] = {
        {"mcc_mean", mean_of(rule_mcc)},
        {"mcc_sd", sd_of(rule_mcc)},
        {"accuracy_mean", mean_of(rule_acc)},
        {"confusion_total",
         {{"tn", rule_total.tn}, {"fp", rule_total.fp}, {"fn", rule_total.fn}, {"tp", rule_total.tp}}},
        {"words", config.heuristics.harmful_words}};

    // confidence coin flip, expectation over flip seeds
    std::vector<double> flip_mcc, flip_acc;
    for (int k = 0; k < config.coinflip_seeds; ++k) {
      const std::uint64_t seed = config.heuristics.rng_seed + static_cast<std::uint64_t>(k);
      const SplitPlan plan = split_train_balanced_test(set.corpus, config.train_ratio, seed);
      const Corpus test_sub = subset(set.corpus, plan.test_ids);
      std::vector<int> labels;
      labels.reserve(test_sub.size());
      for (const auto& rec : test_sub.records) labels.push_back(grade_value(rec.grade));
      const std::vector<int> preds = confidence_coinflip(test_sub, seed);
      const ConfusionMatrix cm = confusion(preds, labels);
      flip_mcc.push_back(mcc(cm));
      flip_acc.push_back(cm.accuracy());
    }
    csv << set.id << ",confidence_coinflip," << flip_mcc.size() << ','
        << format_double(mean_of(flip_mcc)) << ',' << format_double(sd_of(flip_mcc)) << ','
        << format_double(mean_of(flip_acc)) << '\n';
    report[set.id]["confidence_coinflip"] = {{"mcc_mean", mean_of(flip_mcc)},
                                             {"mcc_sd", sd_of(flip_mcc)},
                                             {"accuracy_mean", mean_of(flip_acc)},
                                             {"seeds", flip_mcc.size()}};
  }
  write_text_file(out_dir / "heuristics.csv", csv.str());
  return report;
}

json config_echo(const RunConfig& config) {
  json echo;
  for (const auto& [set_id, spec] : config.corpora) {
    echo["corpora"][set_id] = {{"path", spec.path},
                               {"strict", spec.strict},
                               {"agreement_filter", spec.agreement_filter},
                               {"sentiment_path", spec.sentiment_path}};
  }
  echo["features"] = {{"sets", config.feature_sets},
                      {"word_list", config.word_list},
                      {"word_source", config.word_source},
                      {"word_top_k", config.word_top_k},
                      {"counts", config.word_counts},
                      {"standardize", config.standardize},
                      {"hedging_lexicon", config.hedging_lexicon_path}};
  echo["lexicon"] = {{"min_occurrences", config.lexicon.min_occurrences},
                     {"resamples", config.lexicon.bootstrap_resamples},
                     {"level", config.lexicon.bootstrap_level},
                     {"seed", config.lexicon.bootstrap_seed},
                     {"top_k", config.lexicon_top_k}};
  echo["classifier"] = {{"learning_rate", config.classifier.learning_rate},
                        {"epochs", config.classifier.epochs},
                        {"batch_size", config.classifier.batch_size},
                        {"adam_beta1", config.classifier.adam_beta1},
                        {"adam_beta2", config.classifier.adam_beta2},
                        {"adam_epsilon", config.classifier.adam_epsilon},
                        {"train_ratio", config.train_ratio},
                        {"cross_test_mode", config.cross_test_mode},
                        {"seeds", config.seeds},
                        {"evaluations", config.evaluations}};
  echo["heuristics"] = {{"harmful_words", config.heuristics.harmful_words},
                        {"seed", config.heuristics.rng_seed},
                        {"coinflip_seeds", config.coinflip_seeds}};
  // the output directory and thread count are deliberately not echoed: the
  // manifest must be byte-identical across runs that only differ in where
  // or how parallel they executed
  echo["analysis"] = {{"group_keys", config.group_keys},
                      {"bin_min_count", config.bin_min_count}};
  return echo;
}

}  // namespace

void run_pipeline(const RunConfig& config, bool analysis_only) {
  const fs::path out_dir(config.output_dir);
  fs::create_directories(out_dir);

  const unsigned threads =
      config.threads > 0 ? config.threads
                         : std::max(1u, std::thread::hardware_concurrency());

  const std::vector<LoadedSet> sets = load_all(config);

  HedgingLexicon hedge_lex = config.hedging_lexicon_path.empty()
                                 ? HedgingLexicon::default_lexicon()
                                 : HedgingLexicon::from_file(config.hedging_lexicon_path);

  // ingest stats
  json ingest;
  for (const auto& set : sets) {
    json s;
    s["records"] = set.corpus.size();
    s["loaded"] = set.loaded;
    s["skipped_lines"] = set.skipped;
    s["accuracy_pct"] = 100.0 * set.corpus.accuracy();
    s["sentiment_records"] = set.sentiment_count;
    if (set.agreement_rate) s["agreement_rate"] = *set.agreement_rate;
    ingest[set.id] = std::move(s);
  }
  write_json_file(out_dir / "ingest_stats.json", ingest);

  const json analysis = analysis_stage(sets, config, hedge_lex, out_dir);
  write_json_file(out_dir / "analysis.json", analysis);

  std::vector<std::string> harmful_surface;
  json lexicon_report = lexicon_stage(sets, config, out_dir, threads, harmful_surface);
  write_json_file(out_dir / "lexicon_words.json", lexicon_report);

  json manifest;
  manifest["tool"] = "cotcheck";
  manifest["config"] = config_echo(config);

  if (!analysis_only) {
    // word list per training set
    std::map<std::string, std::vector<std::string>> word_lists;
    for (const auto& [train_id, test_id] : config.evaluations) {
      (void)test_id;
      if (word_lists.count(train_id)) continue;
      if (config.word_source == "train_lexicon") {
        // derived from the training corpus alone so no test-set statistics
        // can leak across benchmarks
        const Corpus* train_corpus = nullptr;
        for (const auto& set : sets) {
          if (set.id == train_id) train_corpus = &set.corpus;
        }
        LexiconConfig cfg = config.lexicon;
        cfg.lemma_mode = false;
        cfg.threads = threads;
        cfg.bootstrap_resamples = 0;
        const auto entries = build_lexicon({{train_id, train_corpus}}, cfg);
        word_lists[train_id] = entries.empty()
                                   ? std::vector<std::string>{}
                                   : select_consistent(entries, WordDirection::harmful,
                                                       config.word_top_k);
      } else {
        word_lists[train_id] =
            config.word_list.empty() ? default_word_features() : config.word_list;
      }
      if (word_lists[train_id].empty()) {
        throw DataError("no classifier word list available for " + train_id);
      }
    }
    for (const auto& [train_id, words] : word_lists) {
      manifest["word_lists"][train_id] = words;
    }

    ClassifierOutputs clf =
        classifier_stage(sets, config, hedge_lex, word_lists, out_dir, threads);
    const json heuristics_report = heuristics_stage(sets, config, out_dir);
    write_json_file(out_dir / "heuristics.json", heuristics_report);

    json summary;
    summary["classifier"] = clf.summary;
    summary["heuristics"] = heuristics_report;
    summary["analysis"] = analysis;
    write_json_file(out_dir / "summary.json", summary);
  }

  write_json_file(out_dir / "manifest.json", manifest);
}

}  // namespace cotcheck
