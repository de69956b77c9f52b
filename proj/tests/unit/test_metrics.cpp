#include "cotcheck/metrics.hpp"

#include "../support/synthetic.hpp"
#include "cotcheck/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

using namespace cotcheck;

TEST_CASE("confusion counts") {
  CHECK_THROWS_AS(confusion({1, 0}, {1}), DataError);
  const ConfusionMatrix cm = confusion({1, 0, 1}, {1, 0, 1});
  CHECK(cm.tn == 1);
  CHECK(cm.tp == 2);
  CHECK(cm.fp == 0);
  CHECK(cm.fn == 0);

  const ConfusionMatrix all_ones = confusion({1, 1, 1, 1}, {0, 1, 0, 1});
  CHECK(all_ones.fp == 2);
  CHECK(all_ones.tp == 2);
}

TEST_CASE("confusion equals a naive pairwise count on random vectors") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(200);
    std::vector<int> preds(n), labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.bernoulli(0.4) ? 1 : 0;
      labels[i] = rng.bernoulli(0.6) ? 1 : 0;
    }
    std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == 1 && preds[i] == 1) ++tp;
      if (labels[i] == 1 && preds[i] == 0) ++fn;
      if (labels[i] == 0 && preds[i] == 1) ++fp;
      if (labels[i] == 0 && preds[i] == 0) ++tn;
    }
    const ConfusionMatrix cm = confusion(preds, labels);
    CHECK(cm.tn == tn);
    CHECK(cm.fp == fp);
    CHECK(cm.fn == fn);
    CHECK(cm.tp == tp);
  }
}

TEST_CASE("mcc reproduces the published confusion-matrix values") {
  // (tn, fp, fn, tp) -> published MCC at 3 decimals
  const std::vector<std::pair<ConfusionMatrix, double>> cases = {
      {{40, 30, 24, 46}, 0.229},   {{241, 276, 123, 394}, 0.239},
      {{355, 162, 172, 345}, 0.354}, {{57, 13, 40, 30}, 0.263},
      {{46, 24, 31, 39}, 0.215},   {{317, 200, 160, 357}, 0.305},
      {{1, 69, 0, 70}, 0.085},     {{35, 482, 20, 497}, 0.065},
  };
  for (const auto& [cm, expected] : cases) {
    CHECK(std::round(mcc(cm) * 1000.0) / 1000.0 == doctest::Approx(expected));
  }
}

TEST_CASE("mcc edge cases and invariances") {
  CHECK(mcc({10, 0, 0, 10}) == doctest::Approx(1.0));
  CHECK(mcc({0, 10, 10, 0}) == doctest::Approx(-1.0));
  CHECK(mcc({5, 5, 0, 0}) == doctest::Approx(0.0));  // zero marginal -> 0

  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    ConfusionMatrix cm{rng.uniform_index(50), rng.uniform_index(50), rng.uniform_index(50),
                       1 + rng.uniform_index(50)};
    const double value = mcc(cm);
    CHECK(value >= -1.0);
    CHECK(value <= 1.0);
    // swapping both axes (relabeling the classes) leaves mcc unchanged
    const ConfusionMatrix swapped{cm.tp, cm.fn, cm.fp, cm.tn};
    CHECK(mcc(swapped) == doctest::Approx(value));
    // swapping predictions only negates it
    const ConfusionMatrix pred_swapped{cm.fp, cm.tn, cm.tp, cm.fn};
    CHECK(mcc(pred_swapped) == doctest::Approx(-value));
  }
}

TEST_CASE("roc_auc on separable and degenerate inputs") {
  CHECK(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}).auc == doctest::Approx(1.0));
  CHECK(roc_auc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}).auc == doctest::Approx(0.0));
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), DataError);
  CHECK_THROWS_AS(roc_auc({0.5, std::nan("")}, {1, 0}), DataError);
  // all-tied scores: the curve is the diagonal
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}).auc == doctest::Approx(0.5));
}

namespace {

// Mann-Whitney pair counting with ties counted half.
double auc_pairwise(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

}  // namespace

TEST_CASE("roc_auc equals the Mann-Whitney statistic") {
  Rng rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 10 + rng.uniform_index(80);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so score ties actually occur
      scores[i] = std::floor(rng.uniform(0.0, 10.0)) / 10.0;
      labels[i] = rng.bernoulli(0.5) ? 1 : 0;
      (labels[i] == 1 ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    CHECK(roc_auc(scores, labels).auc == doctest::Approx(auc_pairwise(scores, labels)));
  }
}

TEST_CASE("roc_auc permutation null is near one half") {
  Rng rng(37);
  const std::size_t n = 4000;
  std::vector<double> scores(n);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform01();
    labels[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  CHECK(roc_auc(scores, labels).auc == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::fabs(roc_auc(scores, labels).auc - 0.5) < 0.05);
}

TEST_CASE("auc of negated scores is one minus auc") {
  Rng rng(43);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 200; ++i) {
    scores.push_back(rng.uniform01());
    labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
  }
  labels[0] = 0;
  labels[1] = 1;
  std::vector<double> negated;
  for (double s : scores) negated.push_back(-s);
  CHECK(roc_auc(negated, labels).auc == doctest::Approx(1.0 - roc_auc(scores, labels).auc));
}

TEST_CASE("roc_band aggregation") {
  const std::vector<std::pair<double, double>> curve = {{0.0, 0.0}, {0.25, 0.5}, {1.0, 1.0}};
  SUBCASE("identical curves have a zero-width band") {
    const RocBand band = roc_band({curve, curve, curve});
    for (std::size_t g = 0; g < band.fpr.size(); ++g) {
      CHECK(band.lo[g] == doctest::Approx(band.hi[g]));
      CHECK(band.mean_tpr[g] == doctest::Approx(band.lo[g]));
    }
  }
  SUBCASE("symmetric offsets average to the midpoint") {
    std::vector<std::pair<double, double>> up = {{0.0, 0.1}, {1.0, 1.0}};
    std::vector<std::pair<double, double>> down = {{0.0, 0.0}, {1.0, 0.9}};
    const RocBand band = roc_band({up, down});
    // at fpr=0: mean of 0.1 and 0.0; at fpr=1: mean of 1.0 and 0.9
    CHECK(band.mean_tpr.front() == doctest::Approx(0.05));
    CHECK(band.mean_tpr.back() == doctest::Approx(0.95));
  }
  SUBCASE("band matches direct per-gridpoint statistics on synthetic curves") {
    Rng rng(51);
    std::vector<std::vector<std::pair<double, double>>> curves;
    for (int c = 0; c < 30; ++c) {
      std::vector<std::pair<double, double>> cur = {{0.0, 0.0}};
      double x = 0.0, y = 0.0;
      while (x < 1.0) {
        x = std::min(1.0, x + rng.uniform(0.05, 0.2));
        y = std::min(1.0, y + rng.uniform(0.0, 0.3));
        cur.emplace_back(x, y);
      }
      cur.back().second = 1.0;
      curves.push_back(std::move(cur));
    }
    const RocBand band = roc_band(curves, 21);
    // recompute mean and half-width directly at a few grid points
    auto interp = [](const std::vector<std::pair<double, double>>& cur, double fx) {
      if (fx <= cur.front().first) return cur.front().second;
      for (std::size_t i = 1; i < cur.size(); ++i) {
        if (fx <= cur[i].first) {
          const auto [x0, y0] = cur[i - 1];
          const auto [x1, y1] = cur[i];
          if (x1 == x0) return y1;
          return y0 + (fx - x0) / (x1 - x0) * (y1 - y0);
        }
      }
      return cur.back().second;
    };
    for (std::size_t g : {std::size_t{0}, std::size_t{7}, std::size_t{20}}) {
      std::vector<double> vals;
      for (const auto& cur : curves) vals.push_back(interp(cur, band.fpr[g]));
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      const double sd = std::sqrt(var / static_cast<double>(vals.size() - 1));
      const double half = 1.96 * sd / std::sqrt(static_cast<double>(vals.size()));
      CHECK(band.mean_tpr[g] == doctest::Approx(mean));
      CHECK(band.hi[g] - band.mean_tpr[g] == doctest::Approx(half));
    }
  }
  CHECK_THROWS_AS(roc_band({curve}), DataError);
}

TEST_CASE("calibration_error decile binning") {
  SUBCASE("perfectly calibrated certain answers") {
    std::vector<std::pair<double, int>> records(20, {100.0, 1});
    const CalibrationReport report = calibration_error(records);
    CHECK(report.calibration_error_pct == doctest::Approx(0.0));
  }
  SUBCASE("hand-computed single-bin case") {
    const CalibrationReport report =
        calibration_error({{90.0, 0}, {95.0, 0}, {100.0, 1}});
    std::size_t nonempty = 0;
    for (const auto& bin : report.bins) {
      if (bin.count > 0) ++nonempty;
    }
    CHECK(nonempty == 1);
    CHECK(report.calibration_error_pct == doctest::Approx(95.0 - 100.0 / 3.0).epsilon(1e-9));
  }
  SUBCASE("bins are the ten decile intervals, last closed at 100") {
    const CalibrationReport report = calibration_error({{0.0, 0}, {9.999, 0}, {10.0, 1}, {100.0, 1}});
    REQUIRE(report.bins.size() == 10);
    CHECK(report.bins[0].count == 2);
    CHECK(report.bins[1].count == 1);
    CHECK(report.bins[9].count == 1);
    CHECK(report.bins[9].lo == doctest::Approx(90.0));
    CHECK(report.bins[9].hi == doctest::Approx(100.0));
  }
  SUBCASE("order invariance") {
    std::vector<std::pair<double, int>> a = {{15, 1}, {95, 0}, {42, 1}, {15, 0}, {77, 1}};
    std::vector<std::pair<double, int>> b = {{77, 1}, {15, 0}, {95, 0}, {42, 1}, {15, 1}};
    CHECK(calibration_error(a).calibration_error_pct ==
          doctest::Approx(calibration_error(b).calibration_error_pct));
  }
}

TEST_CASE("cohen_kappa") {
  SUBCASE("identical lists") {
    const KappaResult r = cohen_kappa({1, 0, 1, 0}, {1, 0, 1, 0});
    CHECK(r.kappa == doctest::Approx(1.0));
    CHECK(r.agreement == doctest::Approx(1.0));
  }
  SUBCASE("independent-looking hand case: po = pe = 0.5") {
    const KappaResult r = cohen_kappa({1, 1, 0, 0}, {1, 0, 1, 0});
    CHECK(r.agreement == doctest::Approx(0.5));
    CHECK(r.kappa == doctest::Approx(0.0));
  }
  SUBCASE("degenerate identical constants") {
    const KappaResult r = cohen_kappa({1, 1, 1}, {1, 1, 1});
    CHECK(r.kappa == doctest::Approx(1.0));
  }
  SUBCASE("kappa never exceeds agreement") {
    Rng rng(61);
    for (int trial = 0; trial < 50; ++trial) {
      const std::size_t n = 2 + rng.uniform_index(40);
      std::vector<int> a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.bernoulli(0.5) ? 1 : 0;
        b[i] = rng.bernoulli(0.5) ? 1 : 0;
      }
      const KappaResult r = cohen_kappa(a, b);
      CHECK(r.kappa <= r.agreement + 1e-12);
    }
  }
  CHECK_THROWS_AS(cohen_kappa({1, 0}, {1}), DataError);
}

TEST_CASE("pointbiserial extremes and errors") {
  const Correlation perfect = pointbiserial({1.0, 2.0, 3.0, 4.0}, {0, 0, 1, 1});
  CHECK(perfect.r > 0.8);
  const Correlation exact = pointbiserial({0.0, 0.0, 1.0, 1.0}, {0, 0, 1, 1});
  CHECK(exact.r == doctest::Approx(1.0));
  CHECK(exact.p == doctest::Approx(0.0));
  CHECK_THROWS_AS(pointbiserial({1.0, 1.0, 1.0}, {0, 1, 0}), DataError);
  CHECK_THROWS_AS(pointbiserial({1.0, 2.0, 3.0}, {1, 1, 1}), DataError);
  CHECK_THROWS_AS(pointbiserial({1.0, 2.0}, {0, 1}), DataError);
}

TEST_CASE("pointbiserial matches a direct covariance computation") {
  Rng rng(71);
  const std::size_t n = 200;
  std::vector<double> x(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = rng.bernoulli(0.4) ? 1 : 0;
    x[i] = 0.8 * y[i] + rng.uniform(-1.0, 1.0);  // planted effect
  }
  const Correlation c = pointbiserial(x, y);

  // direct formula: r = cov(x, y) / (sd_x * sd_y), population moments
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double cxy = 0.0, vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cxy += (x[i] - mx) * (y[i] - my);
    vx += (x[i] - mx) * (x[i] - mx);
    vy += (y[i] - my) * (y[i] - my);
  }
  const double r_direct = cxy / std::sqrt(vx * vy);
  CHECK(c.r == doctest::Approx(r_direct).epsilon(1e-12));
  CHECK(c.p < 0.001);  // the planted effect is strongly significant at n=200
}

TEST_CASE("student t tail probabilities match reference values") {
  // two-sided P(|T| >= t); references from standard t tables
  CHECK(student_t_sf_two_sided(2.228, 10.0) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(student_t_sf_two_sided(1.96, 1e6) == doctest::Approx(0.05).epsilon(0.01));
  CHECK(student_t_sf_two_sided(0.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("length_slope") {
  SUBCASE("grade independent of length is near zero") {
    Rng rng(84);
    std::vector<std::pair<std::size_t, int>> records;
    for (int i = 0; i < 40000; ++i) {
      records.emplace_back(100 + rng.uniform_index(5000), rng.bernoulli(0.5) ? 1 : 0);
    }
    const LengthSlope slope = length_slope(records);
    CHECK(std::fabs(slope.per_1000_words) < 1.0);
    CHECK(std::fabs(slope.per_1000_words) <= 4.0 * slope.stderr_per_1000);
  }
  SUBCASE("planted linear probability model is recovered within 5 percent") {
    // P(correct) = 0.9 - 0.00005 * length  => slope -5 points per 1000 words
    Rng rng(89);
    std::vector<std::pair<std::size_t, int>> records;
    for (int i = 0; i < 60000; ++i) {
      const std::size_t len = rng.uniform_index(8000);
      const double p = 0.9 - 0.00005 * static_cast<double>(len);
      records.emplace_back(len, rng.bernoulli(p) ? 1 : 0);
    }
    const LengthSlope slope = length_slope(records);
    CHECK(slope.per_1000_words == doctest::Approx(-5.0).epsilon(0.05));
    CHECK(slope.p_value < 0.001);
  }
  SUBCASE("degenerate regressor") {
    CHECK_THROWS_AS(length_slope({{100, 1}, {100, 0}, {100, 1}}), DataError);
  }
  SUBCASE("binned estimator agrees on clean linear data") {
    Rng rng(97);
    std::vector<std::pair<std::size_t, int>> records;
    for (int i = 0; i < 60000; ++i) {
      const std::size_t len = rng.uniform_index(8000);
      const double p = 0.9 - 0.00005 * static_cast<double>(len);
      records.emplace_back(len, rng.bernoulli(p) ? 1 : 0);
    }
    const LengthSlope binned = length_slope_binned(records, 1000.0, 30);
    CHECK(binned.per_1000_words == doctest::Approx(-5.0).epsilon(0.12));
  }
}

TEST_CASE("binned_accuracy") {
  SUBCASE("bins below min_count are dropped") {
    std::vector<std::pair<double, int>> records;
    for (int i = 0; i < 40; ++i) records.emplace_back(1.0, 1);
    for (int i = 0; i < 10; ++i) records.emplace_back(5.0, 0);
    const auto points = binned_accuracy(records, 1.0, 30, false);
    REQUIRE(points.size() == 1);
    CHECK(points[0].center == doctest::Approx(1.0));
    CHECK(points[0].count == 40);
    CHECK(points[0].accuracy == doctest::Approx(1.0));
  }
  SUBCASE("mean centering a constant feature lands in the zero bin") {
    std::vector<std::pair<double, int>> records(35, {7.3, 1});
    const auto points = binned_accuracy(records, 0.1, 30, true);
    REQUIRE(points.size() == 1);
    CHECK(points[0].center == doctest::Approx(0.0));
  }
  SUBCASE("memberships equal naive assignment on a bimodal feature") {
    Rng rng(101);
    std::vector<std::pair<double, int>> records;
    for (int i = 0; i < 500; ++i) {
      const double v = rng.bernoulli(0.5) ? rng.uniform(-2.0, -1.0) : rng.uniform(1.0, 2.0);
      records.emplace_back(v, rng.bernoulli(0.5) ? 1 : 0);
    }
    const double width = 0.5;
    const auto points = binned_accuracy(records, width, 1, false);
    std::map<long long, std::pair<std::size_t, std::size_t>> naive;
    for (const auto& [v, g] : records) {
      const long long idx = static_cast<long long>(std::floor(v / width + 0.5));
      ++naive[idx].second;
      naive[idx].first += static_cast<std::size_t>(g);
    }
    REQUIRE(points.size() == naive.size());
    for (const auto& p : points) {
      const long long idx = static_cast<long long>(std::llround(p.center / width));
      REQUIRE(naive.count(idx) == 1);
      CHECK(p.count == naive[idx].second);
      CHECK(p.accuracy == doctest::Approx(static_cast<double>(naive[idx].first) /
                                          static_cast<double>(naive[idx].second)));
    }
  }
  CHECK_THROWS_AS(binned_accuracy({{1.0, 1}}, 0.0, 1, false), DataError);
}

TEST_CASE("split_train_balanced_test") {
  Corpus corpus = testsupport::random_corpus(100, 0.1, 7);
  // force exactly 10 correct for the hand trace
  for (auto& rec : corpus.records) {
    rec.grade = Grade::incorrect;
  }
  for (std::size_t i = 0; i < 10; ++i) corpus.records[i * 7].grade = Grade::correct;

  const SplitPlan plan = split_train_balanced_test(corpus, 0.8, 5);
  CHECK(plan.train_ids.size() == 80);

  const Corpus test_sub = subset(corpus, plan.test_ids);
  std::size_t test_correct = 0, test_incorrect = 0;
  for (const auto& rec : test_sub.records) {
    rec.grade == Grade::correct ? ++test_correct : ++test_incorrect;
  }
  CHECK(test_correct == test_incorrect);
  CHECK(test_correct >= 1);
  CHECK(plan.test_ids.size() == 2 * test_correct);

  SUBCASE("train and test are disjoint subsets of the corpus") {
    std::set<std::string> train(plan.train_ids.begin(), plan.train_ids.end());
    for (const auto& id : plan.test_ids) CHECK(train.count(id) == 0);
    std::set<std::string> all;
    for (const auto& rec : corpus.records) all.insert(rec.record_id);
    for (const auto& id : plan.train_ids) CHECK(all.count(id) == 1);
    for (const auto& id : plan.test_ids) CHECK(all.count(id) == 1);
  }

  SUBCASE("same seed reproduces the identical plan") {
    const SplitPlan again = split_train_balanced_test(corpus, 0.8, 5);
    CHECK(again.train_ids == plan.train_ids);
    CHECK(again.test_ids == plan.test_ids);
  }

  SUBCASE("different seeds differ") {
    const SplitPlan other = split_train_balanced_test(corpus, 0.8, 6);
    CHECK(other.train_ids != plan.train_ids);
  }

  SUBCASE("already balanced corpus loses at most the rounding remainder") {
    Corpus balanced;
    for (int i = 0; i < 50; ++i) {
      balanced.records.push_back(testsupport::make_record("b" + std::to_string(i), i % 2, "text."));
    }
    const SplitPlan p = split_train_balanced_test(balanced, 0.8, 3);
    const Corpus test = subset(balanced, p.test_ids);
    std::size_t c = 0, ic = 0;
    for (const auto& rec : test.records) {
      rec.grade == Grade::correct ? ++c : ++ic;
    }
    CHECK(c == ic);
    // held out 10; downsampling can drop at most one per class
    CHECK(p.test_ids.size() >= 8);
  }

  SUBCASE("single-class held-out portion is an error") {
    Corpus lopsided;
    for (int i = 0; i < 20; ++i) {
      lopsided.records.push_back(testsupport::make_record("x" + std::to_string(i), 0, "text."));
    }
    lopsided.records[0].grade = Grade::correct;
    bool threw = false;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      try {
        split_train_balanced_test(lopsided, 0.8, seed);
      } catch (const DataError&) {
        threw = true;
      }
    }
    CHECK(threw);  // with 1 correct record most splits put it in train
  }
}
