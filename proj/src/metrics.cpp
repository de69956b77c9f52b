#include "cotcheck/metrics.hpp"

#include "cotcheck/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace cotcheck {
namespace {

void check_binary(const std::vector<int>& v, const char* what) {
  for (int x : v) {
    if (x != 0 && x != 1) throw DataError(std::string(what) + " must contain only 0/1");
  }
}

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
double betacf(double a, double b, double x) {
  constexpr int max_iter = 300;
  constexpr double eps = 3e-14;
  constexpr double fpmin = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_iter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

double incbeta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

struct OlsFit {
  double slope = 0.0;
  double stderr_slope = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

OlsFit ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mean_x) * (x[i] - mean_x);
    sxy += (x[i] - mean_x) * (y[i] - mean_y);
  }
  if (sxx <= 0.0) throw DataError("degenerate regressor: x is constant");

  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  if (n > 2) {
    const double intercept = mean_y - fit.slope * mean_x;
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double resid = y[i] - (intercept + fit.slope * x[i]);
      sse += resid * resid;
    }
    const double sigma2 = sse / static_cast<double>(n - 2);
    fit.stderr_slope = std::sqrt(sigma2 / sxx);
    if (fit.stderr_slope > 0.0) {
      fit.p_value = student_t_sf_two_sided(fit.slope / fit.stderr_slope,
                                           static_cast<double>(n - 2));
    } else {
      fit.p_value = (fit.slope == 0.0) ? 1.0 : 0.0;
    }
  }
  return fit;
}

}  // namespace

double student_t_sf_two_sided(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  if (dof <= 0.0) throw DataError("student t: dof must be positive");
  const double x = dof / (dof + t * t);
  // P(|T| >= t) = I_{dof/(dof+t^2)}(dof/2, 1/2)
  return std::clamp(incbeta(dof / 2.0, 0.5, x), 0.0, 1.0);
}

double ConfusionMatrix::accuracy() const {
  const std::uint64_t t = total();
  if (t == 0) throw DataError("confusion matrix is empty");
  return static_cast<double>(tp + tn) / static_cast<double>(t);
}

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) {
    throw DataError("confusion: preds and labels differ in length");
  }
  if (preds.empty()) throw DataError("confusion: empty input");
  check_binary(preds, "preds");
  check_binary(labels, "labels");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] == 1) {
      preds[i] == 1 ? ++cm.tp : ++cm.fn;
    } else {
      preds[i] == 1 ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

double mcc(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("mcc: empty confusion matrix");
  const double tp = static_cast<double>(cm.tp);
  const double tn = static_cast<double>(cm.tn);
  const double fp = static_cast<double>(cm.fp);
  const double fn = static_cast<double>(cm.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw DataError("roc_auc: scores and labels must be equal-length and non-empty");
  }
  check_binary(labels, "labels");
  for (double s : scores) {
    if (!std::isfinite(s)) throw DataError("roc_auc: scores must be finite");
  }
  const std::size_t pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  RocResult result;
  result.curve.emplace_back(0.0, 0.0);
  std::size_t tp = 0, fp = 0;
  double auc = 0.0;
  double prev_fpr = 0.0, prev_tpr = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    // Group equal scores so ties move diagonally in one step.
    const double score = scores[order[i]];
    while (i < order.size() && scores[order[i]] == score) {
      labels[order[i]] == 1 ? ++tp : ++fp;
      ++i;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    result.curve.emplace_back(fpr, tpr);
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  result.auc = auc;
  return result;
}

RocBand roc_band(const std::vector<std::vector<std::pair<double, double>>>& curves,
                 std::size_t grid_points) {
  if (curves.size() < 2) throw DataError("roc_band: need at least two curves");
  for (const auto& curve : curves) {
    if (curve.empty()) throw DataError("roc_band: empty curve");
  }
  RocBand band;
  band.fpr.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    band.fpr[g] = static_cast<double>(g) / static_cast<double>(grid_points - 1);
  }

  auto interp_tpr = [](const std::vector<std::pair<double, double>>& curve, double fpr) {
    if (fpr <= curve.front().first) return curve.front().second;
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (fpr <= curve[i].first) {
        const auto& [x0, y0] = curve[i - 1];
        const auto& [x1, y1] = curve[i];
        if (x1 == x0) return y1;  // vertical step: take the upper value
        const double t = (fpr - x0) / (x1 - x0);
        return y0 + t * (y1 - y0);
      }
    }
    return curve.back().second;
  };

  const double n = static_cast<double>(curves.size());
  band.mean_tpr.resize(grid_points);
  band.lo.resize(grid_points);
  band.hi.resize(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    double sum = 0.0;
    std::vector<double> vals;
    vals.reserve(curves.size());
    for (const auto& curve : curves) {
      const double v = interp_tpr(curve, band.fpr[g]);
      vals.push_back(v);
      sum += v;
    }
    const double mean = sum / n;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = (curves.size() > 1) ? std::sqrt(var / (n - 1.0)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(n);
    band.mean_tpr[g] = mean;
    band.lo[g] = mean - half;
    band.hi[g] = mean + half;
  }
  return band;
}

CalibrationReport calibration_error(const std::vector<std::pair<double, int>>& records) {
  if (records.empty()) throw DataError("calibration_error: no records");
  CalibrationReport report;
  report.bins.resize(10);
  std::vector<double> conf_sum(10, 0.0);
  std::vector<std::size_t> correct(10, 0);
  for (std::size_t b = 0; b < 10; ++b) {
    report.bins[b].lo = 10.0 * static_cast<double>(b);
    report.bins[b].hi = 10.0 * static_cast<double>(b + 1);
  }
  for (const auto& [conf, grade] : records) {
    if (!(conf >= 0.0 && conf <= 100.0)) {
      throw DataError("calibration_error: confidence out of [0,100]");
    }
    if (grade != 0 && grade != 1) throw DataError("calibration_error: grade must be 0/1");
    std::size_t b = static_cast<std::size_t>(conf / 10.0);
    if (b > 9) b = 9;  // 100% belongs to the closed last bin
    ++report.bins[b].count;
    conf_sum[b] += conf;
    correct[b] += static_cast<std::size_t>(grade);
  }
  double err_sum = 0.0;
  std::size_t nonempty = 0;
  for (std::size_t b = 0; b < 10; ++b) {
    auto& bin = report.bins[b];
    if (bin.count == 0) continue;
    bin.mean_confidence_pct = conf_sum[b] / static_cast<double>(bin.count);
    bin.accuracy_pct = 100.0 * static_cast<double>(correct[b]) / static_cast<double>(bin.count);
    err_sum += std::fabs(bin.mean_confidence_pct - bin.accuracy_pct);
    ++nonempty;
  }
  report.calibration_error_pct = err_sum / static_cast<double>(nonempty);
  return report;
}

KappaResult cohen_kappa(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw DataError("cohen_kappa: length mismatch");
  if (a.empty()) throw DataError("cohen_kappa: empty input");
  check_binary(a, "a");
  check_binary(b, "b");
  const double n = static_cast<double>(a.size());
  std::size_t agree = 0, a1 = 0, b1 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) ++agree;
    a1 += static_cast<std::size_t>(a[i]);
    b1 += static_cast<std::size_t>(b[i]);
  }
  const double po = static_cast<double>(agree) / n;
  const double pa1 = static_cast<double>(a1) / n;
  const double pb1 = static_cast<double>(b1) / n;
  const double pe = pa1 * pb1 + (1.0 - pa1) * (1.0 - pb1);

  KappaResult result;
  result.agreement = po;
  if (pe >= 1.0) {
    result.kappa = (po >= 1.0) ? 1.0 : 0.0;
  } else {
    result.kappa = (po - pe) / (1.0 - pe);
  }
  return result;
}

Correlation pointbiserial(const std::vector<double>& x, const std::vector<int>& y) {
  if (x.size() != y.size()) throw DataError("pointbiserial: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw DataError("pointbiserial: need n >= 3");
  check_binary(y, "y");
  const std::size_t pos = static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  if (pos == 0 || pos == n) throw DataError("pointbiserial: both classes must be present");

  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double mean_y = static_cast<double>(pos) / static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mean_x;
    const double dy = static_cast<double>(y[i]) - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0) throw DataError("pointbiserial: x is constant");

  Correlation c;
  c.n = n;
  c.r = sxy / std::sqrt(sxx * syy);
  c.r = std::clamp(c.r, -1.0, 1.0);
  const double dof = static_cast<double>(n - 2);
  if (std::fabs(c.r) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.r * std::sqrt(dof / (1.0 - c.r * c.r));
    c.p = student_t_sf_two_sided(t, dof);
  }
  return c;
}

LengthSlope length_slope(const std::vector<std::pair<std::size_t, int>>& records) {
  if (records.size() < 3) throw DataError("length_slope: need n >= 3");
  std::vector<double> x, y;
  x.reserve(records.size());
  y.reserve(records.size());
  for (const auto& [len, grade] : records) {
    if (grade != 0 && grade != 1) throw DataError("length_slope: grade must be 0/1");
    x.push_back(static_cast<double>(len));
    y.push_back(100.0 * static_cast<double>(grade));
  }
  const OlsFit fit = ols_slope(x, y);
  LengthSlope slope;
  slope.per_1000_words = fit.slope * 1000.0;
  slope.stderr_per_1000 = fit.stderr_slope * 1000.0;
  slope.p_value = fit.p_value;
  slope.n = fit.n;
  return slope;
}

LengthSlope length_slope_binned(const std::vector<std::pair<std::size_t, int>>& records,
                                double bin_width, std::size_t min_count) {
  std::vector<std::pair<double, int>> as_double;
  as_double.reserve(records.size());
  for (const auto& [len, grade] : records) {
    as_double.emplace_back(static_cast<double>(len), grade);
  }
  const auto points = binned_accuracy(as_double, bin_width, min_count, false);
  if (points.size() < 3) {
    throw DataError("length_slope_binned: fewer than 3 populated bins");
  }
  std::vector<double> x, y;
  for (const auto& p : points) {
    x.push_back(p.center);
    y.push_back(100.0 * p.accuracy);
  }
  const OlsFit fit = ols_slope(x, y);
  LengthSlope slope;
  slope.per_1000_words = fit.slope * 1000.0;
  slope.stderr_per_1000 = fit.stderr_slope * 1000.0;
  slope.p_value = fit.p_value;
  slope.n = fit.n;
  return slope;
}

std::vector<BinnedPoint> binned_accuracy(const std::vector<std::pair<double, int>>& records,
                                         double bin_width, std::size_t min_count,
                                         bool mean_center) {
  if (bin_width <= 0.0) throw DataError("binned_accuracy: bin_width must be positive");
  if (records.empty()) return {};

  double offset = 0.0;
  if (mean_center) {
    double sum = 0.0;
    for (const auto& [v, g] : records) {
      (void)g;
      sum += v;
    }
    offset = sum / static_cast<double>(records.size());
  }

  // Bins are centered on multiples of bin_width: bin k covers
  // [k*w - w/2, k*w + w/2).
  std::unordered_map<long long, std::pair<std::size_t, std::size_t>> bins;  // idx -> (correct, total)
  for (const auto& [v, grade] : records) {
    if (grade != 0 && grade != 1) throw DataError("binned_accuracy: grade must be 0/1");
    const double centered = v - offset;
    const long long idx = static_cast<long long>(std::floor(centered / bin_width + 0.5));
    auto& [correct, total] = bins[idx];
    ++total;
    correct += static_cast<std::size_t>(grade);
  }

  std::vector<BinnedPoint> out;
  for (const auto& [idx, tally] : bins) {
    if (tally.second < min_count) continue;
    BinnedPoint p;
    p.center = static_cast<double>(idx) * bin_width;
    p.count = tally.second;
    p.accuracy = static_cast<double>(tally.first) / static_cast<double>(tally.second);
    out.push_back(p);
  }
  std::sort(out.begin(), out.end(),
            [](const BinnedPoint& a, const BinnedPoint& b) { return a.center < b.center; });
  return out;
}

SplitPlan split_train_balanced_test(const Corpus& corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split: ratio must be in (0,1)");
  const std::size_t n = corpus.size();
  if (n < 4) throw DataError("split: corpus too small");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);

  const std::size_t n_train = static_cast<std::size_t>(ratio * static_cast<double>(n));
  SplitPlan plan;
  plan.seed = seed;
  plan.train_ids.reserve(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    plan.train_ids.push_back(corpus.records[order[i]].record_id);
  }

  std::size_t held_correct = 0, held_incorrect = 0;
  for (std::size_t i = n_train; i < n; ++i) {
    corpus.records[order[i]].grade == Grade::correct ? ++held_correct : ++held_incorrect;
  }
  if (held_correct == 0 || held_incorrect == 0) {
    throw DataError("split: held-out portion is missing a class");
  }
  const std::size_t per_class = std::min(held_correct, held_incorrect);

  // The held-out sequence is already in seeded-shuffled order, so taking the
  // first per_class of each class is a uniform downsample.
  std::size_t took_correct = 0, took_incorrect = 0;
  for (std::size_t i = n_train; i < n; ++i) {
    const auto& rec = corpus.records[order[i]];
    if (rec.grade == Grade::correct) {
      if (took_correct < per_class) {
        plan.test_ids.push_back(rec.record_id);
        ++took_correct;
      }
    } else {
      if (took_incorrect < per_class) {
        plan.test_ids.push_back(rec.record_id);
        ++took_incorrect;
      }
    }
  }
  std::sort(plan.train_ids.begin(), plan.train_ids.end());
  std::sort(plan.test_ids.begin(), plan.test_ids.end());
  return plan;
}

Corpus subset(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::unordered_set<std::string> wanted(ids.begin(), ids.end());
  Corpus out;
  out.provenance = corpus.provenance;
  for (const auto& rec : corpus.records) {
    if (wanted.count(rec.record_id)) out.records.push_back(rec);
  }
  if (out.records.size() != wanted.size()) {
    throw DataError("subset: some requested record ids are not in the corpus");
  }
  return out;
}

}  // namespace cotcheck
