#pragma once

#include "cotcheck/corpus.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace cotcheck {

// Actual 0 = incorrect, actual 1 = correct; predictions likewise.
struct ConfusionMatrix {
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tp = 0;

  std::uint64_t total() const { return tn + fp + fn + tp; }
  double accuracy() const;
};

ConfusionMatrix confusion(const std::vector<int>& preds, const std::vector<int>& labels);

// Matthews correlation coefficient; 0 when any marginal is empty.
double mcc(const ConfusionMatrix& cm);

struct RocResult {
  double auc = 0.0;
  std::vector<std::pair<double, double>> curve;  // (fpr, tpr), from (0,0) to (1,1)
};

// Threshold sweep over the unique scores (ties grouped), trapezoidal AUC.
// Higher scores must indicate the positive class. Requires both classes.
RocResult roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct RocBand {
  std::vector<double> fpr;       // shared grid
  std::vector<double> mean_tpr;
  std::vector<double> lo;        // mean - 1.96 sd/sqrt(n)
  std::vector<double> hi;
};

// Interpolates each curve onto a shared FPR grid and aggregates across seeds.
RocBand roc_band(const std::vector<std::vector<std::pair<double, double>>>& curves,
                 std::size_t grid_points = 101);

struct CalibrationBin {
  double lo = 0.0;   // inclusive, percent
  double hi = 0.0;   // exclusive except the last bin, which closes at 100
  std::size_t count = 0;
  double mean_confidence_pct = 0.0;
  double accuracy_pct = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;  // the 10 decile intervals, in order
  double calibration_error_pct = 0.0;
};

// Decile confidence bins; the error is the unweighted mean over non-empty
// bins of |mean confidence - empirical accuracy| in percent.
CalibrationReport calibration_error(const std::vector<std::pair<double, int>>& records);

struct KappaResult {
  double kappa = 0.0;
  double agreement = 0.0;  // observed agreement
};

// Cohen's kappa with marginal-product chance agreement; defined as 1 when
// observed and chance agreement are both exactly 1.
KappaResult cohen_kappa(const std::vector<int>& a, const std::vector<int>& b);

struct Correlation {
  double r = 0.0;
  double p = 0.0;  // two-sided, Student-t with n-2 dof
  std::size_t n = 0;
};

// Point-biserial correlation of a continuous feature against binary labels.
// Requires n >= 3, non-constant x, and both classes present.
Correlation pointbiserial(const std::vector<double>& x, const std::vector<int>& y);

struct LengthSlope {
  double per_1000_words = 0.0;  // accuracy points per 1000 words
  double stderr_per_1000 = 0.0;
  double p_value = 0.0;         // two-sided, slope = 0
  std::size_t n = 0;
};

// OLS of 100*grade on CoT length, rescaled to points per 1000 words.
LengthSlope length_slope(const std::vector<std::pair<std::size_t, int>>& records);

// Alternative estimator: OLS on per-bin accuracies (bin width in words),
// bins below min_count dropped.
LengthSlope length_slope_binned(const std::vector<std::pair<std::size_t, int>>& records,
                                double bin_width = 1000.0, std::size_t min_count = 30);

struct BinnedPoint {
  double center = 0.0;
  double accuracy = 0.0;
  std::size_t count = 0;
};

// Equal-width bins centered on multiples of bin_width over the (optionally
// mean-centered) feature; bins with fewer than min_count records are omitted.
std::vector<BinnedPoint> binned_accuracy(const std::vector<std::pair<double, int>>& records,
                                         double bin_width, std::size_t min_count = 30,
                                         bool mean_center = false);

struct SplitPlan {
  std::vector<std::string> train_ids;  // sorted
  std::vector<std::string> test_ids;   // sorted; classes balanced
  std::uint64_t seed = 0;
};

// Seeded shuffle; the first floor(ratio*N) records form the (imbalanced)
// training set and the held-out majority class is downsampled to the
// minority count. Throws when the held-out portion misses a class.
SplitPlan split_train_balanced_test(const Corpus& corpus, double ratio, std::uint64_t seed);

// Materializes the records named by ids, in corpus order.
Corpus subset(const Corpus& corpus, const std::vector<std::string>& ids);

// Two-sided tail probability helpers (exposed for tests).
double student_t_sf_two_sided(double t, double dof);

}  // namespace cotcheck
