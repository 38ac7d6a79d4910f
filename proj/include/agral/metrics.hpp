#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "agral/tensor.hpp"

namespace agral {

// C x C pixel counts; entry (truth, predicted).
struct ConfusionMatrix {
  explicit ConfusionMatrix(std::size_t classes)
      : classes(classes), counts(classes * classes, 0) {}

  std::size_t classes;
  std::vector<std::uint64_t> counts;

  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * classes + pred];
  }
  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * classes + pred];
  }
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

// Exact pixel counts; throws DataError on dim mismatch or class id >= C.
ConfusionMatrix confusion(const ClassMask& pred, const ClassMask& truth,
                          std::size_t classes);

// Per-pixel argmax of the sample-averaged class distribution; ties go to
// the lowest class ID.
ClassMask argmax_mask(const ProbabilityStack& stack);

struct IouResult {
  // Per-class IoU; NaN marks classes absent from both prediction and truth.
  std::vector<double> per_class;
  double mean = 0.0;  // over the defined classes only
};

// IoU_c = cm(c,c) / (row_c + col_c - cm(c,c)); throws DataError when every
// class has zero union.
IouResult miou(const ConfusionMatrix& cm);

struct MeanCi {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

// Student-t interval: mean +/- t_{(1+level)/2, n-1} * s / sqrt(n). n >= 2.
MeanCi mean_ci(std::span<const double> values, double level = 0.95);

struct AnovaResult {
  double f = 0.0;
  double p = 1.0;
  std::size_t groups = 0;
  std::vector<std::size_t> group_sizes;
  bool significant = false;  // at alpha
  bool degenerate = false;   // zero between- and within-group variance
};

// Standard between/within decomposition; p from the F(df1, df2) upper tail.
// Requires >= 2 groups, each with n >= 2.
AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups,
                          double alpha = 0.05);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::uint64_t count = 0;
};

// Fixed-width bins over [lo, hi); out-of-range values clamp to the edge
// bins, so counts always sum to the input size.
std::vector<HistogramBin> score_histogram(std::span<const double> scores,
                                          std::size_t bins, double lo, double hi);

// Special functions backing the statistics above.
double regularized_incomplete_beta(double x, double a, double b);
double f_upper_tail(double f, double df1, double df2);
double student_t_cdf(double x, double dof);
double student_t_quantile(double prob, double dof);

}  // namespace agral
