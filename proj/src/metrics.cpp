#include "agral/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "agral/errors.hpp"

namespace agral {

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.classes != classes) throw DataError("confusion matrix class counts differ");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  return *this;
}

ConfusionMatrix confusion(const ClassMask& pred, const ClassMask& truth,
                          std::size_t classes) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw DataError("confusion: mask dimensions differ");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.ids.size(); ++i) {
    const std::uint8_t t = truth.ids[i];
    const std::uint8_t p = pred.ids[i];
    if (t >= classes || p >= classes) {
      throw DataError("confusion: class id " + std::to_string(std::max(t, p)) +
                      " >= class count " + std::to_string(classes));
    }
    ++cm.at(t, p);
  }
  return cm;
}

ClassMask argmax_mask(const ProbabilityStack& stack) {
  ClassMask mask;
  mask.height = stack.height;
  mask.width = stack.width;
  mask.ids.resize(stack.height * stack.width);
  const double inv_s = 1.0 / static_cast<double>(stack.samples);
  for (std::size_t h = 0; h < stack.height; ++h) {
    for (std::size_t w = 0; w < stack.width; ++w) {
      double best = -1.0;
      std::uint8_t best_c = 0;
      for (std::size_t c = 0; c < stack.classes; ++c) {
        double mean = 0.0;
        for (std::size_t s = 0; s < stack.samples; ++s) mean += stack.at(s, c, h, w) * inv_s;
        if (mean > best) {
          best = mean;
          best_c = static_cast<std::uint8_t>(c);
        }
      }
      mask.at(h, w) = best_c;
    }
  }
  return mask;
}

IouResult miou(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw DataError("miou: empty confusion matrix");
  IouResult result;
  result.per_class.assign(cm.classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < cm.classes; ++c) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < cm.classes; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const std::uint64_t inter = cm.at(c, c);
    const std::uint64_t uni = row + col - inter;
    if (uni == 0) continue;  // class absent from both; excluded from the mean
    result.per_class[c] = static_cast<double>(inter) / static_cast<double>(uni);
    sum += result.per_class[c];
    ++defined;
  }
  if (defined == 0) throw DataError("miou: every class has zero union");
  result.mean = sum / static_cast<double>(defined);
  return result;
}

MeanCi mean_ci(std::span<const double> values, double level) {
  const std::size_t n = values.size();
  if (n < 2) throw DataError("mean_ci: need at least 2 values");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  const double t = student_t_quantile(0.5 * (1.0 + level), static_cast<double>(n - 1));
  const double half = t * sd / std::sqrt(static_cast<double>(n));
  return {mean, mean - half, mean + half};
}

AnovaResult one_way_anova(const std::vector<std::vector<double>>& groups,
                          double alpha) {
  if (groups.size() < 2) throw DataError("anova: need at least 2 groups");
  AnovaResult res;
  res.groups = groups.size();

  double grand_sum = 0.0;
  std::size_t total_n = 0;
  for (const auto& g : groups) {
    if (g.size() < 2) throw DataError("anova: each group needs n >= 2");
    res.group_sizes.push_back(g.size());
    for (double v : g) grand_sum += v;
    total_n += g.size();
  }
  const double grand_mean = grand_sum / static_cast<double>(total_n);

  double ssb = 0.0, ssw = 0.0;
  for (const auto& g : groups) {
    double m = 0.0;
    for (double v : g) m += v;
    m /= static_cast<double>(g.size());
    ssb += static_cast<double>(g.size()) * (m - grand_mean) * (m - grand_mean);
    for (double v : g) ssw += (v - m) * (v - m);
  }
  const double df1 = static_cast<double>(groups.size() - 1);
  const double df2 = static_cast<double>(total_n - groups.size());
  const double msb = ssb / df1;
  const double msw = ssw / df2;

  if (msw == 0.0) {
    if (msb == 0.0) {
      res.degenerate = true;  // F = 0/0
      res.f = 0.0;
      res.p = 1.0;
      return res;
    }
    res.f = std::numeric_limits<double>::infinity();
    res.p = 0.0;
    res.significant = true;
    return res;
  }

  res.f = msb / msw;
  res.p = f_upper_tail(res.f, df1, df2);
  res.significant = res.p <= alpha;
  return res;
}

std::vector<HistogramBin> score_histogram(std::span<const double> scores,
                                          std::size_t bins, double lo, double hi) {
  if (bins < 1) throw DataError("histogram: bin count must be >= 1");
  if (scores.empty()) throw DataError("histogram: empty score list");
  if (!(hi > lo)) throw DataError("histogram: range must satisfy hi > lo");

  std::vector<HistogramBin> out(bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = (b + 1 == bins) ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (double v : scores) {
    double idx = std::floor((v - lo) / width);
    if (idx < 0) idx = 0;
    if (idx > static_cast<double>(bins - 1)) idx = static_cast<double>(bins - 1);
    ++out[static_cast<std::size_t>(idx)].count;
  }
  return out;
}

namespace {

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
double beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-15;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;

  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 300; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0 && a > 0.0 && b > 0.0)) {
    throw DataError("regularized_incomplete_beta: invalid arguments");
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log(1.0 - x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(x, a, b) / a;
  }
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double f_upper_tail(double f, double df1, double df2) {
  if (f <= 0.0) return 1.0;
  // P(F > f) = I_{df2/(df2 + df1 f)}(df2/2, df1/2)
  return regularized_incomplete_beta(df2 / (df2 + df1 * f), 0.5 * df2, 0.5 * df1);
}

double student_t_cdf(double x, double dof) {
  const double ib =
      regularized_incomplete_beta(dof / (dof + x * x), 0.5 * dof, 0.5);
  return x >= 0.0 ? 1.0 - 0.5 * ib : 0.5 * ib;
}

double student_t_quantile(double prob, double dof) {
  if (!(prob > 0.0 && prob < 1.0)) throw DataError("t quantile: prob must be in (0,1)");
  if (prob == 0.5) return 0.0;
  // Bisection on the CDF; monotone, so this converges unconditionally.
  double lo = -1.0, hi = 1.0;
  while (student_t_cdf(lo, dof) > prob) lo *= 2.0;
  while (student_t_cdf(hi, dof) < prob) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dof) < prob) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * std::max(1.0, std::fabs(hi))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace agral
