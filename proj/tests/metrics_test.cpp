// Copyright 2026 The sonoclass Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sonoclass/error.hpp"
#include "sonoclass/metrics.hpp"
#include "sonoclass/rng.hpp"
#include "test_util.hpp"

using namespace sonoclass;
using sonoclass::testutil::thrown_code;

namespace {

ScoredSet make_set(const std::vector<double>& scores, const std::vector<int>& labels) {
  ScoredSet set;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    set.samples.push_back({"img" + std::to_string(i), scores[i], labels[i]});
  }
  return set;
}

// Quadratic-time rank statistic, the independent ground truth for roc_auc.
double auc_by_pair_counting(const ScoredSet& set) {
  double wins = 0.0;
  long n_pos = 0, n_neg = 0;
  for (const ScoredSample& p : set.samples) {
    if (p.label != 1) continue;
    ++n_pos;
    for (const ScoredSample& q : set.samples) {
      if (q.label != 0) continue;
      if (p.score > q.score) {
        wins += 1.0;
      } else if (p.score == q.score) {
        wins += 0.5;
      }
    }
  }
  for (const ScoredSample& q : set.samples) n_neg += (q.label == 0);
  return wins / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double trapezoid_area(const std::vector<RocPoint>& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += 0.5 * (curve[i].tpr + curve[i - 1].tpr) * (curve[i].fpr - curve[i - 1].fpr);
  }
  return area;
}

ScoredSet random_set(Rng& rng, int n, bool tie_grid) {
  ScoredSet set;
  int n_pos = 0;
  for (int i = 0; i < n; ++i) {
    double s = rng.uniform01();
    if (tie_grid) s = std::floor(s * 20.0) / 20.0;
    const int label = rng.uniform01() < 0.5 ? 0 : 1;
    n_pos += label;
    set.samples.push_back({"img" + std::to_string(i), s, label});
  }
  // Force both classes.
  set.samples[0].label = 1;
  set.samples[1].label = 0;
  return set;
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double eps = 1e-12) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, eps, 48);
}

// Student t density with 4 degrees of freedom. The normalizing constant
// gamma(2.5) / (sqrt(4 pi) gamma(2)) reduces to exactly 3/8.
double t4_pdf(double u) { return 0.375 * std::pow(1.0 + 0.25 * u * u, -2.5); }

// Two-sided tail mass by quadrature, mapped onto [0,1) with u = t + s/(1-s).
double t4_two_sided_p(double t) {
  const double at = std::abs(t);
  auto g = [at](double s) {
    const double om = 1.0 - s;
    const double u = at + s / om;
    return t4_pdf(u) / (om * om);
  };
  return 2.0 * integrate(g, 0.0, 1.0 - 1e-9);
}

// The substitutions t = u^2 and 1 - t = v^2 remove the endpoint
// singularities for a, b down to 1/2, so plain quadrature converges.
double beta_by_quadrature(double a, double b, double x) {
  auto lower = [a, b](double from, double to) {
    auto f = [a, b](double u) {
      return 2.0 * std::pow(u, 2.0 * a - 1.0) * std::pow(1.0 - u * u, b - 1.0);
    };
    return integrate(f, std::sqrt(from), std::sqrt(to));
  };
  auto upper = [a, b](double from, double to) {
    auto f = [a, b](double v) {
      return 2.0 * std::pow(1.0 - v * v, a - 1.0) * std::pow(v, 2.0 * b - 1.0);
    };
    return integrate(f, std::sqrt(1.0 - to), std::sqrt(1.0 - from));
  };
  const double half_low = lower(0.0, 0.5);
  const double half_high = upper(0.5, 1.0);
  const double num = x <= 0.5 ? lower(0.0, x) : half_low + upper(0.5, x);
  return num / (half_low + half_high);
}

FoldMetrics metrics_of(long tp, long fp, long tn, long fn) {
  ConfusionMatrix m;
  m.tp = tp;
  m.fp = fp;
  m.tn = tn;
  m.fn = fn;
  ScoredSet set;
  int i = 0;
  auto add = [&](long n, double score, int label) {
    for (long j = 0; j < n; ++j) set.samples.push_back({"s" + std::to_string(i++), score, label});
  };
  add(tp, 0.9, 1);
  add(fn, 0.1, 1);
  add(fp, 0.8, 0);
  add(tn, 0.2, 0);
  return fold_metrics(m, set);
}

}  // namespace

TEST_CASE("scored set validation rejects malformed input") {
  CHECK(thrown_code([] { validate_scored_set(ScoredSet{}); }) == ErrorCode::EmptyBatch);
  CHECK(thrown_code([] { validate_scored_set(make_set({1.5}, {1})); }) == ErrorCode::OutOfRange);
  CHECK(thrown_code([] { validate_scored_set(make_set({-0.1}, {0})); }) ==
        ErrorCode::OutOfRange);
  CHECK(thrown_code([] {
          validate_scored_set(make_set({std::numeric_limits<double>::quiet_NaN()}, {1}));
        }) == ErrorCode::OutOfRange);
  CHECK(thrown_code([] { validate_scored_set(make_set({0.5}, {2})); }) == ErrorCode::OutOfRange);

  ScoredSet dup = make_set({0.2, 0.4}, {0, 1});
  dup.samples[1].image_id = dup.samples[0].image_id;
  CHECK(thrown_code([&] { validate_scored_set(dup); }) == ErrorCode::DuplicateId);

  CHECK_NOTHROW(validate_scored_set(make_set({0.0, 1.0}, {0, 1})));
}

TEST_CASE("auc hits the exact anchors") {
  CHECK(roc_auc(make_set({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0})) == 1.0);
  CHECK(roc_auc(make_set({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0})) == 0.0);
  CHECK(roc_auc(make_set({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0})) == 0.5);
  CHECK(roc_auc(make_set({0.7, 0.3, 0.7, 0.3}, {1, 1, 0, 0})) == 0.5);

  CHECK(thrown_code([] { roc_auc(make_set({0.5, 0.6}, {1, 1})); }) ==
        ErrorCode::SingleClassSet);
  CHECK(thrown_code([] { roc_curve(make_set({0.5, 0.6}, {0, 0})); }) ==
        ErrorCode::SingleClassSet);
}

TEST_CASE("auc agrees with pair counting on random sets with ties") {
  Rng rng(314);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5 + static_cast<int>(rng.uniform_int(196));
    const ScoredSet set = random_set(rng, n, trial % 2 == 0);
    const double fast = roc_auc(set);
    const double slow = auc_by_pair_counting(set);
    CHECK(std::abs(fast - slow) <= 1e-12);
  }
}

TEST_CASE("auc is invariant under strictly monotone score transforms") {
  Rng rng(606);
  const auto transforms = std::vector<std::function<double(double)>>{
      [](double x) { return x * x * x; },
      [](double x) { return x / (2.0 - x); },
      [](double x) { return (std::exp(3.0 * x) - 1.0) / (std::exp(3.0) - 1.0); },
  };
  for (int trial = 0; trial < 10; ++trial) {
    const ScoredSet set = random_set(rng, 120, false);
    const double base = roc_auc(set);
    for (const auto& f : transforms) {
      ScoredSet mapped = set;
      for (ScoredSample& s : mapped.samples) s.score = f(s.score);
      CHECK(std::abs(roc_auc(mapped) - base) <= 1e-12);
    }
  }
}

TEST_CASE("flipping all labels mirrors the auc around one half") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const ScoredSet set = random_set(rng, 90, false);
    ScoredSet flipped = set;
    for (ScoredSample& s : flipped.samples) s.label = 1 - s.label;
    CHECK(std::abs(roc_auc(set) + roc_auc(flipped) - 1.0) <= 1e-12);
  }
}

TEST_CASE("roc curve is anchored, monotone, and integrates to the auc") {
  Rng rng(505);
  for (int trial = 0; trial < 30; ++trial) {
    const ScoredSet set = random_set(rng, 4 + static_cast<int>(rng.uniform_int(120)),
                                     trial % 3 == 0);
    const std::vector<RocPoint> curve = roc_curve(set);
    REQUIRE(curve.size() >= 2);
    CHECK(curve.front().fpr == 0.0);
    CHECK(curve.front().tpr == 0.0);
    CHECK(std::isinf(curve.front().threshold));
    CHECK(curve.back().fpr == 1.0);
    CHECK(curve.back().tpr == 1.0);

    double min_score = 1.0;
    for (const ScoredSample& s : set.samples) min_score = std::min(min_score, s.score);
    CHECK(curve.back().threshold == min_score);

    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].fpr >= curve[i - 1].fpr);
      CHECK(curve[i].tpr >= curve[i - 1].tpr);
      CHECK(curve[i].threshold < curve[i - 1].threshold);
    }
    CHECK(std::abs(trapezoid_area(curve) - roc_auc(set)) <= 1e-12);
  }
}

TEST_CASE("confusion counts match a direct recount and the boundary is positive") {
  ConfusionMatrix m = confusion(make_set({0.9, 0.5, 0.4, 0.5, 0.1}, {1, 1, 1, 0, 0}), 0.5);
  CHECK(m.tp == 2);  // 0.9 and the boundary 0.5
  CHECK(m.fn == 1);
  CHECK(m.fp == 1);  // the negative at exactly 0.5
  CHECK(m.tn == 1);
  CHECK(m.threshold == 0.5);

  Rng rng(8);
  const ScoredSet set = random_set(rng, 100, true);
  for (double thr : {0.25, 0.5, 0.75}) {
    const ConfusionMatrix c = confusion(set, thr);
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (const ScoredSample& s : set.samples) {
      const bool pred = s.score >= thr;
      if (s.label == 1) {
        (pred ? tp : fn)++;
      } else {
        (pred ? fp : tn)++;
      }
    }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.tn == tn);
    CHECK(c.fn == fn);
    CHECK(c.total() == 100);
  }
}

TEST_CASE("fold metrics reproduce a hand-computed confusion fixture") {
  // tp 37, fp 13, tn 20, fn 5: 75 samples, 42 positive, 33 negative.
  const FoldMetrics fm = metrics_of(37, 13, 20, 5);

  const double pp = 37.0 / 50.0, rp = 37.0 / 42.0;
  const double pn = 20.0 / 25.0, rn = 20.0 / 33.0;
  CHECK(fm.precision_positive == pp);
  CHECK(fm.recall_positive == rp);
  CHECK(fm.precision_negative == pn);
  CHECK(fm.recall_negative == rn);

  CHECK(fm.precision == doctest::Approx(0.77).epsilon(1e-15));
  CHECK(std::abs(fm.recall - 0.5 * (rp + rn)) <= 1e-15);
  CHECK(std::abs(fm.accuracy - 0.76) <= 1e-15);

  const double macro_p = 0.5 * (pp + pn), macro_r = 0.5 * (rp + rn);
  CHECK(std::abs(fm.f1 - 2.0 * macro_p * macro_r / (macro_p + macro_r)) <= 1e-15);

  const double f1p = 2.0 * pp * rp / (pp + rp), f1n = 2.0 * pn * rn / (pn + rn);
  CHECK(std::abs(fm.f1_positive - f1p) <= 1e-15);
  CHECK(std::abs(fm.f1_negative - f1n) <= 1e-15);
  CHECK(std::abs(fm.precision_weighted - (42.0 * pp + 33.0 * pn) / 75.0) <= 1e-15);
  CHECK(std::abs(fm.recall_weighted - (42.0 * rp + 33.0 * rn) / 75.0) <= 1e-15);
  CHECK(std::abs(fm.f1_weighted - (42.0 * f1p + 33.0 * f1n) / 75.0) <= 1e-15);
  CHECK(fm.undefined_metrics.empty());
  // Positives score 0.9 or 0.1 and negatives 0.8 or 0.2, so the 37 high
  // positives beat all 33 negatives and the 5 low ones beat none.
  CHECK(std::abs(fm.auc - 37.0 / 42.0) <= 1e-12);
}

TEST_CASE("fold metrics edge cases") {
  const FoldMetrics perfect = metrics_of(10, 0, 15, 0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.auc == 1.0);

  // Everything predicted positive on a 2/2 set.
  ConfusionMatrix all_pos;
  all_pos.tp = 2;
  all_pos.fp = 2;
  const ScoredSet set = make_set({0.9, 0.8, 0.7, 0.6}, {1, 1, 0, 0});
  const FoldMetrics fm = fold_metrics(all_pos, set);
  CHECK(fm.accuracy == 0.5);
  CHECK(fm.precision_negative == 0.0);
  CHECK(std::find(fm.undefined_metrics.begin(), fm.undefined_metrics.end(),
                  "precision_negative") != fm.undefined_metrics.end());

  ConfusionMatrix short_matrix;
  short_matrix.tp = 1;
  CHECK(thrown_code([&] { fold_metrics(short_matrix, set); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("f1 keeps its algebraic relations on random matrices") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const long tp = 1 + static_cast<long>(rng.uniform_int(40));
    const long fp = static_cast<long>(rng.uniform_int(40));
    const long tn = 1 + static_cast<long>(rng.uniform_int(40));
    const long fn = static_cast<long>(rng.uniform_int(40));
    const FoldMetrics fm = metrics_of(tp, fp, tn, fn);
    CHECK(fm.f1 >= 0.0);
    CHECK(fm.f1 <= 1.0);
    CHECK(fm.f1 <= std::max(fm.precision, fm.recall) + 1e-15);
    CHECK(fm.f1 >= std::min(fm.precision, fm.recall) - 1e-15);
    if (fm.precision * fm.recall == 0.0) CHECK(fm.f1 == 0.0);
  }
}

TEST_CASE("aggregation over folds") {
  std::vector<FoldMetrics> folds(5);
  const std::vector<double> aucs = {0.82, 0.84, 0.85, 0.86, 0.86};
  for (int i = 0; i < 5; ++i) {
    folds[i].precision = 0.7;
    folds[i].recall = 0.6;
    folds[i].f1 = 0.65;
    folds[i].accuracy = 0.75;
    folds[i].auc = aucs[i];
  }
  AggregateRow row = aggregate(folds, 5);
  CHECK(row.k == 5);
  CHECK(std::abs(row.auc.mean - 0.846) <= 1e-12);
  CHECK(std::abs(row.auc.stddev - std::sqrt(0.00028)) <= 1e-12);
  CHECK(row.precision.mean == 0.7);
  CHECK(row.precision.stddev == 0.0);
  CHECK(row.per_fold_auc == aucs);

  // Order of folds must not matter for the summary statistics.
  std::vector<FoldMetrics> shuffled = {folds[3], folds[0], folds[4], folds[2], folds[1]};
  AggregateRow row2 = aggregate(shuffled, 5);
  CHECK(std::abs(row2.auc.mean - row.auc.mean) <= 1e-15);
  CHECK(std::abs(row2.auc.stddev - row.auc.stddev) <= 1e-15);

  folds.pop_back();
  CHECK(thrown_code([&] { aggregate(folds, 5); }) == ErrorCode::WrongFoldCount);

  CHECK(thrown_code([] { mean_of({}); }) == ErrorCode::EmptyBatch);
  CHECK(sample_stddev({0.4}) == 0.0);
  CHECK(sample_stddev({}) == 0.0);
}

TEST_CASE("paired t test matches the closed form on a hand fixture") {
  const std::vector<double> base = {0.80, 0.81, 0.82, 0.83, 0.84};
  std::vector<double> better = base;
  const std::vector<double> diffs = {0.02, 0.03, 0.025, 0.02, 0.03};
  for (int i = 0; i < 5; ++i) better[i] += diffs[i];

  const TTestResult res = paired_t_test(better, base);
  CHECK(res.df == 4);
  CHECK(!res.zero_variance);
  // mean diff 0.025, sd 0.005, so t = 0.025 / (0.005 / sqrt(5)) = 5 sqrt(5).
  CHECK(std::abs(res.t - 5.0 * std::sqrt(5.0)) <= 1e-9);
  CHECK(std::abs(res.p - t4_two_sided_p(res.t)) <= 1e-6 * res.p);

  const TTestResult sym = paired_t_test(base, better);
  CHECK(std::abs(sym.t + res.t) <= 1e-12);
  CHECK(std::abs(sym.p - res.p) <= 1e-15);
}

TEST_CASE("paired t test degenerate and error cases") {
  const std::vector<double> a = {0.8, 0.7, 0.9, 0.6, 0.75};

  TTestResult same = paired_t_test(a, a);
  CHECK(same.zero_variance);
  CHECK(same.t == 0.0);
  CHECK(same.p == 1.0);

  std::vector<double> shifted = a;
  for (double& v : shifted) v += 0.05;
  TTestResult shift = paired_t_test(shifted, a);
  CHECK(shift.zero_variance);
  CHECK(std::isinf(shift.t));
  CHECK(shift.t > 0.0);
  CHECK(shift.p == 0.0);

  CHECK(thrown_code([&] { paired_t_test(a, {0.1, 0.2}); }) == ErrorCode::LengthMismatch);
  CHECK(thrown_code([] { paired_t_test({0.5}, {0.4}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("paired t test p values agree with quadrature on random fold results") {
  Rng rng(2718);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a[i] = rng.uniform(0.5, 1.0);
      b[i] = rng.uniform(0.5, 1.0);
    }
    const TTestResult res = paired_t_test(a, b);
    const double oracle = t4_two_sided_p(res.t);
    CHECK(std::abs(res.p - oracle) <= 1e-6 * std::max(oracle, 1e-3));
  }
}

TEST_CASE("regularized incomplete beta matches direct quadrature") {
  for (double a : {0.5, 1.0, 2.0, 3.5}) {
    for (double b : {0.5, 1.0, 2.5, 4.0}) {
      for (double x : {0.05, 0.3, 0.5, 0.8, 0.95}) {
        const double got = regularized_incomplete_beta(a, b, x);
        const double want = beta_by_quadrature(a, b, x);
        CHECK(std::abs(got - want) <= 1e-6 * std::max(want, 1e-6));
        // Reflection identity.
        CHECK(std::abs(got - (1.0 - regularized_incomplete_beta(b, a, 1.0 - x))) <= 1e-12);
      }
    }
  }
  CHECK(regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK(thrown_code([] { regularized_incomplete_beta(0.0, 1.0, 0.5); }) ==
        ErrorCode::OutOfRange);
  CHECK(thrown_code([] { regularized_incomplete_beta(1.0, 1.0, 1.5); }) ==
        ErrorCode::OutOfRange);
}
