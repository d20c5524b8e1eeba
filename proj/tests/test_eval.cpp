#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "mdt/eval.hpp"

using namespace mdt;

TEST_CASE("overlap curve of (1, 0.5, 0) overlaps") {
  // IoUs: identical box -> 1; nested half-area box -> exactly 0.5; disjoint -> 0.
  std::vector<Box> gt = {Box(0, 0, 2, 2), Box(0, 0, 1, 1), Box(0, 0, 1, 1)};
  std::vector<Box> tr = {Box(0, 0, 2, 2), Box(0, 0, 1, 2), Box(5, 5, 6, 6)};
  CHECK(iou(tr[1], gt[1]) == 0.5);
  EvalResult r = evaluate(tr, gt);
  CHECK(r.success[40] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  // Thresholds are inclusive, so the 0.5-overlap frame still counts at 0.50.
  CHECK(r.success[50] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(r.success[51] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(r.success[0] == doctest::Approx(1.0).epsilon(1e-12));  // IoU >= 0 holds everywhere
  CHECK(r.success[100] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("perfect tracking yields auc exactly 1") {
  std::vector<Box> gt = {Box(3, 4, 10, 12), Box(5, 5, 9, 9), Box(0, 0, 4, 7)};
  EvalResult r = evaluate(gt, gt);
  for (double s : r.success) CHECK(s == 1.0);
  CHECK(r.auc == 1.0);
  CHECK(r.precision_at_20 == 1.0);
}

TEST_CASE("auc is the mean of the success curve") {
  Rng rng(11);
  std::vector<Box> gt, tr;
  for (int i = 0; i < 25; ++i) {
    Box g(rng.uniform(0, 50), rng.uniform(0, 50), 0, 0);
    g.x2 = g.x1 + rng.uniform(5, 20);
    g.y2 = g.y1 + rng.uniform(5, 20);
    gt.push_back(g);
    tr.push_back(g.translated(rng.uniform(-8, 8), rng.uniform(-8, 8)));
  }
  EvalResult r = evaluate(tr, gt);
  double mean = 0;
  for (double s : r.success) mean += s;
  mean /= 101.0;
  CHECK(r.auc == doctest::Approx(mean).epsilon(1e-12));
  CHECK(r.precision_at_20 == r.precision[20]);
  CHECK(r.success.size() == 101);
  CHECK(r.precision.size() == 51);
}

TEST_CASE("precision thresholds are inclusive center distances") {
  // Center distance exactly 5 (3-4-5 triangle).
  std::vector<Box> gt = {Box(0, 0, 2, 2)};
  std::vector<Box> tr = {Box(3, 4, 5, 6)};
  EvalResult r = evaluate(tr, gt);
  CHECK(r.precision[4] == 0.0);
  CHECK(r.precision[5] == 1.0);
  CHECK(r.precision[50] == 1.0);
}

TEST_CASE("curves are monotone in the threshold") {
  Rng rng(12);
  std::vector<Box> gt, tr;
  for (int i = 0; i < 60; ++i) {
    Box g(rng.uniform(0, 80), rng.uniform(0, 80), 0, 0);
    g.x2 = g.x1 + rng.uniform(4, 25);
    g.y2 = g.y1 + rng.uniform(4, 25);
    gt.push_back(g);
    Box t = g.translated(rng.uniform(-10, 10), rng.uniform(-10, 10));
    if (rng.uniform() < 0.2) t = t.translated(100, 100);
    tr.push_back(t);
  }
  EvalResult r = evaluate(tr, gt);
  for (std::size_t i = 1; i < r.success.size(); ++i) CHECK(r.success[i] <= r.success[i - 1]);
  for (std::size_t i = 1; i < r.precision.size(); ++i) CHECK(r.precision[i] >= r.precision[i - 1]);
}

TEST_CASE("evaluation is invariant to frame order") {
  Rng rng(13);
  std::vector<Box> gt, tr;
  for (int i = 0; i < 30; ++i) {
    Box g(rng.uniform(0, 40), rng.uniform(0, 40), 0, 0);
    g.x2 = g.x1 + rng.uniform(3, 15);
    g.y2 = g.y1 + rng.uniform(3, 15);
    gt.push_back(g);
    tr.push_back(g.translated(rng.uniform(-5, 5), rng.uniform(-5, 5)));
  }
  EvalResult a = evaluate(tr, gt);
  std::vector<int> perm(30);
  for (int i = 0; i < 30; ++i) perm[static_cast<std::size_t>(i)] = i;
  for (int i = 29; i > 0; --i) std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(rng.uniform_int(i + 1))]);
  std::vector<Box> gt2, tr2;
  for (int i : perm) {
    gt2.push_back(gt[static_cast<std::size_t>(i)]);
    tr2.push_back(tr[static_cast<std::size_t>(i)]);
  }
  EvalResult b = evaluate(tr2, gt2);
  CHECK(a.auc == b.auc);
  CHECK(a.success == b.success);
  CHECK(a.precision == b.precision);
}

TEST_CASE("evaluate validates its inputs") {
  std::vector<Box> one = {Box(0, 0, 1, 1)};
  std::vector<Box> two = {Box(0, 0, 1, 1), Box(1, 1, 2, 2)};
  CHECK_THROWS_AS(evaluate(one, two), ArgumentError);
  CHECK_THROWS_AS(evaluate({}, {}), ArgumentError);
}
