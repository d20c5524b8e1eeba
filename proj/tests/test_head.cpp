#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"
#include "mdt/head.hpp"

using namespace mdt;
using testutil::bitwise_equal;
using testutil::random_tensor;

namespace {

HeadConfig toy_head(int domains) {
  HeadConfig c;
  c.in_features = 12;
  c.hidden = 8;
  c.domains = domains;
  return c;
}

Tensord scores_1x2xd(const std::vector<double>& pos, const std::vector<double>& neg) {
  const int D = static_cast<int>(pos.size());
  Tensord s({1, 2, D});
  for (int d = 0; d < D; ++d) {
    s(0, 0, d) = pos[static_cast<std::size_t>(d)];
    s(0, 1, d) = neg[static_cast<std::size_t>(d)];
  }
  return s;
}

}  // namespace

TEST_CASE("two-way softmax of (2,0) and shift invariance") {
  Tensord f({2, 3});
  f(0, 0) = 2;
  f(1, 0) = 0;
  f(0, 1) = -1;
  f(1, 1) = 4;
  f(0, 2) = 0.5;
  f(1, 2) = 0.5;
  Tensord p = softmax_cls(f);
  CHECK(p(0, 0) == doctest::Approx(0.88079708).epsilon(1e-8));
  CHECK(p(1, 0) == doctest::Approx(0.11920292).epsilon(1e-8));
  CHECK(p(0, 2) == doctest::Approx(0.5));
  for (int d = 0; d < 3; ++d) CHECK(p(0, d) + p(1, d) == doctest::Approx(1.0).epsilon(1e-12));

  // Adding a constant to any column leaves probabilities unchanged.
  Tensord g = f;
  for (int r = 0; r < 2; ++r) g(r, 1) += 123.0;
  Tensord q = softmax_cls(g);
  for (int r = 0; r < 2; ++r)
    for (int d = 0; d < 3; ++d) CHECK(q(r, d) == doctest::Approx(p(r, d)).epsilon(1e-9));

  CHECK(positive_score(f, 0) == doctest::Approx(p(0, 0)).epsilon(1e-12));
  CHECK_THROWS_AS(softmax_cls(Tensord({3, 2})), DimensionError);
}

TEST_CASE("cross-domain softmax of row (1,2,3) and shift invariance") {
  Tensord f({2, 3});
  f(0, 0) = 1;
  f(0, 1) = 2;
  f(0, 2) = 3;
  f(1, 0) = -5;
  f(1, 1) = 0;
  f(1, 2) = 5;
  Tensord p = softmax_inst(f);
  CHECK(p(0, 0) == doctest::Approx(0.09003057).epsilon(1e-8));
  CHECK(p(0, 1) == doctest::Approx(0.24472847).epsilon(1e-8));
  CHECK(p(0, 2) == doctest::Approx(0.66524096).epsilon(1e-8));
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int d = 0; d < 3; ++d) s += p(r, d);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  Tensord g = f;
  for (int d = 0; d < 3; ++d) g(0, d) -= 42.0;
  Tensord q = softmax_inst(g);
  for (int d = 0; d < 3; ++d) CHECK(q(0, d) == doctest::Approx(p(0, d)).epsilon(1e-9));
}

TEST_CASE("classification loss is ln 2 at indifference and matches hand values") {
  Tensord s = scores_1x2xd({0.0}, {0.0});
  CHECK(loss_cls(s, {1}, 0) == doctest::Approx(0.69314718).epsilon(1e-8));
  CHECK(loss_cls(s, {0}, 0) == doctest::Approx(0.69314718).epsilon(1e-8));

  // Positive with p(target) = 0.88079708: loss = -ln(0.88079708).
  Tensord t = scores_1x2xd({2.0}, {0.0});
  CHECK(loss_cls(t, {1}, 0) == doctest::Approx(-std::log(0.88079708)).epsilon(1e-7));
  CHECK(loss_cls(t, {0}, 0) == doctest::Approx(-std::log(0.11920292)).epsilon(1e-7));

  // Mean over the batch.
  Tensord b({2, 2, 1});
  b(0, 0, 0) = 2;
  b(1, 0, 0) = 2;
  CHECK(loss_cls(b, {1, 0}, 0) ==
        doctest::Approx(0.5 * (-std::log(0.88079708) - std::log(0.11920292))).epsilon(1e-7));
}

TEST_CASE("embedding loss pins -ln(0.66524096) and skips negatives") {
  Tensord s({1, 2, 3});
  s(0, 0, 0) = 1;
  s(0, 0, 1) = 2;
  s(0, 0, 2) = 3;
  std::vector<int> all = {0, 1, 2};
  CHECK(loss_inst(s, {1}, 2, all) == doctest::Approx(0.40760596).epsilon(1e-7));

  // A negative contributes nothing but still counts in the normalization.
  Tensord b({2, 2, 3});
  for (int d = 0; d < 3; ++d) {
    b(0, 0, d) = s(0, 0, d);
    b(1, 0, d) = 100.0;  // would dominate if negatives were counted
  }
  CHECK(loss_inst(b, {1, 0}, 2, all) == doctest::Approx(0.40760596 / 2).epsilon(1e-7));

  // All-negative batch: zero embedding loss.
  CHECK(loss_inst(b, {0, 0}, 2, all) == 0.0);

  CHECK_THROWS_AS(loss_inst(s, {1}, 2, {0, 1}), ArgumentError);
  CHECK_THROWS_AS(loss_inst(s, {1}, 2, {2, 7}), ArgumentError);
}

TEST_CASE("total loss composes linearly in alpha") {
  CHECK(loss_total(0.5, 0.4, 0.1) == doctest::Approx(0.54).epsilon(1e-12));
  Rng rng(55);
  Tensord s = random_tensor({4, 2, 3}, rng);
  std::vector<int> labels = {1, 0, 1, 0};
  LossResult r = multi_task_loss(s, labels, 1, {0, 1, 2}, 0.1);
  CHECK(r.total == doctest::Approx(r.cls + 0.1 * r.inst).epsilon(1e-12));
  CHECK(r.d_scores.shape == s.shape);
  LossResult r0 = multi_task_loss(s, labels, 1, {0, 1, 2}, 0.0);
  CHECK(r0.total == doctest::Approx(r0.cls).epsilon(1e-12));
  CHECK(r.cls == doctest::Approx(r0.cls).epsilon(1e-12));
  CHECK(r.inst == doctest::Approx(r0.inst).epsilon(1e-12));
}

TEST_CASE("single-domain subsets silence the embedding gradient") {
  Rng rng(56);
  Tensord s = random_tensor({3, 2, 1}, rng);
  std::vector<int> labels = {1, 1, 0};
  // D = 1: subset is forced to {0}; the embedding term must not alter the
  // gradient even at alpha = 1.
  LossResult a = multi_task_loss(s, labels, 0, {0}, 1.0);
  LossResult b = multi_task_loss(s, labels, 0, {0}, 0.0);
  CHECK(bitwise_equal(a.d_scores, b.d_scores));
  CHECK(a.inst == 0.0);

  // Same with a singleton subset in a multi-domain batch.
  Tensord m = random_tensor({2, 2, 4}, rng);
  LossResult c = multi_task_loss(m, {1, 0}, 2, {2}, 1.0);
  LossResult d = multi_task_loss(m, {1, 0}, 2, {2}, 0.0);
  CHECK(bitwise_equal(c.d_scores, d.d_scores));
}

TEST_CASE("batch forward equals per-sample forward across branches") {
  Rng rng(57);
  HeadConfig cfg = toy_head(3);
  HeadParams p = init_head(cfg, rng);
  Tensord X = random_tensor({5, cfg.in_features}, rng);
  Tensord S = head_forward_batch(X, p);
  REQUIRE(S.shape == std::vector<int>{5, 2, 3});
  for (int n = 0; n < 5; ++n) {
    Tensord x({1, cfg.in_features});
    for (int i = 0; i < cfg.in_features; ++i) x(0, i) = X(n, i);
    Tensord s = head_forward_batch(x, p);
    // Eigen picks different gemm kernels by batch size, so agreement is to
    // rounding, not bitwise.
    for (int r = 0; r < 2; ++r)
      for (int d = 0; d < 3; ++d) CHECK(s(0, r, d) == doctest::Approx(S(n, r, d)).epsilon(1e-12));
  }
}

TEST_CASE("head_forward produces the same scores as the batched path") {
  Rng rng(58);
  HeadConfig cfg = toy_head(2);
  HeadParams p = init_head(cfg, rng);
  Tensord x({cfg.in_features});
  for (auto& v : x.data) v = rng.normal();
  DomainScores ds = head_forward(x, p, 1);
  CHECK(ds.active_domain == 1);
  Tensord X({1, cfg.in_features});
  X.data = x.data;
  Tensord S = head_forward_batch(X, p);
  for (int r = 0; r < 2; ++r)
    for (int d = 0; d < 2; ++d) CHECK(ds.f(r, d) == doctest::Approx(S(0, r, d)).epsilon(1e-12));
}

TEST_CASE("dropout only acts when configured and keeps inverted scaling") {
  Rng rng(59);
  HeadConfig cfg = toy_head(1);
  HeadParams p = init_head(cfg, rng);
  Tensord X = random_tensor({3, cfg.in_features}, rng);

  // Off by default: bitwise deterministic.
  Tensord a = head_forward_batch(X, p);
  Tensord b = head_forward_batch(X, p);
  CHECK(bitwise_equal(a, b));

  // On: the trace's hidden units are either zero or the unscaled value / keep.
  HeadConfig dcfg = cfg;
  dcfg.dropout = true;
  dcfg.dropout_p = 0.5;
  HeadTrace plain, dropped;
  (void)head_forward_batch(X, p, &plain);
  Rng drng(60);
  (void)head_forward_batch(X, p, &dropped, &dcfg, &drng);
  REQUIRE(plain.h4.shape == dropped.h4.shape);
  int zeros = 0;
  for (std::size_t i = 0; i < plain.h4.data.size(); ++i) {
    const double off = plain.h4.data[i], on = dropped.h4.data[i];
    const bool zeroed = on == 0.0;
    const bool scaled = std::abs(on - off / 0.5) < 1e-12;
    CHECK((zeroed || scaled));
    if (zeroed && off != 0.0) ++zeros;
  }
  CHECK(zeros > 0);

  // Passing a config without an rng stays in inference mode.
  Tensord c = head_forward_batch(X, p, static_cast<HeadTrace*>(nullptr), &dcfg, nullptr);
  CHECK(bitwise_equal(a, c));
}

TEST_CASE("loss input validation") {
  Rng rng(61);
  Tensord s = random_tensor({2, 2, 2}, rng);
  CHECK_THROWS_AS(loss_cls(s, {1}, 0), DimensionError);
  CHECK_THROWS_AS(loss_cls(s, {1, 0}, 5), ArgumentError);
  Tensord bad = random_tensor({2, 3, 2}, rng);
  CHECK_THROWS_AS(loss_cls(bad, {1, 0}, 0), DimensionError);
  CHECK_THROWS_AS(loss_total(0.5, 0.4, -0.1), ArgumentError);
}

TEST_CASE("head rejects mismatched feature width") {
  Rng rng(62);
  HeadConfig cfg = toy_head(1);
  HeadParams p = init_head(cfg, rng);
  Tensord X = random_tensor({2, cfg.in_features + 1}, rng);
  CHECK_THROWS_AS(head_forward_batch(X, p), DimensionError);
}
