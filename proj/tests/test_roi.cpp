#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "helpers.hpp"
#include "mdt/roi.hpp"

using namespace mdt;
using testutil::bitwise_equal;
using testutil::dense_tent_oracle;
using testutil::pool_oracle;
using testutil::random_box;
using testutil::random_tensor;

TEST_CASE("project_box divides coordinates continuously") {
  Box b(3, 5, 19, 29);
  Box p = project_box(b, 8);
  CHECK(p.x1 == doctest::Approx(0.375).epsilon(1e-12));
  CHECK(p.y1 == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(p.x2 == doctest::Approx(2.375).epsilon(1e-12));
  CHECK(p.y2 == doctest::Approx(3.625).epsilon(1e-12));
  Box q = project_box(Box(0, 0, 16, 16), 8);
  CHECK(q.x2 == 2.0);
  Box r = project_box(b, 1);
  CHECK(r.x1 == b.x1);
  CHECK(r.y2 == b.y2);
  CHECK_THROWS_AS(project_box(b, 0), ArgumentError);
}

TEST_CASE("roi_align matches the dense tent oracle on 1000 random cases") {
  Rng rng(71);
  double worst = 0;
  for (int it = 0; it < 1000; ++it) {
    const int C = 1 + rng.uniform_int(3);
    const int H = 5 + rng.uniform_int(10), W = 5 + rng.uniform_int(10);
    Tensord fm = random_tensor({C, H, W}, rng);
    Box box = random_box(rng, H, W, true);
    const int oh = 1 + rng.uniform_int(7), ow = 1 + rng.uniform_int(7);
    const int bx = 1 + rng.uniform_int(3), by = 1 + rng.uniform_int(3);
    RoiFeature f = roi_align(fm, box, oh, ow, bx, by);
    Tensord want = dense_tent_oracle(fm, box, oh, ow, bx, by);
    REQUIRE(f.values.shape == want.shape);
    worst = std::max(worst, testutil::max_abs_diff(f.values, want));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("the 12x12 single-case oracle comparison holds") {
  Rng rng(72);
  Tensord fm = random_tensor({2, 12, 12}, rng);
  Box box(1.3, 2.1, 9.7, 10.4);
  RoiFeature f = roi_align(fm, box, 7, 7, 2, 2);
  Tensord want = dense_tent_oracle(fm, box, 7, 7, 2, 2);
  CHECK(testutil::max_abs_diff(f.values, want) <= 1e-6);
}

TEST_CASE("adaptive_roi_align matches the oracle with independently derived bandwidths") {
  Rng rng(73);
  double worst = 0;
  for (int it = 0; it < 1000; ++it) {
    const int H = 6 + rng.uniform_int(12), W = 6 + rng.uniform_int(12);
    Tensord fm = random_tensor({2, H, W}, rng);
    Box box = random_box(rng, H, W, true);
    const int oh = 2 + rng.uniform_int(6), ow = 2 + rng.uniform_int(6);
    const int bx = std::max(1, static_cast<int>(std::lround(box.width() / ow)));
    const int by = std::max(1, static_cast<int>(std::lround(box.height() / oh)));
    RoiFeature f = adaptive_roi_align(fm, box, oh, ow);
    Tensord want = dense_tent_oracle(fm, box, oh, ow, bx, by);
    worst = std::max(worst, testutil::max_abs_diff(f.values, want));
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("adaptive bandwidth follows the rounding rule with floor 1") {
  CHECK(adaptive_bandwidth(Box(0, 0, 7, 7), 7, 7) == std::pair<int, int>{1, 1});
  CHECK(adaptive_bandwidth(Box(0, 0, 10, 10), 7, 7) == std::pair<int, int>{1, 1});
  CHECK(adaptive_bandwidth(Box(0, 0, 14, 14), 7, 7) == std::pair<int, int>{2, 2});
  CHECK(adaptive_bandwidth(Box(0, 0, 21, 21), 7, 7) == std::pair<int, int>{3, 3});
  // Half-way rounds away from zero; tiny boxes clamp to 1.
  CHECK(adaptive_bandwidth(Box(0, 0, 10.5, 0.3), 7, 7) == std::pair<int, int>{2, 1});
  // Per-axis independence.
  CHECK(adaptive_bandwidth(Box(0, 0, 21, 7), 7, 7) == std::pair<int, int>{3, 1});
}

TEST_CASE("adaptive equals plain alignment when both ratios round to 1") {
  Rng rng(74);
  for (int it = 0; it < 50; ++it) {
    const int H = 8 + rng.uniform_int(6), W = 8 + rng.uniform_int(6);
    Tensord fm = random_tensor({2, H, W}, rng);
    double w = rng.uniform(1.0, 10.4), h = rng.uniform(1.0, 10.4);  // ratios < 1.5 for out 7
    double x1 = rng.uniform(0, W - w), y1 = rng.uniform(0, H - h);
    Box box(x1, y1, x1 + w, y1 + h);
    REQUIRE(adaptive_bandwidth(box, 7, 7) == std::pair<int, int>{1, 1});
    RoiFeature a = adaptive_roi_align(fm, box, 7, 7);
    RoiFeature b = roi_align(fm, box, 7, 7, 1, 1);
    CHECK(bitwise_equal(a.values, b.values));
  }
}

TEST_CASE("exact node hits reproduce node values at bandwidth 1") {
  Rng rng(75);
  Tensord fm = random_tensor({3, 9, 9}, rng);
  // out 1x1 sample point is the box center; put it on node (4,3).
  Box box(2.0, 3.0, 4.0, 5.0);
  RoiFeature f = roi_align(fm, box, 1, 1, 1, 1);
  for (int c = 0; c < 3; ++c) CHECK(f.values(c, 0, 0) == doctest::Approx(fm(c, 4, 3)).epsilon(1e-12));
}

TEST_CASE("constant maps give constant aligned output and cells fully outside read zero") {
  Tensord fm({2, 6, 6});
  for (auto& v : fm.data) v = 3.25;
  RoiFeature f = roi_align(fm, Box(-1.2, 0.7, 5.3, 5.9), 5, 5, 2, 2);
  for (auto v : f.values.data) CHECK(v == doctest::Approx(3.25).epsilon(1e-12));

  // A box far past the edge: the cells beyond any tap read exactly zero.
  RoiFeature g = roi_align(fm, Box(3.0, 3.0, 20.0, 5.0), 1, 4, 1, 1);
  CHECK(g.values(0, 0, 3) == 0.0);
  CHECK(g.values(0, 0, 0) == doctest::Approx(3.25));
}

TEST_CASE("aligned output stays within the map value range") {
  Rng rng(76);
  for (int it = 0; it < 100; ++it) {
    const int H = 5 + rng.uniform_int(8), W = 5 + rng.uniform_int(8);
    Tensord fm = random_tensor({1, H, W}, rng);
    double lo = fm.data[0], hi = fm.data[0];
    for (auto v : fm.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    Box box = random_box(rng, H, W, true);
    RoiFeature f = roi_align(fm, box, 3, 3, 1 + rng.uniform_int(3), 1 + rng.uniform_int(3));
    for (auto v : f.values.data) {
      CHECK(v >= std::min(lo, 0.0) - 1e-12);
      CHECK(v <= std::max(hi, 0.0) + 1e-12);
    }
  }
}

TEST_CASE("roi_pool equals the exhaustive per-bin max oracle exactly") {
  Rng rng(77);
  for (int it = 0; it < 300; ++it) {
    const int C = 1 + rng.uniform_int(2);
    const int H = 4 + rng.uniform_int(10), W = 4 + rng.uniform_int(10);
    Tensord fm = random_tensor({C, H, W}, rng);
    Box box;
    do {
      box = random_box(rng, H, W, true);
    } while (box.x2 <= 0 || box.y2 <= 0 || box.x1 >= W || box.y1 >= H);
    const int oh = 1 + rng.uniform_int(4), ow = 1 + rng.uniform_int(4);
    RoiFeature f = roi_pool(fm, box, oh, ow);
    Tensord want = pool_oracle(fm, box, oh, ow);
    REQUIRE(f.values.shape == want.shape);
    CHECK(bitwise_equal(f.values, want));
  }
}

TEST_CASE("roi_pool spec cases: whole-map 1x1 global max, 8x8 out 2x2 oracle, errors") {
  Rng rng(78);
  Tensord fm = random_tensor({2, 8, 8}, rng);
  RoiFeature g = roi_pool(fm, Box(0, 0, 8, 8), 1, 1);
  for (int c = 0; c < 2; ++c) {
    double m = fm(c, 0, 0);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) m = std::max(m, fm(c, y, x));
    CHECK(g.values(c, 0, 0) == m);
  }
  for (int it = 0; it < 100; ++it) {
    Tensord map8 = random_tensor({1, 8, 8}, rng);
    Box box = random_box(rng, 8, 8, false);
    RoiFeature f = roi_pool(map8, box, 2, 2);
    CHECK(bitwise_equal(f.values, pool_oracle(map8, box, 2, 2)));
  }
  Tensord cm({1, 5, 5});
  for (auto& v : cm.data) v = -1.5;
  RoiFeature cf = roi_pool(cm, Box(0.2, 0.8, 4.4, 4.9), 3, 3);
  for (auto v : cf.values.data) CHECK(v == -1.5);

  CHECK_THROWS_AS(roi_pool(fm, Box(9, 9, 12, 12), 2, 2), OutOfBoundsError);
  CHECK_THROWS_AS(roi_pool(fm, Box(-5, -5, -1, -1), 2, 2), OutOfBoundsError);
  CHECK_THROWS_AS(roi_pool(fm, Box(3, 3, 3, 3), 2, 2), ArgumentError);
  CHECK_THROWS_AS(roi_align(fm, Box(1, 1, 1 + 1e-8, 4), 2, 2, 1, 1), DegenerateBoxError);
}

TEST_CASE("all modes are covariant under joint one-cell map and box shifts") {
  Rng rng(79);
  const int H = 12, W = 12;
  Tensord fm = random_tensor({2, H, W}, rng);
  Tensord rolled({2, H, W});
  for (int c = 0; c < 2; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) rolled(c, y, x) = fm(c, (y + H - 1) % H, (x + W - 1) % W);

  for (int it = 0; it < 30; ++it) {
    // Interior box with margin so no kernel or bin touches the wrapped border.
    double x1 = rng.uniform(3.0, 5.0), y1 = rng.uniform(3.0, 5.0);
    Box box(x1, y1, x1 + rng.uniform(1.0, 3.5), y1 + rng.uniform(1.0, 3.5));
    Box shifted = box.translated(1, 1);
    for (ExtractMode mode : {ExtractMode::RoIPooling, ExtractMode::RoIAlign, ExtractMode::AdaptiveRoIAlign}) {
      ExtractConfig cfg;
      cfg.mode = mode;
      cfg.pre_pool_size = 3;
      cfg.pool_kernel = 1;
      cfg.pool_stride = 1;
      auto a = extract_batch(fm, {box}, cfg);
      auto b = extract_batch(rolled, {shifted}, cfg);
      if (mode == ExtractMode::RoIPooling) {
        // Bin arithmetic is integral and values are copied, so exact.
        CHECK(bitwise_equal(a[0].values, b[0].values));
      } else {
        // Sample coordinates pick up one rounding step from the shift.
        CHECK(testutil::max_abs_diff(a[0].values, b[0].values) < 1e-12);
      }
    }
  }
}

TEST_CASE("extract_batch equals the per-box loop and preserves order") {
  Rng rng(80);
  Tensord fm = random_tensor({3, 10, 10}, rng);
  std::vector<Box> boxes;
  for (int i = 0; i < 256; ++i) boxes.push_back(random_box(rng, 10, 10, false));
  for (ExtractMode mode : {ExtractMode::RoIAlign, ExtractMode::AdaptiveRoIAlign}) {
    ExtractConfig cfg;
    cfg.mode = mode;
    auto batch = extract_batch(fm, boxes, cfg);
    REQUIRE(batch.size() == boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      auto single = extract_batch(fm, {boxes[i]}, cfg);
      CHECK(bitwise_equal(batch[i].values, single[0].values));
      CHECK(batch[i].values.shape == std::vector<int>{3, 3, 3});
    }
  }
}

TEST_CASE("duplicated boxes produce bitwise identical features") {
  Rng rng(81);
  Tensord fm = random_tensor({2, 9, 9}, rng);
  Box b = random_box(rng, 9, 9, false);
  ExtractConfig cfg;
  auto out = extract_batch(fm, {b, b, b}, cfg);
  CHECK(bitwise_equal(out[0].values, out[1].values));
  CHECK(bitwise_equal(out[1].values, out[2].values));
}

TEST_CASE("extract_batch reports the failing box index") {
  Rng rng(82);
  Tensord fm = random_tensor({1, 8, 8}, rng);
  std::vector<Box> boxes = {random_box(rng, 8, 8, false), random_box(rng, 8, 8, false),
                            random_box(rng, 8, 8, false), Box(2, 2, 2, 2)};
  ExtractConfig cfg;
  try {
    extract_batch(fm, boxes, cfg);
    FAIL("expected a throw");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("box 3") != std::string::npos);
  }
}

TEST_CASE("multi-sample cells agree with the dense oracle") {
  Rng rng(83);
  for (int it = 0; it < 100; ++it) {
    const int H = 6 + rng.uniform_int(6), W = 6 + rng.uniform_int(6);
    Tensord fm = random_tensor({2, H, W}, rng);
    Box box = random_box(rng, H, W, true);
    RoiFeature f = roi_align(fm, box, 3, 3, 2, 2, 3);
    Tensord want = dense_tent_oracle(fm, box, 3, 3, 2, 2, 3);
    CHECK(testutil::max_abs_diff(f.values, want) <= 1e-6);
  }
}

TEST_CASE("bandwidth changes values but never shape") {
  Rng rng(84);
  Tensord fm = random_tensor({1, 10, 10}, rng);
  Box box(1.5, 2.0, 8.0, 9.0);
  for (int bw = 1; bw <= 4; ++bw) {
    RoiFeature f = roi_align(fm, box, 7, 7, bw, bw);
    CHECK(f.values.shape == std::vector<int>{1, 7, 7});
  }
}

TEST_CASE("snap_to_map pulls non-intersecting boxes to a border sliver") {
  Box right(12.0, 2.0, 15.0, 5.0);
  Box s = snap_to_map(right, 10, 10);
  CHECK(s.x1 == 9.0);
  CHECK(s.x2 == 10.0);
  CHECK(s.y1 == 2.0);
  Box above(2.0, -6.0, 5.0, -1.0);
  Box t = snap_to_map(above, 10, 10);
  CHECK(t.y1 == 0.0);
  CHECK(t.y2 == 1.0);
  Box inside(2.0, 2.0, 5.0, 5.0);
  Box u = snap_to_map(inside, 10, 10);
  CHECK(u.x1 == inside.x1);
  CHECK(u.y2 == inside.y2);
  // Snapped result always intersects, so pooling cannot throw.
  Tensord fm({1, 10, 10});
  CHECK_NOTHROW(roi_pool(fm, snap_to_map(Box(-9, -9, -2, -2), 10, 10), 2, 2));
}
