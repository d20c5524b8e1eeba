#include "mdt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "mdt/head.hpp"
#include "mdt/layers.hpp"
#include "mdt/net.hpp"
#include "mdt/roi.hpp"

namespace mdt {

namespace {

double dot(const Tensord& a, const Tensord& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

Tensord random_direction(const std::vector<int>& shape, Rng& rng) {
  Tensord d(shape);
  for (auto& v : d.data) v = rng.normal();
  return d;
}

/// One directional probe plus a handful of coordinate probes of f around
/// theta, against the analytic gradient. Returns the worst relative error.
double probe(Tensord& theta, const Tensord& analytic, const std::function<double()>& f, Rng& rng,
             double h) {
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); };
  double worst = 0;

  const Tensord dir = random_direction(theta.shape, rng);
  Tensord saved = theta;
  for (std::size_t i = 0; i < theta.data.size(); ++i) theta.data[i] = saved.data[i] + h * dir.data[i];
  const double fp = f();
  for (std::size_t i = 0; i < theta.data.size(); ++i) theta.data[i] = saved.data[i] - h * dir.data[i];
  const double fm = f();
  theta = saved;
  worst = std::max(worst, rel((fp - fm) / (2 * h), dot(analytic, dir)));

  const int coords = std::min<std::size_t>(4, theta.data.size());
  for (int k = 0; k < coords; ++k) {
    const std::size_t i = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(theta.data.size())));
    const double orig = theta.data[i];
    theta.data[i] = orig + h;
    const double a = f();
    theta.data[i] = orig - h;
    const double b = f();
    theta.data[i] = orig;
    worst = std::max(worst, rel((a - b) / (2 * h), analytic.data[i]));
  }
  return worst;
}

struct Suite {
  std::uint64_t seed;
  int instances;
  double h, tol;
  std::vector<GradCheckResult> results;

  void run(const std::string& name, const std::function<double(Rng&)>& one_instance) {
    GradCheckResult r;
    r.name = name;
    r.instances = instances;
    for (int i = 0; i < instances; ++i) {
      Rng rng(seed + 1000ull * static_cast<std::uint64_t>(i) + fnv1a(name.data(), name.size()));
      r.max_rel_err = std::max(r.max_rel_err, one_instance(rng));
    }
    r.pass = r.max_rel_err < tol;
    results.push_back(std::move(r));
  }
};

Tensord random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
  Tensord t(shape);
  for (auto& v : t.data) v = scale * rng.normal();
  return t;
}

std::vector<int> random_labels(int n, Rng& rng) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  bool has_pos = false;
  for (auto& l : labels) {
    l = rng.uniform_int(2);
    has_pos = has_pos || l == 1;
  }
  if (!has_pos) labels[0] = 1;  // loss_inst needs at least one positive
  return labels;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, int instances, double h, double tol) {
  Suite s{seed, instances, h, tol, {}};

  s.run("conv2d", [h](Rng& rng) {
    const int ci = 1 + rng.uniform_int(3), co = 1 + rng.uniform_int(3);
    const int k = 2 + rng.uniform_int(2);
    const int stride = 1 + rng.uniform_int(2), dilation = 1 + rng.uniform_int(2);
    const int side = k + dilation * (k - 1) + 2 + rng.uniform_int(4);
    Tensord x = random_tensor({ci, side, side}, rng);
    Tensord w = random_tensor({co, ci, k, k}, rng, 0.5);
    Tensord b = random_tensor({co}, rng, 0.1);
    const Tensord p = random_direction(conv2d(x, w, b, stride, dilation).shape, rng);
    auto loss = [&]() { return dot(conv2d(x, w, b, stride, dilation), p); };
    LayerGrad g = conv2d_backward(x, w, b, stride, dilation, 0, p);
    double worst = probe(w, g.d_params[0], loss, rng, h);
    worst = std::max(worst, probe(b, g.d_params[1], loss, rng, h));
    return std::max(worst, probe(x, g.d_input, loss, rng, h));
  });

  s.run("linear", [h](Rng& rng) {
    const int n = 1 + rng.uniform_int(4), fi = 2 + rng.uniform_int(6), fo = 1 + rng.uniform_int(5);
    Tensord x = random_tensor({n, fi}, rng);
    Tensord w = random_tensor({fo, fi}, rng, 0.5);
    Tensord b = random_tensor({fo}, rng, 0.1);
    const Tensord p = random_direction({n, fo}, rng);
    auto loss = [&]() { return dot(linear(x, w, b), p); };
    LayerGrad g = linear_backward(x, w, p);
    double worst = probe(w, g.d_params[0], loss, rng, h);
    worst = std::max(worst, probe(b, g.d_params[1], loss, rng, h));
    return std::max(worst, probe(x, g.d_input, loss, rng, h));
  });

  s.run("backbone_convs", [h](Rng& rng) {
    BackboneConfig cfg = rng.uniform() < 0.5 ? BackboneConfig::toy(BackboneVariant::Original)
                                             : BackboneConfig::toy(BackboneVariant::DenseFM);
    cfg.c1 = 2;
    cfg.c2 = 3;
    cfg.c3 = 2;
    BackboneParams bp = init_backbone(cfg, rng);
    const int side = cfg.receptive_field() + rng.uniform_int(6);
    Tensord x = random_tensor({3, side, side}, rng, 0.5);
    BackboneTrace trace;
    const Tensord p = random_direction(forward_features_traced(x, bp, cfg, &trace).shape, rng);
    auto loss = [&]() { return dot(forward_features(x, bp, cfg), p); };
    BackboneGrads g = backward_features(p, trace, bp, cfg);
    // Perturbing conv1 propagates through every relu and pooling stage, so a
    // step that is safe for a single layer can cross argmax ties here.  Use a
    // proportionally smaller step; central differences stay far above the
    // cancellation floor at this scale.
    const double hd = h * 1e-2;
    double worst = probe(bp.w1, g.d_w1, loss, rng, hd);
    worst = std::max(worst, probe(bp.b1, g.d_b1, loss, rng, hd));
    worst = std::max(worst, probe(bp.w2, g.d_w2, loss, rng, hd));
    worst = std::max(worst, probe(bp.b2, g.d_b2, loss, rng, hd));
    worst = std::max(worst, probe(bp.w3, g.d_w3, loss, rng, hd));
    return std::max(worst, probe(bp.b3, g.d_b3, loss, rng, hd));
  });

  s.run("head_params", [h](Rng& rng) {
    HeadConfig hc;
    hc.in_features = 2 * 3 * 3;
    hc.hidden = 4 + rng.uniform_int(4);
    hc.domains = 1 + rng.uniform_int(3);
    HeadParams hp = init_head(hc, rng);
    const int n = 2 + rng.uniform_int(4);
    Tensord x = random_tensor({n, hc.in_features}, rng);
    const std::vector<int> labels = random_labels(n, rng);
    const int dom = rng.uniform_int(hc.domains);
    std::vector<int> subset;
    for (int d = 0; d < hc.domains; ++d) subset.push_back(d);
    const double alpha = 0.1;

    auto loss = [&]() {
      return multi_task_loss(head_forward_batch(x, hp), labels, dom, subset, alpha).total;
    };
    HeadTrace trace;
    Tensord scores = head_forward_batch(x, hp, &trace);
    LossResult lr = multi_task_loss(scores, labels, dom, subset, alpha);
    HeadGrads g = head_backward(lr.d_scores, trace, hp);
    double worst = probe(hp.w4, g.d_w4, loss, rng, h);
    worst = std::max(worst, probe(hp.b4, g.d_b4, loss, rng, h));
    worst = std::max(worst, probe(hp.w5, g.d_w5, loss, rng, h));
    worst = std::max(worst, probe(hp.b5, g.d_b5, loss, rng, h));
    for (int d = 0; d < hc.domains; ++d) {
      worst = std::max(worst, probe(hp.w6[static_cast<std::size_t>(d)], g.d_w6[static_cast<std::size_t>(d)], loss, rng, h));
      worst = std::max(worst, probe(hp.b6[static_cast<std::size_t>(d)], g.d_b6[static_cast<std::size_t>(d)], loss, rng, h));
    }
    return std::max(worst, probe(x, g.d_x, loss, rng, h));
  });

  s.run("loss_cls", [h](Rng& rng) {
    const int n = 1 + rng.uniform_int(5), D = 1 + rng.uniform_int(3);
    Tensord scores = random_tensor({n, 2, D}, rng);
    const std::vector<int> labels = random_labels(n, rng);
    const int dom = rng.uniform_int(D);
    std::vector<int> subset = {dom};
    auto loss = [&]() { return loss_cls(scores, labels, dom); };
    const Tensord analytic = multi_task_loss(scores, labels, dom, subset, 0.0).d_scores;
    return probe(scores, analytic, loss, rng, h);
  });

  s.run("loss_inst", [h](Rng& rng) {
    const int n = 1 + rng.uniform_int(5), D = 2 + rng.uniform_int(3);
    Tensord scores = random_tensor({n, 2, D}, rng);
    const std::vector<int> labels = random_labels(n, rng);
    const int dom = rng.uniform_int(D);
    std::vector<int> subset;
    for (int d = 0; d < D; ++d) subset.push_back(d);
    auto loss = [&]() { return loss_inst(scores, labels, dom, subset); };
    // The alpha-1 and alpha-0 gradients differ by exactly the instance term.
    Tensord analytic = multi_task_loss(scores, labels, dom, subset, 1.0).d_scores;
    const Tensord cls_only = multi_task_loss(scores, labels, dom, subset, 0.0).d_scores;
    for (std::size_t i = 0; i < analytic.data.size(); ++i) analytic.data[i] -= cls_only.data[i];
    return probe(scores, analytic, loss, rng, h);
  });

  s.run("roi_extract_backward", [h](Rng& rng) {
    const int C = 1 + rng.uniform_int(3), H = 9 + rng.uniform_int(6), W = 9 + rng.uniform_int(6);
    Tensord fm = random_tensor({C, H, W}, rng);
    ExtractConfig ec;
    const int mode = rng.uniform_int(3);
    ec.mode = mode == 0 ? ExtractMode::RoIPooling
                        : (mode == 1 ? ExtractMode::RoIAlign : ExtractMode::AdaptiveRoIAlign);
    std::vector<Box> boxes;
    for (int i = 0; i < 2; ++i) {
      const double x1 = rng.uniform(0.0, W - 4.0), y1 = rng.uniform(0.0, H - 4.0);
      boxes.push_back(Box(x1, y1, x1 + rng.uniform(2.5, 3.9), y1 + rng.uniform(2.5, 3.9)));
    }
    ExtractBatchResult ex = extract_batch_impl(fm, boxes, ec, true);
    std::vector<Tensord> d_feats;
    Rng dir_rng(rng.uniform_int(1 << 30));
    for (const auto& f : ex.features) d_feats.push_back(random_direction(f.values.shape, dir_rng));
    auto loss = [&]() {
      ExtractBatchResult r = extract_batch_impl(fm, boxes, ec, false);
      double acc = 0;
      for (std::size_t i = 0; i < r.features.size(); ++i) acc += dot(r.features[i].values, d_feats[i]);
      return acc;
    };
    const Tensord analytic = extract_backward(ex.traces, d_feats, fm.shape);
    return probe(fm, analytic, loss, rng, h);
  });

  s.run("feature_to_loss_chain", [h](Rng& rng) {
    NetworkConfig cfg = NetworkConfig::toy(BackboneVariant::DenseFM, 2, ExtractMode::AdaptiveRoIAlign);
    cfg.backbone.c1 = 2;
    cfg.backbone.c2 = 3;
    cfg.backbone.c3 = 2;
    cfg.head.in_features = cfg.roi_feature_width();
    cfg.head.hidden = 4;
    NetworkParams params = init_network(cfg, rng);
    const int side = cfg.backbone.receptive_field() + 8;
    Tensord crop = random_tensor({3, side, side}, rng, 0.5);
    std::vector<Box> boxes;
    for (int i = 0; i < 3; ++i) {
      const double x1 = rng.uniform(0.0, side / 2.0), y1 = rng.uniform(0.0, side / 2.0);
      boxes.push_back(Box(x1, y1, x1 + rng.uniform(20.0, 40.0), y1 + rng.uniform(20.0, 40.0)));
    }
    const std::vector<int> labels = {1, 1, 0};
    const std::vector<int> subset = {0, 1};
    const double stride = cfg.backbone.feature_stride();

    auto loss = [&]() {
      Tensord fm = forward_features(crop, params.backbone, cfg.backbone);
      std::vector<Box> projected;
      for (const Box& b : boxes) projected.push_back(project_box(b, stride));
      ExtractBatchResult ex = extract_batch_impl(fm, projected, cfg.extract, false);
      const int fw = cfg.roi_feature_width();
      Tensord X({static_cast<int>(boxes.size()), fw});
      for (std::size_t i = 0; i < ex.features.size(); ++i)
        std::copy(ex.features[i].values.data.begin(), ex.features[i].values.data.end(),
                  X.data.begin() + i * static_cast<std::size_t>(fw));
      return multi_task_loss(head_forward_batch(X, params.head), labels, 0, subset, 0.1).total;
    };

    // Analytic chain: head -> RoI features -> shared map -> conv weights.
    BackboneTrace trace;
    Tensord fm = forward_features_traced(crop, params.backbone, cfg.backbone, &trace);
    std::vector<Box> projected;
    for (const Box& b : boxes) projected.push_back(project_box(b, stride));
    ExtractBatchResult ex = extract_batch_impl(fm, projected, cfg.extract, true);
    const int fw = cfg.roi_feature_width();
    Tensord X({static_cast<int>(boxes.size()), fw});
    for (std::size_t i = 0; i < ex.features.size(); ++i)
      std::copy(ex.features[i].values.data.begin(), ex.features[i].values.data.end(),
                X.data.begin() + i * static_cast<std::size_t>(fw));
    HeadTrace htrace;
    Tensord scores = head_forward_batch(X, params.head, &htrace);
    LossResult lr = multi_task_loss(scores, labels, 0, subset, 0.1);
    HeadGrads hg = head_backward(lr.d_scores, htrace, params.head);
    std::vector<Tensord> d_feats;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      Tensord df(ex.features[i].values.shape);
      std::copy(hg.d_x.data.begin() + i * static_cast<std::size_t>(fw),
                hg.d_x.data.begin() + (i + 1) * static_cast<std::size_t>(fw), df.data.begin());
      d_feats.push_back(std::move(df));
    }
    const Tensord d_fm = extract_backward(ex.traces, d_feats, fm.shape);
    BackboneGrads bg = backward_features(d_fm, trace, params.backbone, cfg.backbone);

    double worst = probe(params.backbone.w1, bg.d_w1, loss, rng, h);
    worst = std::max(worst, probe(params.backbone.w3, bg.d_w3, loss, rng, h));
    return std::max(worst, probe(params.head.w4, hg.d_w4, loss, rng, h));
  });

  return s.results;
}

std::string format_gradient_report(const std::vector<GradCheckResult>& results) {
  std::string out;
  char line[128];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%-24s instances=%-3d max_rel_err=%.3e %s\n", r.name.c_str(),
                  r.instances, r.max_rel_err, r.pass ? "PASS" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace mdt
