#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "helpers.hpp"
#include "mdt/config.hpp"
#include "mdt/dataset.hpp"
#include "mdt/gradcheck.hpp"
#include "mdt/net.hpp"
#include "mdt/synth.hpp"

using namespace mdt;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const char* leaf) {
  fs::path p = fs::temp_directory_path() / "mdt_io_tests" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("synthetic generation is bitwise deterministic in (spec, seed)") {
  SyntheticSpec spec;
  spec.frames = 12;
  spec.vx = 1.0;
  spec.vy = 0.5;
  spec.motion_noise = 0.2;
  spec.distractors = 2;
  spec.distractor_similarity = 0.6;
  spec.illumination_drift = 0.2;
  GeneratedSequence a = generate_sequence(spec, 77);
  GeneratedSequence b = generate_sequence(spec, 77);
  REQUIRE(a.frames.size() == b.frames.size());
  for (std::size_t i = 0; i < a.frames.size(); ++i) CHECK(a.frames[i].data == b.frames[i].data);
  for (std::size_t i = 0; i < a.gt.size(); ++i) {
    CHECK(a.gt[i].x1 == b.gt[i].x1);
    CHECK(a.gt[i].y2 == b.gt[i].y2);
  }
  GeneratedSequence c = generate_sequence(spec, 78);
  bool same = true;
  for (std::size_t i = 0; i < a.frames.size() && same; ++i) same = a.frames[i].data == c.frames[i].data;
  CHECK_FALSE(same);
}

TEST_CASE("generated boxes stay inside the frame across motion and scale drift") {
  SyntheticSpec spec;
  spec.frames = 60;
  spec.vx = 1.5;
  spec.vy = -1.0;
  spec.motion_noise = 0.5;
  spec.scale_rate = 0.004;
  GeneratedSequence g = generate_sequence(spec, 5);
  REQUIRE(g.gt.size() == 60);
  for (const Box& b : g.gt) {
    CHECK(b.x1 >= 0);
    CHECK(b.y1 >= 0);
    CHECK(b.x2 <= spec.width);
    CHECK(b.y2 <= spec.height);
    CHECK(b.valid());
  }
}

TEST_CASE("impossible synthetic specs are rejected") {
  SyntheticSpec spec;
  spec.target_w = 300;  // wider than the frame
  CHECK_THROWS_AS(generate_sequence(spec, 1), GenerationError);
  SyntheticSpec growing;
  growing.frames = 400;
  growing.scale_rate = 0.05;  // exceeds the frame midway
  CHECK_THROWS_AS(generate_sequence(growing, 1), GenerationError);
  SyntheticSpec bad;
  bad.frames = 0;
  CHECK_THROWS_AS(generate_sequence(bad, 1), GenerationError);
}

TEST_CASE("write_sequence and load_sequence round trip frames and boxes") {
  fs::path dir = scratch_dir("roundtrip");
  SyntheticSpec spec;
  spec.frames = 6;
  spec.width = 64;
  spec.height = 48;
  spec.target_w = 20;
  spec.target_h = 16;
  GeneratedSequence g = generate_sequence(spec, 9);
  write_sequence(dir.string(), g);
  Sequence s = load_sequence(dir.string());
  REQUIRE(s.size() == 6);
  REQUIRE(s.gt.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    Image f = s.frame(i);
    CHECK(f.data == g.frames[i].data);
    CHECK(std::abs(s.gt[i].x1 - g.gt[i].x1) < 1e-6);
    CHECK(std::abs(s.gt[i].y2 - g.gt[i].y2) < 1e-6);
  }
  fs::remove_all(dir.parent_path());
}

TEST_CASE("the benchmark suite has 12 pinned sequences in 4 tiers") {
  auto suite = synthetic_suite();
  REQUIRE(suite.size() == 12);
  int statics = 0, linear = 0, scale = 0, distract = 0;
  for (const auto& e : suite) {
    e.spec.validate();
    if (e.name.rfind("static", 0) == 0) ++statics;
    if (e.name.rfind("linear", 0) == 0) ++linear;
    if (e.name.rfind("scale", 0) == 0) ++scale;
    if (e.name.rfind("distract", 0) == 0) ++distract;
  }
  CHECK(statics == 3);
  CHECK(linear == 3);
  CHECK(scale == 3);
  CHECK(distract == 3);
  auto domains = pretrain_domains();
  CHECK(domains.size() == 3);
  // Training domains share geometry but not texture.
  CHECK(domains[0].spec.target_w == domains[1].spec.target_w);
  CHECK(domains[0].spec.texture_seed != domains[1].spec.texture_seed);
}

TEST_CASE("results files round trip and keep the line format") {
  fs::path dir = scratch_dir("results");
  std::vector<FrameRecord> recs = {{0, Box::from_xywh(10, 20, 30, 40), 1.0},
                                   {1, Box::from_xywh(11.5, 21.25, 30, 40), 0.875}};
  std::string path = (dir / "results.txt").string();
  write_results(path, recs);
  auto back = read_results(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].frame == 0);
  CHECK(back[1].score == doctest::Approx(0.875));
  CHECK(std::abs(back[1].box.x1 - 11.5) < 1e-9);
  CHECK(std::abs(back[1].box.width() - 30) < 1e-9);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("0,", 0) == 0);
  CHECK(std::count(line.begin(), line.end(), ',') == 5);
  fs::remove_all(dir.parent_path());
}

TEST_CASE("config text parsing strips comments and reports bad lines") {
  KeyValues kv = parse_config_text("# comment\n\n lr = 0.01 \nmode=align # trailing\n");
  CHECK(kv.at("lr") == "0.01");
  CHECK(kv.at("mode") == "align");
  CHECK_THROWS_AS(parse_config_text("novalue\n"), ConfigError);
  try {
    parse_config_text("a=1\nbad line\n");
    FAIL("expected a throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config"), IoError);
}

TEST_CASE("config appliers fill structs and reject unknown keys") {
  PretrainConfig pc;
  NetworkChoice net;
  apply_config(parse_config_text("lr=0.002\nalpha=0.3\nvariant=original\nmode=pool\npreset=full\n"
                                 "accumulate_every=25\nmax_iterations=10\n"),
               pc, net);
  CHECK(pc.lr == 0.002);
  CHECK(pc.alpha == 0.3);
  CHECK(pc.accumulate_every == 25);
  CHECK(pc.max_iterations == 10);
  CHECK(net.variant == BackboneVariant::Original);
  CHECK(net.mode == ExtractMode::RoIPooling);
  CHECK(net.full_channels);
  CHECK_THROWS_AS(apply_config(parse_config_text("no_such_key=1\n"), pc, net), ConfigError);
  CHECK_THROWS_AS(apply_config(parse_config_text("variant=resnet\n"), pc, net), ConfigError);
  CHECK_THROWS_AS(apply_config(parse_config_text("lr=fast\n"), pc, net), ConfigError);

  TrackerConfig tc;
  apply_config(parse_config_text("n_candidates=128\nsuccess_threshold=0.6\nuse_bbox_regressor=false\n"
                                 "long_interval=8\n"),
               tc);
  CHECK(tc.n_candidates == 128);
  CHECK(tc.success_threshold == 0.6);
  CHECK_FALSE(tc.use_bbox_regressor);
  CHECK(tc.long_interval == 8);
  CHECK_THROWS_AS(apply_config(parse_config_text("warp_speed=9\n"), tc), ConfigError);
}

TEST_CASE("network checkpoints round trip bitwise with topology metadata") {
  fs::path dir = scratch_dir("ckpt");
  Rng rng(31);
  NetworkConfig cfg = NetworkConfig::toy(BackboneVariant::Original, 3, ExtractMode::RoIPooling);
  NetworkParams p = init_network(cfg, rng);
  std::string path = (dir / "net.ckpt").string();
  save_network(path, p, cfg);
  LoadedNetwork back = load_network(path);
  CHECK(back.config.backbone.variant == BackboneVariant::Original);
  CHECK(back.config.extract.mode == ExtractMode::RoIPooling);
  CHECK(back.config.head.domains == 3);
  CHECK(back.config.head.in_features == cfg.head.in_features);
  CHECK(back.params.backbone.w1.data == p.backbone.w1.data);
  CHECK(back.params.backbone.b3.data == p.backbone.b3.data);
  CHECK(back.params.head.w6.size() == 3);
  CHECK(back.params.head.w6[2].data == p.head.w6[2].data);

  // Same parameters saved twice fingerprint identically; different params differ.
  std::string path2 = (dir / "net2.ckpt").string();
  save_network(path2, p, cfg);
  CHECK(file_fingerprint(path) == file_fingerprint(path2));
  NetworkParams q = init_network(cfg, rng);
  save_network(path2, q, cfg);
  CHECK(file_fingerprint(path) != file_fingerprint(path2));
  fs::remove_all(dir.parent_path());
}

TEST_CASE("checkpoint loader rejects corrupt files") {
  fs::path dir = scratch_dir("corrupt");
  std::string path = (dir / "bad.ckpt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/x.ckpt"), IoError);
  fs::remove_all(dir.parent_path());
}

TEST_CASE("gradient suite passes every check within tolerance") {
  auto results = run_gradient_suite(7, 20, 1e-5, 1e-4);
  REQUIRE(results.size() >= 8);
  for (const auto& r : results) {
    INFO(r.name, " rel_err=", r.max_rel_err);
    CHECK(r.pass);
    CHECK(r.instances == 20);
  }
}
