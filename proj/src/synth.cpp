#include "mdt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

namespace mdt {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Fold x into [lo, hi] by reflection at both ends.
double reflect(double x, double lo, double hi) {
  const double span = hi - lo;
  if (span <= 0) return lo;
  double y = std::fmod(x - lo, 2 * span);
  if (y < 0) y += 2 * span;
  return lo + (y <= span ? y : 2 * span - y);
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

struct Actor {
  double cx, cy, vx, vy;
  Texture tex;
};

}  // namespace

void Texture::sample(double u, double v, double rgb[3]) const {
  for (int c = 0; c < 3; ++c) {
    double s = base[c];
    for (const Wave& w : waves[c]) s += w.amp * std::sin(kTwoPi * (w.fx * u + w.fy * v) + w.phase);
    rgb[c] = std::clamp(s, 0.0, 1.0);
  }
}

Texture make_texture(std::uint64_t seed) {
  Rng rng(seed);
  Texture t;
  for (int c = 0; c < 3; ++c) {
    t.base[c] = rng.uniform(0.25, 0.75);
    const int n = 2 + rng.uniform_int(2);
    for (int k = 0; k < n; ++k) {
      Texture::Wave w;
      w.amp = rng.uniform(0.08, 0.22);
      w.fx = rng.uniform(0.5, 4.0);
      w.fy = rng.uniform(0.5, 4.0);
      w.phase = rng.uniform(0.0, kTwoPi);
      t.waves[c].push_back(w);
    }
  }
  return t;
}

Texture blend_textures(const Texture& a, const Texture& b, double t) {
  if (t <= 0) return a;
  if (t >= 1) return b;
  Texture out;
  for (int c = 0; c < 3; ++c) {
    out.base[c] = (1 - t) * a.base[c] + t * b.base[c];
    for (Texture::Wave w : a.waves[c]) {
      w.amp *= 1 - t;
      out.waves[c].push_back(w);
    }
    for (Texture::Wave w : b.waves[c]) {
      w.amp *= t;
      out.waves[c].push_back(w);
    }
  }
  return out;
}

void SyntheticSpec::validate() const {
  if (width < 8 || height < 8) throw GenerationError("frame too small");
  if (frames < 1) throw GenerationError("sequence needs at least one frame");
  if (target_w <= 0 || target_h <= 0) throw GenerationError("target size must be positive");
  if (distractors < 0 || distractor_similarity < 0 || distractor_similarity > 1)
    throw GenerationError("distractor settings out of range");
  if (motion_noise < 0) throw GenerationError("motion noise must be >= 0");
}

GeneratedSequence generate_sequence(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (spec.target_w > spec.width || spec.target_h > spec.height)
    throw GenerationError("target does not fit inside the frame");

  Rng rng(seed);
  const Texture bg = make_texture(spec.texture_seed * 2654435761u + 1);
  const Texture target_tex = make_texture(spec.texture_seed * 2654435761u + 2);

  Actor target;
  target.cx = spec.width / 2.0 + rng.uniform(-spec.width * 0.1, spec.width * 0.1);
  target.cy = spec.height / 2.0 + rng.uniform(-spec.height * 0.1, spec.height * 0.1);
  target.vx = spec.vx;
  target.vy = spec.vy;
  target.tex = target_tex;

  std::vector<Actor> distractors;
  for (int i = 0; i < spec.distractors; ++i) {
    Actor d;
    d.cx = rng.uniform(spec.target_w / 2, spec.width - spec.target_w / 2);
    d.cy = rng.uniform(spec.target_h / 2, spec.height - spec.target_h / 2);
    d.vx = rng.uniform(-1.2, 1.2);
    d.vy = rng.uniform(-1.2, 1.2);
    const Texture own = make_texture(spec.texture_seed * 2654435761u + 10 + static_cast<std::uint64_t>(i));
    d.tex = blend_textures(own, target_tex, spec.distractor_similarity);
    distractors.push_back(d);
  }

  GeneratedSequence out;
  out.frames.reserve(static_cast<std::size_t>(spec.frames));
  out.gt.reserve(static_cast<std::size_t>(spec.frames));

  auto paint = [&](Image& img, const Actor& a, double w, double h, double gain) {
    const Box b = Box::from_center(a.cx, a.cy, w, h);
    const int px1 = std::max(0, static_cast<int>(std::floor(b.x1)));
    const int py1 = std::max(0, static_cast<int>(std::floor(b.y1)));
    const int px2 = std::min(img.width, static_cast<int>(std::ceil(b.x2)));
    const int py2 = std::min(img.height, static_cast<int>(std::ceil(b.y2)));
    double rgb[3];
    for (int y = py1; y < py2; ++y) {
      const double fy = y + 0.5;
      if (fy < b.y1 || fy >= b.y2) continue;
      for (int x = px1; x < px2; ++x) {
        const double fx = x + 0.5;
        if (fx < b.x1 || fx >= b.x2) continue;
        a.tex.sample((fx - b.x1) / w, (fy - b.y1) / h, rgb);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = quantize(rgb[c] * gain);
      }
    }
  };

  for (int t = 0; t < spec.frames; ++t) {
    const double scale = std::pow(1.0 + spec.scale_rate, t);
    const double w = spec.target_w * scale;
    const double h = spec.target_h * scale;
    if (w > spec.width || h > spec.height)
      throw GenerationError("scale drift pushes the target past the frame size at frame " + std::to_string(t));

    if (t > 0) {
      target.cx += target.vx + spec.motion_noise * rng.normal();
      target.cy += target.vy + spec.motion_noise * rng.normal();
      for (Actor& d : distractors) {
        d.cx += d.vx;
        d.cy += d.vy;
      }
    }
    target.cx = reflect(target.cx, w / 2, spec.width - w / 2);
    target.cy = reflect(target.cy, h / 2, spec.height - h / 2);
    for (Actor& d : distractors) {
      d.cx = reflect(d.cx, spec.target_w / 2, spec.width - spec.target_w / 2);
      d.cy = reflect(d.cy, spec.target_h / 2, spec.height - spec.target_h / 2);
    }

    const double gain =
        spec.frames > 1 ? 1.0 + spec.illumination_drift * (static_cast<double>(t) / (spec.frames - 1) - 0.5) : 1.0;

    Image img(spec.width, spec.height);
    double rgb[3];
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x) {
        bg.sample(static_cast<double>(x) / spec.width, static_cast<double>(y) / spec.height, rgb);
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = quantize(rgb[c] * gain);
      }
    for (const Actor& d : distractors) paint(img, d, spec.target_w, spec.target_h, gain);
    paint(img, target, w, h, gain);  // target last so it is never occluded

    out.frames.push_back(std::move(img));
    out.gt.push_back(Box::from_center(target.cx, target.cy, w, h));
  }
  return out;
}

void write_sequence(const std::string& dir, const GeneratedSequence& seq) {
  std::filesystem::create_directories(dir);
  char name[16];
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "%04zu.ppm", i);
    save_ppm(dir + "/" + name, seq.frames[i]);
  }
  write_groundtruth(dir + "/groundtruth.txt", seq.gt);
}

std::vector<SuiteEntry> synthetic_suite() {
  std::vector<SuiteEntry> suite;
  auto add = [&](const std::string& name, std::uint64_t seed, auto setup) {
    SuiteEntry e;
    e.name = name;
    e.seed = seed;
    e.spec.width = 160;
    e.spec.height = 120;
    e.spec.frames = 120;
    setup(e.spec);
    suite.push_back(std::move(e));
  };

  add("static_00", 101, [](SyntheticSpec& s) { s.texture_seed = 11; });
  add("static_01", 102, [](SyntheticSpec& s) {
    s.texture_seed = 12;
    s.target_w = s.target_h = 40;
    s.illumination_drift = 0.2;
  });
  add("static_02", 103, [](SyntheticSpec& s) {
    s.texture_seed = 13;
    s.target_w = s.target_h = 32;
  });

  add("linear_00", 201, [](SyntheticSpec& s) {
    s.texture_seed = 21;
    s.vx = 1.0;
    s.vy = 0.5;
    s.motion_noise = 0.15;
  });
  add("linear_01", 202, [](SyntheticSpec& s) {
    s.texture_seed = 22;
    s.vx = -0.8;
    s.vy = 0.7;
    s.motion_noise = 0.15;
    s.illumination_drift = 0.1;
  });
  add("linear_02", 203, [](SyntheticSpec& s) {
    s.texture_seed = 23;
    s.vx = 1.2;
    s.vy = -0.6;
    s.motion_noise = 0.2;
  });

  add("scale_00", 301, [](SyntheticSpec& s) {
    s.texture_seed = 31;
    s.vx = 0.6;
    s.vy = 0.4;
    s.motion_noise = 0.15;
    s.scale_rate = 0.004;
  });
  add("scale_01", 302, [](SyntheticSpec& s) {
    s.texture_seed = 32;
    s.vx = -0.5;
    s.vy = 0.5;
    s.motion_noise = 0.15;
    s.scale_rate = -0.004;
  });
  add("scale_02", 303, [](SyntheticSpec& s) {
    s.texture_seed = 33;
    s.vx = 0.7;
    s.vy = -0.3;
    s.motion_noise = 0.15;
    s.scale_rate = 0.005;
    s.illumination_drift = 0.15;
  });

  add("distract_00", 401, [](SyntheticSpec& s) {
    s.texture_seed = 41;
    s.vx = 0.9;
    s.vy = 0.5;
    s.motion_noise = 0.2;
    s.distractors = 2;
    s.distractor_similarity = 0.5;
  });
  add("distract_01", 402, [](SyntheticSpec& s) {
    s.texture_seed = 42;
    s.vx = -0.7;
    s.vy = 0.6;
    s.motion_noise = 0.2;
    s.distractors = 3;
    s.distractor_similarity = 0.7;
  });
  add("distract_02", 403, [](SyntheticSpec& s) {
    s.texture_seed = 43;
    s.vx = 1.0;
    s.vy = -0.5;
    s.motion_noise = 0.2;
    s.distractors = 2;
    s.distractor_similarity = 0.8;
    s.illumination_drift = 0.2;
  });

  return suite;
}

std::vector<SuiteEntry> pretrain_domains() {
  // Texture seeds chosen for well-separated base colors (red, green, blue
  // dominant) so the domains differ in appearance, not geometry.
  const std::uint64_t texture_seeds[3] = {94, 100, 82};
  std::vector<SuiteEntry> domains;
  for (int i = 0; i < 3; ++i) {
    SuiteEntry e;
    e.name = "domain_" + std::to_string(i);
    e.seed = 900 + static_cast<std::uint64_t>(i);
    e.spec.width = 80;
    e.spec.height = 80;
    e.spec.frames = 40;
    e.spec.target_w = e.spec.target_h = 44;
    e.spec.vx = 0.4;
    e.spec.vy = 0.3;
    e.spec.motion_noise = 0.3;
    e.spec.texture_seed = texture_seeds[i];
    domains.push_back(std::move(e));
  }
  return domains;
}

std::vector<Sequence> materialize_suite(const std::string& root, const std::vector<SuiteEntry>& entries) {
  std::vector<Sequence> seqs;
  for (const SuiteEntry& e : entries) {
    const std::string dir = root + "/" + e.name;
    write_sequence(dir, generate_sequence(e.spec, e.seed));
    seqs.push_back(load_sequence(dir));
  }
  return seqs;
}

}  // namespace mdt
