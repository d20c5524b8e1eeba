// Deterministic synthetic tracking sequences: a procedurally textured target
// moving over a textured background, optional lookalike distractors, scale
// drift, and a linear illumination ramp. Ground truth keeps the target fully
// inside the frame (bounce at the borders).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/dataset.hpp"
#include "mdt/image.hpp"

namespace mdt {

/// Smooth RGB pattern: per channel a base level plus a few random-frequency
/// sinusoids over normalized patch coordinates.
struct Texture {
  struct Wave {
    double amp, fx, fy, phase;
  };
  double base[3] = {0.5, 0.5, 0.5};
  std::vector<Wave> waves[3];

  /// Color at normalized coordinates, each channel clamped to [0,1].
  void sample(double u, double v, double rgb[3]) const;
};

Texture make_texture(std::uint64_t seed);

/// Pixelwise blend: t = 0 gives a, t = 1 gives b exactly.
Texture blend_textures(const Texture& a, const Texture& b, double t);

struct SyntheticSpec {
  int width = 160, height = 120;
  int frames = 120;
  double target_w = 36, target_h = 36;
  double vx = 0, vy = 0;             // target velocity, px/frame
  double motion_noise = 0;           // stddev of per-frame center jitter, px
  double scale_rate = 0;             // per-frame relative size drift
  int distractors = 0;
  double distractor_similarity = 0;  // 1.0 renders distractors with the target texture
  double illumination_drift = 0;     // total relative brightness swing over the sequence
  std::uint64_t texture_seed = 1;

  void validate() const;
};

struct GeneratedSequence {
  std::vector<Image> frames;
  std::vector<Box> gt;  // one per frame, fully inside the frame
};

/// Deterministic given (spec, seed). Throws GenerationError when the target
/// cannot stay inside the frame (too large at some point of the scale drift).
GeneratedSequence generate_sequence(const SyntheticSpec& spec, std::uint64_t seed);

/// Writes frames as zero-padded .ppm files plus groundtruth.txt ("x,y,w,h").
void write_sequence(const std::string& dir, const GeneratedSequence& seq);

struct SuiteEntry {
  std::string name;
  SyntheticSpec spec;
  std::uint64_t seed;
};

/// The fixed 12-sequence benchmark: 3 each of static, linear-motion,
/// scale-drift, and distractor sequences, seeds pinned here.
std::vector<SuiteEntry> synthetic_suite();

/// Three same-shaped, differently textured training domains (small frames so
/// multi-domain training stays fast).
std::vector<SuiteEntry> pretrain_domains();

/// Generates every entry under root/<name>/ and returns the sequences.
std::vector<Sequence> materialize_suite(const std::string& root, const std::vector<SuiteEntry>& entries);

}  // namespace mdt
