#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "deepagent/pipeline/manifest.hpp"

namespace deepagent::pipeline {

struct FixtureOptions {
  int samples = 200;
  double strength = 1.0;  // amplitude of the blocky artifacts on fake frames
  double gap = 1.0;       // fraction of the ASR/OCR overlap removed on fake samples
  std::uint64_t seed = 42;
  int frames_per_video = 10;
  int frame_size = 64;
  double audio_seconds = 0.5;
  int words = 12;

  void validate() const;
};

/// Writes a balanced synthetic corpus under `out_dir` (alternating real/fake)
/// and its manifest.json. Every draw comes from the seed, so the tree is
/// byte-identical across runs. Both classes consume the same draws; with
/// strength 0 and gap 0 they are identically distributed.
///   real: smooth gradient frames, sine audio, OCR sharing 75-100% of the ASR words
///   fake: the same plus 4x4-block offsets of +/- 0.35 * strength, and OCR
///         overlap scaled by (1 - gap)
std::filesystem::path gen_fixtures(const std::filesystem::path& out_dir, const FixtureOptions& options);

}  // namespace deepagent::pipeline
