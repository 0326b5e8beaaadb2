#include "deepagent/pipeline/fixtures.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <string>

#include "deepagent/audio/wav.hpp"
#include "deepagent/binary_io.hpp"
#include "deepagent/rng.hpp"
#include "deepagent/vision/frame.hpp"

namespace deepagent::pipeline {

namespace fs = std::filesystem;

void FixtureOptions::validate() const {
  if (samples < 2 || samples % 2 != 0) throw UsageError("fixture sample count must be even and >= 2");
  if (!(strength >= 0.0 && strength <= 1.0)) throw UsageError("artifact strength must lie in [0, 1]");
  if (!(gap >= 0.0 && gap <= 1.0)) throw UsageError("overlap gap must lie in [0, 1]");
  if (frames_per_video < 1) throw UsageError("frames per video must be >= 1");
  if (frame_size < 8) throw UsageError("fixture frame size must be >= 8");
  if (!(audio_seconds > 0.0)) throw UsageError("audio length must be positive");
  if (words < 1) throw UsageError("word count must be >= 1");
}

namespace {

constexpr int kBlock = 4;
constexpr int kAudioRate = 16000;

std::vector<std::string> vocabulary() {
  static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr"};
  static const char* nuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ee"};
  static const char* codas[] = {"n", "r", "st", "m"};
  std::vector<std::string> words;
  for (const char* o : onsets)
    for (const char* n : nuclei)
      for (const char* c : codas) words.push_back(std::string(o) + n + c);
  return words;
}

std::string sentence(const std::vector<std::string>& words) {
  std::string s;
  for (std::size_t i = 0; i < words.size(); ++i) {
    std::string w = words[i];
    if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
    s += (i ? " " : "") + w;
  }
  return s + ".\n";
}

vision::Frame render_frame(int size, double base, double gx, double gy, const double tint[3], double phase,
                           const std::vector<double>& offsets) {
  vision::Frame f(size, size, 3);
  const int blocks = (size + kBlock - 1) / kBlock;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double smooth = base + gx * x / size + gy * y / size + 0.03 * std::sin(phase + 0.1 * (x + y));
      const double artifact = offsets[static_cast<std::size_t>((y / kBlock) * blocks + x / kBlock)];
      for (int c = 0; c < 3; ++c) {
        const double v = std::clamp(smooth + tint[c] + artifact, 0.0, 1.0);
        f.at(x, y, c) = std::round(v * 255.0);
      }
    }
  return f;
}

}  // namespace

fs::path gen_fixtures(const fs::path& out_dir, const FixtureOptions& o) {
  o.validate();
  const std::vector<std::string> vocab = vocabulary();
  if (static_cast<std::size_t>(2 * o.words) > vocab.size())
    throw UsageError("word count must be at most " + std::to_string(vocab.size() / 2));
  const Rng root(o.seed);
  std::vector<SampleRecord> records;
  const int blocks = (o.frame_size + kBlock - 1) / kBlock;

  for (int i = 0; i < o.samples; ++i) {
    Rng rng = root.derive(static_cast<std::uint64_t>(i));
    char id[32];
    std::snprintf(id, sizeof id, "vid%04d", i);
    SampleRecord rec;
    rec.id = id;
    rec.label = i % 2;
    const double artifact_scale = rec.label == 1 ? 0.35 * o.strength : 0.0;
    const fs::path dir = out_dir / rec.id;

    const double base = rng.uniform(0.3, 0.7), gx = rng.uniform(-0.3, 0.3), gy = rng.uniform(-0.3, 0.3);
    const double tint[3] = {rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05)};
    for (int t = 0; t < o.frames_per_video; ++t) {
      std::vector<double> offsets(static_cast<std::size_t>(blocks * blocks));
      for (auto& v : offsets) v = rng.uniform(-1.0, 1.0) * artifact_scale;
      char name[32];
      std::snprintf(name, sizeof name, "frame_%03d.ppm", t);
      rec.frames.push_back(dir / name);
      vision::write_frame(rec.frames.back(), render_frame(o.frame_size, base, gx, gy, tint, 0.3 * t, offsets));
    }

    const double hz = rng.uniform(200.0, 800.0), amplitude = rng.uniform(0.2, 0.6);
    const auto n = static_cast<Eigen::Index>(std::llround(o.audio_seconds * kAudioRate));
    Eigen::MatrixXd samples(n, 1);
    for (Eigen::Index k = 0; k < n; ++k)
      samples(k, 0) = amplitude * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(k) / kAudioRate);
    rec.audio = dir / "audio.wav";
    io::write_file(*rec.audio, audio::encode_wav(samples, kAudioRate));

    // ASR words, then an OCR list keeping a fraction of them and filling up
    // with words the ASR text does not contain.
    std::vector<std::string> pool = vocab;
    rng.shuffle(pool);
    const std::vector<std::string> asr(pool.begin(), pool.begin() + o.words);
    const double keep = rng.uniform(0.75, 1.0) * (rec.label == 1 ? 1.0 - o.gap : 1.0);
    const auto kept = static_cast<std::size_t>(std::lround(keep * o.words));
    std::vector<std::string> ocr(asr.begin(), asr.begin() + static_cast<std::ptrdiff_t>(kept));
    for (std::size_t k = static_cast<std::size_t>(o.words); ocr.size() < static_cast<std::size_t>(o.words); ++k)
      ocr.push_back(pool[k]);
    rng.shuffle(ocr);
    rec.asr_text = out_dir / (rec.id + ".asr.txt");
    rec.ocr_text = out_dir / (rec.id + ".ocr.txt");
    io::write_text(*rec.asr_text, sentence(asr));
    io::write_text(*rec.ocr_text, sentence(ocr));
    records.push_back(std::move(rec));
  }

  const fs::path manifest = out_dir / "manifest.json";
  write_manifest(manifest, records);
  return manifest;
}

}  // namespace deepagent::pipeline
