#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>

#include "deepagent/binary_io.hpp"

namespace deepagent::audio {

/// Mono waveform with samples in [-1, 1].
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 16000;

  Eigen::Index size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.size() == 0; }
};

/// Parses RIFF/WAVE PCM-16 (mono or stereo). Stereo is averaged to mono and
/// integers are scaled by 1/32768.
Waveform parse_wav(const io::Bytes& bytes, const std::string& source = "<memory>");
Waveform read_wav(const std::filesystem::path& path);

/// Encodes 16-bit PCM; `channels` interleaved rows are taken from `samples`
/// as a frames x channels matrix.
io::Bytes encode_wav(const Eigen::MatrixXd& samples, int sample_rate);
void write_wav(const std::filesystem::path& path, const Waveform& w);

}  // namespace deepagent::audio
