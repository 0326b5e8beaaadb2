#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>

#include "deepagent/audio/wav.hpp"

namespace deepagent::audio {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kCoefficientCount = 13;
inline constexpr double kEnergyFloor = 1e-10;

struct AudioConfig {
  int sample_rate = 16000;
  int frame_length = 400;  // 25 ms at 16 kHz
  int hop = 160;           // 10 ms
  int mel_filters = 13;
  double f_min = 0.0;
  double f_max = 8000.0;
};

/// Per-frame magnitude spectrum, frames x (frame_length/2 + 1).
struct Spectrogram {
  RowMatrixXd magnitudes;
  int frame_length = 400;
  int hop = 160;

  Eigen::Index frames() const noexcept { return magnitudes.rows(); }
  Eigen::Index bins() const noexcept { return magnitudes.cols(); }
};

/// Triangular filters on the HTK mel scale, one row per filter.
struct MelFilterbank {
  RowMatrixXd weights;
  double f_min = 0.0;
  double f_max = 8000.0;

  Eigen::Index filters() const noexcept { return weights.rows(); }
};

struct AudioEmbedding {
  Eigen::Matrix<double, kCoefficientCount, 1> coeffs = Eigen::Matrix<double, kCoefficientCount, 1>::Zero();
  bool present = false;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Linear-interpolation resampling; output length is round(n * target / source).
Waveform resample(const Waveform& w, int target_rate = 16000);

/// Periodic Hann window.
Eigen::VectorXd hann_window(int length);

/// Magnitude STFT without padding: floor((n - frame_length) / hop) + 1 frames.
Spectrogram stft(const Waveform& w, int frame_length = 400, int hop = 160);

MelFilterbank mel_filterbank(int filters, int frame_length, int sample_rate, double f_min, double f_max);

/// E(tau, m) = sum_f H_m(f) |S(f, tau)|^2, frames x filters.
RowMatrixXd mel_energies(const Spectrogram& spec, const MelFilterbank& fb);

/// M(tau, c) = sum_m log(max(E_m, 1e-10)) cos(pi c (m - 0.5) / M) for c = 0..n_coeffs-1.
RowMatrixXd mfcc(const RowMatrixXd& energies, int n_coeffs = kCoefficientCount);

/// Column means of a frames x coefficients matrix.
Eigen::VectorXd temporal_mean(const RowMatrixXd& coeffs);

/// Temporal mean of the MFCC matrix. Missing or too-short audio yields zeros
/// with present = false.
AudioEmbedding embed_audio(const Waveform& w, const AudioConfig& config = {});
AudioEmbedding embed_audio_file(const std::optional<std::filesystem::path>& path, const AudioConfig& config = {});

}  // namespace deepagent::audio
