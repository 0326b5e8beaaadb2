#include "deepagent/audio/mfcc.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "deepagent/errors.hpp"

namespace deepagent::audio {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Waveform resample(const Waveform& w, int target_rate) {
  if (w.sample_rate < 8000)
    throw ConfigError("resample: source rate " + std::to_string(w.sample_rate) + " Hz is below 8000 Hz");
  if (w.sample_rate == target_rate || w.empty()) return Waveform{w.samples, target_rate};
  const double ratio = static_cast<double>(w.sample_rate) / target_rate;
  const auto n = static_cast<Eigen::Index>(std::llround(static_cast<double>(w.size()) * target_rate / w.sample_rate));
  Waveform out{Eigen::VectorXd(n), target_rate};
  const Eigen::Index last = w.size() - 1;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * ratio;
    const auto i0 = static_cast<Eigen::Index>(pos);
    if (i0 >= last) {
      out.samples[i] = w.samples[last];
      continue;
    }
    const double frac = pos - static_cast<double>(i0);
    out.samples[i] = w.samples[i0] + frac * (w.samples[i0 + 1] - w.samples[i0]);
  }
  return out;
}

Eigen::VectorXd hann_window(int length) {
  Eigen::VectorXd win(length);
  for (int n = 0; n < length; ++n) win[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / length);
  return win;
}

Spectrogram stft(const Waveform& w, int frame_length, int hop) {
  if (frame_length < 2 || hop < 1) throw ConfigError("stft: frame length must be >= 2 and hop >= 1");
  if (w.size() < frame_length)
    throw FeatureExtractionError("stft: signal of " + std::to_string(w.size()) + " samples is shorter than one " +
                                 std::to_string(frame_length) + "-sample frame");
  const Eigen::Index frames = (w.size() - frame_length) / hop + 1;
  const Eigen::Index bins = frame_length / 2 + 1;
  const Eigen::VectorXd window = hann_window(frame_length);

  Spectrogram spec{RowMatrixXd(frames, bins), frame_length, hop};
  Eigen::FFT<double> fft;
  std::vector<double> segment(static_cast<std::size_t>(frame_length));
  std::vector<std::complex<double>> spectrum;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (int n = 0; n < frame_length; ++n) segment[static_cast<std::size_t>(n)] = w.samples[t * hop + n] * window[n];
    fft.fwd(spectrum, segment);
    for (Eigen::Index k = 0; k < bins; ++k) spec.magnitudes(t, k) = std::abs(spectrum[static_cast<std::size_t>(k)]);
  }
  return spec;
}

MelFilterbank mel_filterbank(int filters, int frame_length, int sample_rate, double f_min, double f_max) {
  if (filters < 1) throw ConfigError("mel filterbank needs at least one filter");
  if (!(f_max > f_min) || f_min < 0.0) throw ConfigError("mel filterbank needs 0 <= f_min < f_max");
  const Eigen::Index bins = frame_length / 2 + 1;
  const double mel_lo = hz_to_mel(f_min), mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(static_cast<std::size_t>(filters) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (filters + 1));

  MelFilterbank fb{RowMatrixXd::Zero(filters, bins), f_min, f_max};
  for (int m = 0; m < filters; ++m) {
    const double lower = edges[m], center = edges[m + 1], upper = edges[m + 2];
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / frame_length;
      const double rising = (f - lower) / (center - lower);
      const double falling = (upper - f) / (upper - center);
      fb.weights(m, k) = std::max(0.0, std::min(rising, falling));
    }
  }
  return fb;
}

RowMatrixXd mel_energies(const Spectrogram& spec, const MelFilterbank& fb) {
  if (spec.bins() != fb.weights.cols())
    throw ConfigError("mel filterbank has " + std::to_string(fb.weights.cols()) + " bins, spectrogram has " +
                      std::to_string(spec.bins()));
  return spec.magnitudes.array().square().matrix() * fb.weights.transpose();
}

RowMatrixXd mfcc(const RowMatrixXd& energies, int n_coeffs) {
  const Eigen::Index filters = energies.cols();
  RowMatrixXd basis(filters, n_coeffs);
  for (Eigen::Index m = 0; m < filters; ++m)
    for (int c = 0; c < n_coeffs; ++c)
      basis(m, c) = std::cos(std::numbers::pi * c * (static_cast<double>(m) + 0.5) / static_cast<double>(filters));
  // std::log per element; Eigen's packet log differs from the scalar tail path.
  const RowMatrixXd logs = energies.unaryExpr([](double e) { return std::log(std::max(e, kEnergyFloor)); });
  RowMatrixXd out = RowMatrixXd::Zero(energies.rows(), n_coeffs);
  // Plain loops: vectorized products depend on row alignment, and identical
  // frames must produce bit-identical coefficients.
  for (Eigen::Index t = 0; t < logs.rows(); ++t)
    for (Eigen::Index m = 0; m < filters; ++m)
      for (int c = 0; c < n_coeffs; ++c) out(t, c) += logs(t, m) * basis(m, c);
  return out;
}

Eigen::VectorXd temporal_mean(const RowMatrixXd& coeffs) { return coeffs.colwise().mean().transpose(); }

AudioEmbedding embed_audio(const Waveform& w, const AudioConfig& config) {
  AudioEmbedding out;
  if (w.empty() || w.sample_rate < 8000) return out;
  try {
    const Waveform resampled = resample(w, config.sample_rate);
    const Spectrogram spec = stft(resampled, config.frame_length, config.hop);
    const MelFilterbank fb =
        mel_filterbank(config.mel_filters, config.frame_length, config.sample_rate, config.f_min, config.f_max);
    const RowMatrixXd coeffs = mfcc(mel_energies(spec, fb), kCoefficientCount);
    const Eigen::VectorXd mean = temporal_mean(coeffs);
    if (!mean.allFinite()) return out;
    out.coeffs = mean;
    out.present = true;
  } catch (const FeatureExtractionError&) {
    return AudioEmbedding{};
  }
  return out;
}

AudioEmbedding embed_audio_file(const std::optional<std::filesystem::path>& path, const AudioConfig& config) {
  if (!path) return AudioEmbedding{};
  return embed_audio(read_wav(*path), config);
}

}  // namespace deepagent::audio
