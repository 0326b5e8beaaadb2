#include "deepagent/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace deepagent::audio {

namespace {

struct Format {
  std::uint16_t audio_format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

std::string at(const io::ByteReader& r, std::size_t offset) {
  return r.source() + " (byte offset " + std::to_string(offset) + ")";
}

}  // namespace

Waveform parse_wav(const io::Bytes& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  r.expect_magic("RIFF");
  r.u32();
  r.expect_magic("WAVE");

  Format fmt;
  bool have_fmt = false;
  while (r.position() + 8 <= bytes.size()) {
    const std::size_t chunk_start = r.position();
    std::string id(4, '\0');
    r.raw(id.data(), 4);
    const std::uint32_t size = r.u32();
    const std::size_t body = r.position();
    if (body + size > bytes.size())
      throw IngestionError("truncated \"" + id + "\" chunk in " + at(r, chunk_start) + ": declares " +
                           std::to_string(size) + " bytes, " + std::to_string(bytes.size() - body) + " available");
    if (id == "fmt ") {
      if (size < 16) throw IngestionError("short fmt chunk in " + at(r, chunk_start));
      fmt.audio_format = r.u16();
      fmt.channels = r.u16();
      fmt.sample_rate = r.u32();
      r.u32();  // byte rate
      r.u16();  // block align
      fmt.bits = r.u16();
      if (fmt.audio_format != 1)
        throw IngestionError("unsupported WAVE format code " + std::to_string(fmt.audio_format) +
                             " (only PCM) in " + at(r, body));
      if (fmt.bits != 16)
        throw IngestionError("unsupported bit depth " + std::to_string(fmt.bits) + " (only 16) in " + at(r, body + 14));
      if (fmt.channels != 1 && fmt.channels != 2)
        throw IngestionError("unsupported channel count " + std::to_string(fmt.channels) + " in " + at(r, body + 2));
      if (fmt.sample_rate == 0) throw IngestionError("zero sample rate in " + at(r, body + 4));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IngestionError("data chunk before fmt chunk in " + at(r, chunk_start));
      const std::size_t frame_bytes = 2u * fmt.channels;
      if (size % frame_bytes != 0)
        throw IngestionError("data chunk size " + std::to_string(size) + " is not a whole number of frames in " +
                             at(r, chunk_start));
      const Eigen::Index frames = static_cast<Eigen::Index>(size / frame_bytes);
      Waveform w;
      w.sample_rate = static_cast<int>(fmt.sample_rate);
      w.samples.resize(frames);
      for (Eigen::Index i = 0; i < frames; ++i) {
        double sum = 0.0;
        for (int c = 0; c < fmt.channels; ++c) sum += static_cast<std::int16_t>(r.u16()) / 32768.0;
        w.samples[i] = std::clamp(sum / fmt.channels, -1.0, 1.0);
      }
      return w;
    }
    r.seek(body + size + (size & 1u));
  }
  throw IngestionError("no data chunk in " + at(r, r.position()));
}

Waveform read_wav(const std::filesystem::path& path) { return parse_wav(io::read_file(path), path.string()); }

io::Bytes encode_wav(const Eigen::MatrixXd& samples, int sample_rate) {
  const auto channels = static_cast<std::uint16_t>(samples.cols());
  const auto data_bytes = static_cast<std::uint32_t>(samples.rows() * channels * 2);
  io::ByteWriter w;
  w.magic("RIFF");
  w.u32(36 + data_bytes);
  w.magic("WAVE");
  w.magic("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(channels);
  w.u32(static_cast<std::uint32_t>(sample_rate));
  w.u32(static_cast<std::uint32_t>(sample_rate) * channels * 2);
  w.u16(static_cast<std::uint16_t>(channels * 2));
  w.u16(16);
  w.magic("data");
  w.u32(data_bytes);
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    for (Eigen::Index c = 0; c < samples.cols(); ++c) {
      const double v = std::clamp(samples(i, c), -1.0, 1.0);
      w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(v * 32767.0))));
    }
  return std::move(w.bytes());
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  io::write_file(path, encode_wav(w.samples, w.sample_rate));
}

}  // namespace deepagent::audio
