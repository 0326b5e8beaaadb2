#include "deepagent/vision/frame.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "deepagent/errors.hpp"

namespace deepagent::vision {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const io::Bytes& b, std::size_t& pos, const std::string& source) {
  while (pos < b.size()) {
    if (b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
    } else if (std::isspace(b[pos])) {
      ++pos;
    } else {
      break;
    }
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') tok.push_back(static_cast<char>(b[pos++]));
  if (tok.empty()) throw IngestionError(source + ": truncated PNM header");
  return tok;
}

int header_int(const io::Bytes& b, std::size_t& pos, const std::string& source, const char* what) {
  const std::string tok = header_token(b, pos, source);
  if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
      tok.size() > 9)
    throw IngestionError(source + ": malformed " + what + " \"" + tok + "\" in PNM header");
  return std::stoi(tok);
}

}  // namespace

Frame parse_pnm(const io::Bytes& bytes, const std::string& source) {
  std::size_t pos = 0;
  const std::string magic = header_token(bytes, pos, source);
  int channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IngestionError(source + ": unsupported image magic \"" + magic + "\" (expected P5 or P6)");
  }
  const int width = header_int(bytes, pos, source, "width");
  const int height = header_int(bytes, pos, source, "height");
  const int maxval = header_int(bytes, pos, source, "maxval");
  if (width < 1 || height < 1) throw IngestionError(source + ": image dimensions must be positive");
  if (maxval != 255) throw IngestionError(source + ": maxval " + std::to_string(maxval) + " is not 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IngestionError(source + ": truncated PNM header");
  ++pos;
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < count)
    throw IngestionError(source + ": pixel data truncated (" + std::to_string(bytes.size() - pos) + " of " +
                         std::to_string(count) + " bytes)");
  Frame f(width, height, channels);
  for (std::size_t i = 0; i < count; ++i) f.pixels[static_cast<Eigen::Index>(i)] = bytes[pos + i];
  return f;
}

Frame load_frame(const std::filesystem::path& path) { return parse_pnm(io::read_file(path), path.string()); }

io::Bytes encode_pnm(const Frame& raw) {
  const std::string header = std::string(raw.channels == 1 ? "P5" : "P6") + "\n" + std::to_string(raw.width) + " " +
                             std::to_string(raw.height) + "\n255\n";
  io::Bytes out(header.begin(), header.end());
  out.reserve(out.size() + static_cast<std::size_t>(raw.pixels.size()));
  for (Eigen::Index i = 0; i < raw.pixels.size(); ++i)
    out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(raw.pixels[i], 0.0, 255.0))));
  return out;
}

void write_frame(const std::filesystem::path& path, const Frame& raw) {
  if (raw.channels != 1 && raw.channels != 3) throw ConfigError("only 1- or 3-channel frames can be written");
  io::write_file(path, encode_pnm(raw));
}

Frame grayscale(const Frame& f) {
  if (f.channels == 1) return f;
  if (f.channels != 3) throw ConfigError("grayscale expects 3 channels, got " + std::to_string(f.channels));
  Frame g(f.width, f.height, 1);
  for (Eigen::Index p = 0; p < g.pixels.size(); ++p)
    g.pixels[p] = 0.299 * f.pixels[3 * p] + 0.587 * f.pixels[3 * p + 1] + 0.114 * f.pixels[3 * p + 2];
  return g;
}

Frame resize_bilinear(const Frame& f, int width, int height) {
  if (width < 1 || height < 1) throw ConfigError("resize target must be at least 1x1");
  if (f.width == width && f.height == height) return f;
  Frame out(width, height, f.channels);
  const double sx = static_cast<double>(f.width) / width, sy = static_cast<double>(f.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(f.height - 1));
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, f.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(f.width - 1));
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, f.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < f.channels; ++c) {
        const double top = f.at(x0, y0, c) * (1.0 - wx) + f.at(x1, y0, c) * wx;
        const double bottom = f.at(x0, y1, c) * (1.0 - wx) + f.at(x1, y1, c) * wx;
        out.at(x, y, c) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

Frame normalize(const Frame& f) {
  Frame out = f;
  out.pixels /= 255.0;
  return out;
}

std::vector<int> sample_interval(int n_frames, int interval) {
  if (interval < 1) throw ConfigError("frame interval must be >= 1");
  std::vector<int> idx;
  for (int i = 0; i < n_frames; i += interval) idx.push_back(i);
  return idx;
}

std::vector<int> sample_even(int n_frames, int m) {
  if (m < 1) throw ConfigError("frame budget m must be >= 1");
  std::vector<int> idx;
  if (n_frames <= m) {
    for (int i = 0; i < n_frames; ++i) idx.push_back(i);
    return idx;
  }
  if (m == 1) return {0};
  for (int i = 0; i < m; ++i)
    idx.push_back(static_cast<int>(std::lround(static_cast<double>(i) * (n_frames - 1) / (m - 1))));
  std::sort(idx.begin(), idx.end());
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace deepagent::vision
