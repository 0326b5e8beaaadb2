#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <string>
#include <vector>

#include "deepagent/binary_io.hpp"
#include "deepagent/rng.hpp"

namespace deepagent::vision {

/// Interleaved row-major image (HWC). Raw frames hold [0, 255]; normalized
/// frames hold [0, 1].
struct Frame {
  int width = 0;
  int height = 0;
  int channels = 1;
  Eigen::ArrayXd pixels;

  Frame() = default;
  Frame(int w, int h, int c, double fill = 0.0) : width(w), height(h), channels(c), pixels(Eigen::ArrayXd::Constant(static_cast<Eigen::Index>(w) * h * c, fill)) {}

  double& at(int x, int y, int c) { return pixels[(static_cast<Eigen::Index>(y) * width + x) * channels + c]; }
  double at(int x, int y, int c) const { return pixels[(static_cast<Eigen::Index>(y) * width + x) * channels + c]; }

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.width == b.width && a.height == b.height && a.channels == b.channels &&
           (a.pixels == b.pixels).all();
  }
};

/// Binary PGM (P5) or PPM (P6), 8-bit with maxval 255.
Frame parse_pnm(const io::Bytes& bytes, const std::string& source = "<memory>");
Frame load_frame(const std::filesystem::path& path);
io::Bytes encode_pnm(const Frame& raw);
void write_frame(const std::filesystem::path& path, const Frame& raw);

/// 0.299 R + 0.587 G + 0.114 B; single-channel frames pass through.
Frame grayscale(const Frame& f);

/// Bilinear resize, half-pixel centers (align_corners = false), edge clamped.
Frame resize_bilinear(const Frame& f, int width, int height);

/// Divides raw [0, 255] intensities by 255.
Frame normalize(const Frame& f);

/// {0, interval, 2*interval, ...} below n_frames.
std::vector<int> sample_interval(int n_frames, int interval = 5);

/// Up to m indices spread evenly over [0, n_frames - 1].
std::vector<int> sample_even(int n_frames, int m);

struct AugmentPolicy {
  double rotation_deg = 10.0;
  double shift_frac = 0.1;
  double zoom_frac = 0.1;
  double brightness_min = 0.9;
  double brightness_max = 1.1;
  bool horizontal_flip = true;

  static AugmentPolicy identity() { return {0.0, 0.0, 0.0, 1.0, 1.0, false}; }
  void validate() const;
};

/// Rotation, shift, zoom, brightness, flip, in that order, on a normalized frame.
Frame augment(const Frame& f, const AugmentPolicy& policy, Rng& rng);

}  // namespace deepagent::vision
