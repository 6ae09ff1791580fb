#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace deskflow {

/// Planar float image, channel-major (c, y, x). Intensities are nominally in
/// [0, 1]; nothing clamps them except the PNG writer.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, int c, float fill = 0.0f);

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  float& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  bool same_size(const Image& other) const { return width == other.width && height == other.height; }

  /// Bilinear sample with edge clamping; (x, y) in pixel-center coordinates.
  float sample_bilinear(int c, double x, double y) const;
  /// Bilinear sample with periodic wraparound.
  float sample_bilinear_wrap(int c, double x, double y) const;

  /// Luminance (Rec. 601 weights) of an RGB image; a 1-channel image is copied.
  Image to_gray() const;
  Image crop(int x0, int y0, int w, int h) const;
};

/// Writes an 8-bit PNG (1, 3 or 4 channels); values are clamped to [0,1] and rounded.
void write_png(const std::filesystem::path& path, const Image& image);
/// Writes 8-bit interleaved bytes directly (already quantized).
void write_png_bytes(const std::filesystem::path& path, int width, int height, int channels,
                     const std::vector<unsigned char>& bytes);
/// Reads any 8/16-bit PNG; palette and gray are expanded, alpha kept when present.
Image read_png(const std::filesystem::path& path);

}  // namespace deskflow
