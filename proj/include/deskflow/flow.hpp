#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deskflow/image.hpp"

namespace deskflow {

/// Dense per-pixel displacement (u rightward, v downward, in pixels) with a
/// validity mask. Storage is row-major and double precision so ground truth
/// from the generator keeps its exact affine values.
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<double> u;
  std::vector<double> v;
  std::vector<std::uint8_t> valid;

  FlowField() = default;
  FlowField(int w, int h, double fill_u = 0.0, double fill_v = 0.0);

  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool same_size(const FlowField& other) const { return width == other.width && height == other.height; }
  /// Number of entries with valid != 0.
  std::size_t valid_count() const;
  /// Throws ShapeError if the buffers disagree with width*height.
  void check_well_formed() const;

  FlowField crop(int x0, int y0, int w, int h) const;
};

/// Magnitudes above this are the Middlebury "unknown flow" marker.
inline constexpr double kUnknownFlowThreshold = 1e9;
inline constexpr float kUnknownFlowValue = 1e10f;

// Middlebury .flo container: "PIEH", int32 width, int32 height, then
// interleaved float32 (u, v) row-major, all little-endian.
FlowField read_flo(std::istream& in);
FlowField read_flo_file(const std::string& path);
void write_flo(std::ostream& out, const FlowField& flow);
void write_flo_file(const std::string& path, const FlowField& flow);
std::string flo_bytes(const FlowField& flow);

struct MetricsReport {
  double epe = 0.0;
  double aae = 0.0;  // degrees
  std::optional<double> epe_s40plus;
  std::size_t n_evaluated = 0;
};

/// Angle in degrees between (u1, v1, 1) and (u2, v2, 1). The only place the
/// angular-error convention lives.
double angular_error_deg(double u1, double v1, double u2, double v2);

/// EPE / AAE / s40+ averaged over ground-truth-valid pixels.
MetricsReport compute_metrics(const FlowField& pred, const FlowField& gt);

/// Running sums for aggregating metrics over many pixels or samples.
struct MetricsAccumulator {
  double epe_sum = 0.0;
  double aae_sum = 0.0;
  double s40_sum = 0.0;
  std::size_t count = 0;
  std::size_t s40_count = 0;

  void add(const FlowField& pred, const FlowField& gt);
  MetricsReport report() const;
};

/// Middlebury color coding: hue = direction, saturation = magnitude, white =
/// no motion, black = invalid. max_magnitude <= 0 selects the per-image
/// maximum valid magnitude.
Image flow_to_color(const FlowField& flow, double max_magnitude = 0.0);

/// The 55-entry Middlebury color wheel as 0..255 RGB triples.
const std::vector<std::array<int, 3>>& color_wheel();

}  // namespace deskflow
