#pragma once

#include <vector>

#include "deskflow/config.hpp"
#include "deskflow/flow.hpp"
#include "deskflow/image.hpp"

namespace deskflow {

/// Coarse-to-fine variational refinement with a brightness + gradient
/// constancy data term, Charbonnier penalties and boundary-modulated
/// smoothness alpha(x) = alpha_base * exp(-lambda * b(x)^kappa).
struct VarParams {
  int coarse_iters = 20;  // warps summed over the levels below full resolution
  int fullres_iters = 5;
  double alpha_base = 0.02;
  double lambda = 5.0;
  double kappa = 0.5;
  /// Size ratio between consecutive coarse levels, starting at 1/4.
  double pyramid_factor = 0.5;
  int solver_iters = 30;  // SOR sweeps per warp
  int fixed_point = 3;    // robust-weight updates per warp (sweeps are split evenly)
  double gamma = 1.0;     // gradient constancy weight
  double epsilon = 1e-3;
  double omega = 1.9;
  /// Backtracking halvings tried when a warp step would raise the energy.
  int line_search = 8;
  /// Off: alpha = alpha_base everywhere.
  bool modulate = true;

  void validate() const;
  /// Reads `var.*` keys.
  static VarParams from_config(KeyValues& kv);
};

/// Normalized gradient magnitude in [0, 1]: Gaussian blur (sigma 1) of the
/// luminance, Sobel gradients, division by the 99th percentile, clamping.
/// One channel, same size. A constant image gives zeros.
Image detect_boundaries(const Image& image);

struct LevelTrace {
  int width = 0;
  int height = 0;
  /// Energy at the level's starting flow, then after every warp.
  std::vector<double> energies;
};

/// Required size of the initial flow: ceil(w / 4) x ceil(h / 4).
int quarter_extent(int extent);

/// flow_init is at quarter resolution; the result is full resolution and
/// all valid.
FlowField refine(const FlowField& flow_init, const Image& img1, const Image& img2, const VarParams& params,
                 std::vector<LevelTrace>* trace = nullptr);

/// Full-resolution flow reduced to the quarter grid refine() expects
/// (bilinear, vectors scaled by the size ratio).
FlowField to_quarter(const FlowField& flow);

}  // namespace deskflow
