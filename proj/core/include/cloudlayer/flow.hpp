#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "cloudlayer/grid.hpp"
#include "cloudlayer/imaging.hpp"

namespace cloudlayer::flow {

/// Finite-difference derivatives of an intensity pair.
///
/// Each value at (i, j) is the 2x2 correlation of the kernel with the block
/// {(i,j), (i,j+1), (i+1,j), (i+1,j+1)}; the last row/column is replicated.
///   Kx = [[-1, 1], [-1, 1]]   Ky = [[-1, -1], [1, 1]]   Kt = sigma * [[1, 1], [1, 1]]
///   Ix = prev * Kx,  Iy = prev * Ky,  It = prev * Kt + next * (-Kt)
struct DerivativeStack {
  RealGrid ix;
  RealGrid iy;
  RealGrid it;
  double sigma = 1.0;

  std::size_t rows() const noexcept { return ix.rows(); }
  std::size_t cols() const noexcept { return ix.cols(); }
};

/// Dense velocity field in pixels/frame; u along columns (j), v along rows (i).
struct FlowField {
  RealGrid u;
  RealGrid v;

  RealGrid magnitude() const;
  /// atan2(u, v), in [-π, π].
  RealGrid angle() const;
};

struct WlkConfig {
  int half_window = 8;  // w; the window is W = 2w + 1 = 17 pixels wide
  double tau = 1e-8;    // ridge on the 2x2 normal matrix
  double sigma = 1.0;   // temporal kernel amplitude

  int full_window() const noexcept { return 2 * half_window + 1; }
};

/// The WLS target at each pixel is y = kTargetGain * It. The temporal kernel
/// sums four frame differences of I(t-1) - I(t) while the spatial kernels sum
/// two forward differences, so with sigma = 1 this gain returns velocities in
/// pixels/frame along +j (u) and +i (v).
inline constexpr double kTargetGain = 0.5;

DerivativeStack derivatives(const RealGrid& prev, const RealGrid& next, double sigma);

struct WlkResult {
  std::vector<FlowField> layers;
  std::size_t singular_pixels = 0;
};

/// Posterior-weighted Lucas-Kanade. For every pixel and every layer l solves
///   v = (X Γ Xᵀ + τ I)⁻¹ X Γ y
/// over the (2w+1)² window (clipped at the image border), with Γ read from
/// weights[l] at each neighbor. A window with zero total weight yields (0, 0);
/// so does a singular system (counted in singular_pixels).
WlkResult wlk_solve(const DerivativeStack& deriv, std::span<const RealGrid> weights,
                    const WlkConfig& cfg);

/// U = Σ Γ⁽ˡ⁾ ⊙ U⁽ˡ⁾, V likewise. Each pixel's weights must sum to 1 (±1e-9) or
/// to exactly 0 (non-cloud pixel, zero output).
FlowField merge_layers(std::span<const FlowField> fields, std::span<const RealGrid> weights);

/// Linear rescale of the cloud temperatures of a frame pair to [0, 255] using
/// the joint min/max over both masks. Non-cloud pixels are 0.
std::pair<RealGrid, RealGrid> intensity_pair(const imaging::MaskedFrame& prev,
                                             const imaging::MaskedFrame& next);

/// Indicator grid of a mask (1 on cloud pixels), the L = 1 weight grid.
RealGrid mask_weights(const imaging::SegmentationMask& mask);

/// 1 where the 2x2 derivative block lies on cloud pixels of both masks, else 0.
/// Multiplied into the WLS sample weights so mask boundaries, where the
/// intensity steps to 0, do not enter the normal equations.
RealGrid stencil_weights(const imaging::SegmentationMask& prev, const imaging::SegmentationMask& next);

/// Minimum of g over each pixel's 2x2 derivative block (replicate padding).
RealGrid block_min(const RealGrid& g);

/// 1 where the (2w+1)² window around a pixel holds at least min_count (and at
/// least one) positive weights.
MaskGrid window_support(const RealGrid& weights, int half_window, std::size_t min_count = 1);

}  // namespace cloudlayer::flow
