#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "cloudlayer/grid.hpp"

namespace cloudlayer::imaging {

inline constexpr double kDefaultEps = 1e-6;

/// One thermal image in Kelvin.
struct Frame {
  std::size_t index = 0;
  RealGrid kelvin;

  std::size_t rows() const noexcept { return kelvin.rows(); }
  std::size_t cols() const noexcept { return kelvin.cols(); }
};

/// Cloud pixels of a frame (non-zero = cloud). Only these pixels are ever modeled.
struct SegmentationMask {
  MaskGrid cloud;

  std::size_t count() const;
  bool at(std::size_t i, std::size_t j) const { return cloud(i, j) != 0; }
};

struct MaskedFrame {
  Frame frame;
  SegmentationMask mask;
};

using Sequence = std::vector<MaskedFrame>;

/// Row-major flat indices of the cloud pixels. Every per-sample vector in
/// the library follows this order.
std::vector<std::size_t> masked_indices(const SegmentationMask& mask);

/// Temperatures of the masked pixels, mapped affinely onto [eps, 1 - eps]
/// using the min/max over the mask.
std::vector<double> normalize_beta(const Frame& frame, const SegmentationMask& mask,
                                   double eps = kDefaultEps);

/// Temperatures of the masked pixels shifted so the coldest one sits at eps.
std::vector<double> normalize_gamma(const Frame& frame, const SegmentationMask& mask,
                                    double eps = kDefaultEps);

/// Per-pixel features over the masked pixels of one frame. Velocity columns are
/// empty until attach_velocity is called.
struct FeatureTable {
  std::vector<std::size_t> pixel;  // flat index i * cols + j
  std::vector<double> kelvin;      // T
  std::vector<double> beta_t;      // T̄ in (0, 1)
  std::vector<double> gamma_t;     // T̃ > 0
  std::vector<double> u, v;        // pixels / frame
  std::vector<double> r;           // sqrt(u² + v²), floored at eps for Gamma support
  std::vector<double> phi;         // atan2(u, v) in [-π, π]

  std::size_t size() const noexcept { return pixel.size(); }
  bool has_velocity() const noexcept { return u.size() == pixel.size() && !pixel.empty(); }
};

FeatureTable temperature_features(const Frame& frame, const SegmentationMask& mask,
                                  double eps = kDefaultEps);

/// Fill u, v, r, phi from dense velocity grids at the table's pixels.
void attach_velocity(FeatureTable& table, const RealGrid& u, const RealGrid& v,
                     double eps = kDefaultEps);

// --- CSV / manifest I/O -------------------------------------------------------

RealGrid read_real_csv(const std::filesystem::path& path);
MaskGrid read_mask_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal representation, so read(write(g)) == g bit-for-bit.
void write_real_csv(const std::filesystem::path& path, const RealGrid& grid);
void write_mask_csv(const std::filesystem::path& path, const MaskGrid& grid);

/// Reads {height, width, frames: [{t, frame, mask}]}; paths relative to the manifest.
/// Frames come back sorted by t.
Sequence load_sequence(const std::filesystem::path& manifest_path);

/// Writes frame_{t:04}.csv, mask_{t:04}.csv and manifest.json into dir.
/// Returns the manifest path.
std::filesystem::path write_sequence(const std::filesystem::path& dir, const Sequence& seq);

}  // namespace cloudlayer::imaging
