#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "cloudlayer/grid.hpp"
#include "cloudlayer/imaging.hpp"

namespace cloudlayer::synth {

struct LayerSpec {
  double base_temp = 280.0;  // Kelvin at the cloud edge
  std::size_t blobs = 8;
  double blob_scale = 5.0;   // Gaussian bump standard deviation, pixels
  double u = 1.0;            // pixels/frame along columns
  double v = 0.0;            // pixels/frame along rows
  double texture = 0.0;      // Kelvin added per unit of density above the threshold
};

/// Layer 0 is the low (warm) layer and hides layer 1 where both are present.
struct SynthSpec {
  std::size_t rows = 60;
  std::size_t cols = 80;
  std::size_t frames = 31;
  std::vector<LayerSpec> layers{LayerSpec{}};
  /// Standard deviation of each layer's temperature texture: a smooth random
  /// field frozen to the layer and advected with it.
  double noise_sigma = 0.5;
  double noise_scale = 1.5;  // correlation length of that field, pixels
  double threshold = 0.5;  // density above which a pixel is cloud
  double sky_temp = 250.0;
  std::optional<std::size_t> change_point;  // second layer appears at this frame
  std::uint64_t seed = 0;
  int max_speed = 8;  // flow-recoverable bound on |u|, |v|

  /// Throws InputError on 0 or more than 2 layers, velocities beyond
  /// max_speed, layer bases closer than 4 noise sigmas, or empty shapes.
  void validate() const;
};

/// Defaults for one layer, or two layers with opposing velocities and bases
/// 4 noise sigmas apart.
SynthSpec default_spec(std::size_t layers, std::uint64_t seed = 0);

struct SynthSequence {
  imaging::Sequence frames;
  std::vector<int> layer_count;  // true L per frame
  std::vector<MaskGrid> labels;  // 0 sky, 1 low layer, 2 high layer
};

SynthSequence generate(const SynthSpec& spec);

/// Writes the sequence (frames, masks, manifest), labels_{t:04}.csv and
/// truth.json {"frames": [{"t", "layers", "labels"}]}. Returns the manifest path.
std::filesystem::path write(const std::filesystem::path& dir, const SynthSequence& seq);

struct TruthFrame {
  std::size_t t = 0;
  int layers = 1;
};

std::vector<TruthFrame> read_truth(const std::filesystem::path& path);

}  // namespace cloudlayer::synth
