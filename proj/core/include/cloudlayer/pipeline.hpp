#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cloudlayer/flow.hpp"
#include "cloudlayer/hmm.hpp"
#include "cloudlayer/imaging.hpp"
#include "cloudlayer/model_zoo.hpp"
#include "cloudlayer/selection.hpp"

namespace cloudlayer::pipeline {

struct PipelineConfig {
  std::string model = "beta_T+vm_phi";
  double alpha0 = 1.0;   // Dirichlet α of factors that use temperature
  double alpha1 = 10.0;  // Dirichlet α of velocity-only factors
  double beta = 650.0;
  int initial_layers = 1;
  flow::WlkConfig wlk{};
  std::size_t restarts = 3;
  double min_shape = 1.0;  // Gamma/Beta shape floor in the M-step (unimodal clusters)
  std::uint64_t seed = 0;
  bool keep_fields = false;  // fill DetectionRecord::fields

  void validate() const;
};

struct FactorSummary {
  std::string name;
  std::string family;
  std::vector<double> weights;
  std::vector<std::vector<double>> params;  // to_vector per cluster
  std::vector<double> mean_temperature;     // γ-weighted Kelvin per cluster
  double q = 0;
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t restart_id = 0;
  std::size_t degenerate_restarts = 0;
  std::size_t flagged_rows = 0;
};

struct LayerFlowSummary {
  double mean_u = 0, mean_v = 0, median_u = 0, median_v = 0;
};

struct HypothesisResult {
  int l = 1;
  hmm::HypothesisScore score{};
  selection::MetricReport metrics{};
  std::vector<FactorSummary> factors;
  std::vector<LayerFlowSummary> layers;  // per-layer fields, then the merged one last
  std::size_t singular_pixels = 0;
  std::string error;  // non-empty when a fit failed
};

/// Dense outputs of one frame for optional dumps.
struct FrameFields {
  std::vector<std::size_t> pixels;  // masked flat indices
  std::size_t cols = 0;
  std::array<flow::FlowField, 2> merged;  // per hypothesis
  std::vector<double> posterior;          // n × 2 temperature responsibilities (L = 2)
};

struct DetectionRecord {
  std::size_t t = 0;
  int chosen = 1;
  std::size_t masked_pixels = 0;
  std::array<HypothesisResult, 2> hypotheses;
  std::vector<std::string> flags;
  std::string error;  // set when the whole frame failed; chosen keeps the previous state
  std::optional<FrameFields> fields;
};

/// Features of `cur`, both hypotheses fitted and scored, HMM advanced.
/// Throws InputError when the frames differ in shape or the mask of `cur` has
/// fewer than W² pixels.
DetectionRecord process_frame(const imaging::MaskedFrame& prev, const imaging::MaskedFrame& cur,
                              hmm::HmmState& state, const PipelineConfig& cfg);

/// Records for frames 1..T-1. A frame that throws is recorded with the error
/// flagged and the previous state kept.
std::vector<DetectionRecord> process_sequence(const imaging::Sequence& seq,
                                              const PipelineConfig& cfg);

/// Re-runs only the HMM over recorded posterior sums with another β.
std::vector<int> replay(const std::vector<DetectionRecord>& records, double beta, int l0 = 1);

}  // namespace cloudlayer::pipeline
