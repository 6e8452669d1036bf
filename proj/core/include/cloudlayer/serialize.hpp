#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "cloudlayer/mixtures.hpp"
#include "cloudlayer/pipeline.hpp"

namespace cloudlayer::serialize {

/// One-line JSON object (no trailing newline). Non-finite numbers become null.
std::string record_json(const pipeline::DetectionRecord& rec);

/// Family tags, parameters, π, Q trace and convergence of a fit.
std::string fit_json(const mixtures::MixtureFit& fit);

/// i,j,u,v per masked pixel of the merged field of hypothesis h (0 or 1).
void write_flow_csv(const std::filesystem::path& path, const pipeline::FrameFields& fields,
                    std::size_t h);

/// i,j,gamma1,gamma2 per masked pixel from the two-layer temperature fit.
void write_posterior_csv(const std::filesystem::path& path, const pipeline::FrameFields& fields);

struct Decision {
  std::size_t t = 0;
  int chosen = 1;
};

/// Reads t and chosen from every line of a JSON-lines detection stream.
std::vector<Decision> read_decisions(const std::filesystem::path& path);

}  // namespace cloudlayer::serialize
