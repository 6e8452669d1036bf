#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cloudlayer/mixtures.hpp"

namespace cloudlayer::pipeline {

/// One independently fitted factor of a model, e.g. "beta_T" or "gauss_T_uv".
struct Factor {
  std::string name;
  mixtures::Component component;

  bool temperature_only() const;
  bool uses_temperature() const;
};

/// A model id is a '+'-separated list of factor names.
struct ModelSpec {
  std::string id;
  std::vector<Factor> factors;
};

/// Throws InputError listing the valid names when `name` is unknown.
Factor find_factor(std::string_view name);

/// Ids accepted by find_model, in a stable order.
const std::vector<std::string>& model_ids();

/// Throws InputError listing the valid ids when `id` is unknown.
ModelSpec find_model(std::string_view id);

}  // namespace cloudlayer::pipeline
