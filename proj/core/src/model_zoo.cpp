#include "cloudlayer/model_zoo.hpp"

#include <algorithm>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::pipeline {
namespace {

using mixtures::Family;
using mixtures::Feature;

const std::vector<Factor>& factor_table() {
  static const std::vector<Factor> table = {
      {"beta_T", {{Feature::BetaT}, Family::Beta}},
      {"gamma_T", {{Feature::GammaT}, Family::Gamma}},
      {"gauss_T", {{Feature::Kelvin}, Family::Gaussian}},
      {"vm_phi", {{Feature::Phi}, Family::VonMises}},
      {"gamma_r", {{Feature::R}, Family::Gamma}},
      {"gauss_uv", {{Feature::U, Feature::V}, Family::Gaussian}},
      {"gauss_T_uv", {{Feature::Kelvin, Feature::U, Feature::V}, Family::Gaussian}},
      {"bga_T_r", {{Feature::GammaT, Feature::R}, Family::BivariateGamma}},
  };
  return table;
}

}  // namespace

bool Factor::temperature_only() const {
  return std::all_of(component.features.begin(), component.features.end(), mixtures::is_temperature);
}

bool Factor::uses_temperature() const {
  return std::any_of(component.features.begin(), component.features.end(), mixtures::is_temperature);
}

Factor find_factor(std::string_view name) {
  const auto& table = factor_table();
  const auto it =
      std::find_if(table.begin(), table.end(), [&](const Factor& f) { return f.name == name; });
  if (it == table.end()) {
    std::string msg = "unknown factor '" + std::string(name) + "'; valid factors:";
    for (const auto& f : table) msg += " " + f.name;
    throw InputError(msg);
  }
  return *it;
}

const std::vector<std::string>& model_ids() {
  static const std::vector<std::string> ids = {
      "beta_T+vm_phi",   "beta_T+gauss_uv",  "beta_T+gamma_r",  "beta_T+vm_phi+gamma_r",
      "gamma_T+vm_phi",  "gamma_T+gauss_uv", "gamma_T+gamma_r", "gamma_T+vm_phi+gamma_r",
      "gauss_T+vm_phi",  "gauss_T+gauss_uv", "gauss_T+gamma_r", "gauss_T+vm_phi+gamma_r",
      "gauss_T_uv",      "bga_T_r",          "bga_T_r+vm_phi",  "vm_phi",
      "gamma_r",         "gauss_uv",         "vm_phi+gamma_r",
  };
  return ids;
}

ModelSpec find_model(std::string_view id) {
  const auto& ids = model_ids();
  if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
    std::string msg = "unknown model '" + std::string(id) + "'; valid models:";
    for (const auto& m : ids) msg += " " + m;
    throw InputError(msg);
  }
  ModelSpec spec;
  spec.id = std::string(id);
  std::size_t start = 0;
  while (start <= id.size()) {
    const std::size_t end = std::min(id.find('+', start), id.size());
    spec.factors.push_back(find_factor(id.substr(start, end - start)));
    start = end + 1;
  }
  return spec;
}

}  // namespace cloudlayer::pipeline
