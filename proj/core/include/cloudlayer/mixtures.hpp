#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cloudlayer/families.hpp"
#include "cloudlayer/imaging.hpp"

namespace cloudlayer::mixtures {

/// Columns of a FeatureTable a component can consume.
enum class Feature { Kelvin, BetaT, GammaT, U, V, R, Phi };

std::string_view feature_name(Feature f);
bool is_temperature(Feature f);

/// One factor of the likelihood: a family over one or more feature columns.
/// Gamma, VonMises and Beta take one column, BivariateGamma two (x, y), a
/// Gaussian any number.
struct Component {
  std::vector<Feature> features;
  Family family = Family::Gaussian;
};

/// Clusters share the responsibilities; each cluster multiplies the
/// per-component likelihoods.
struct MixtureSpec {
  std::size_t clusters = 1;
  std::vector<Component> components;
  std::vector<double> dirichlet_alpha;  // one per cluster; empty means all 1

  double alpha(std::size_t l) const;
  /// Throws InputError on L outside {1, 2}, bad feature arity or alpha < 1.
  void validate() const;
};

/// Row-major samples of one component (n rows, dim columns).
struct ComponentData {
  std::size_t dim = 1;
  std::vector<double> values;

  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
};

struct MixtureData {
  std::size_t n = 0;
  std::vector<ComponentData> components;
};

/// Pulls the spec's feature columns out of a table and checks family supports.
MixtureData extract(const imaging::FeatureTable& table, const MixtureSpec& spec);

/// Wraps raw samples of a single component (row-major, n rows).
MixtureData single_component(std::vector<double> values, std::size_t dim = 1);

/// Cluster parameters: params[l][k] is cluster l's parameters for component k.
using ClusterParams = std::vector<std::vector<FamilyParams>>;

/// log Dir(π | α) including its normalizer; 0 when L = 1.
double log_dirichlet(std::span<const double> pi, std::span<const double> alpha);

/// n × L row-major matrix of Σ_k log p(x_ik | θ_lk).
std::vector<double> log_likelihood_matrix(const MixtureData& data, const ClusterParams& params);

struct EStep {
  std::vector<double> gamma;  // n × L row-major, rows on the simplex
  double log_likelihood = 0;  // Σᵢ log Σ_l π_l p(xᵢ | θ_l)
  std::size_t flagged_rows = 0;  // rows where every cluster had zero likelihood
};

EStep e_step(std::span<const double> log_lik, std::size_t n, std::span<const double> pi);

/// π_l = (α_l - 1 + Σᵢ γ_il) / (N - L + Σ α).
std::vector<double> m_step_weights(std::span<const double> gamma, std::size_t n,
                                   std::size_t clusters, std::span<const double> alpha);

/// Σᵢ Σ_l γ_il [log π_l + log p(xᵢ | θ_l)] + log Dir(π | α).
double complete_data_objective(std::span<const double> gamma, std::span<const double> log_lik,
                               std::span<const double> pi, std::span<const double> alpha);

struct FitOptions {
  std::size_t restarts = 3;
  std::uint64_t seed = 0;
  int max_iter = 300;
  double rel_tol = 1e-6;
  MStepOptions mstep{};
  /// Per-sample values whose median seeds the L = 2 split (warm side first).
  /// Empty: the first column of the first component.
  std::vector<double> split_key;
};

struct MixtureFit {
  MixtureSpec spec;
  ClusterParams params;
  std::vector<double> weights;  // π
  std::vector<double> gamma;    // n × L row-major
  std::size_t n = 0;
  /// Log posterior Σᵢ log Σ_l π_l p(xᵢ|θ_l) + log Dir(π|α) after each E-step.
  std::vector<double> trace;
  double q = 0;  // complete-data objective at the final responsibilities
  bool converged = false;
  std::size_t restart_id = 0;
  std::size_t degenerate_restarts = 0;
  std::size_t flagged_rows = 0;

  std::size_t clusters() const noexcept { return spec.clusters; }
  double responsibility(std::size_t i, std::size_t l) const { return gamma[i * spec.clusters + l]; }
  /// Column l of γ as a separate vector.
  std::vector<double> column(std::size_t l) const;
  double log_posterior() const { return trace.empty() ? 0.0 : trace.back(); }
};

/// Weighted M-step for all clusters and components.
/// Throws DegenerateError if some cluster has Σγ < 1e-8 N.
ClusterParams m_step_params(const MixtureData& data, std::span<const double> gamma,
                            const MixtureSpec& spec, const ClusterParams* previous,
                            const MStepOptions& opts);

/// MAP-EM with restarts, keeping the restart with the highest q. Restart 0 for L = 2 splits at the median of the split
/// key; further restarts seed from two random samples. Throws FitError naming
/// the family when every attempt degenerates.
MixtureFit fit(const MixtureData& data, const MixtureSpec& spec, const FitOptions& opts);

/// γ-weighted mean of `values` (one per sample) for each cluster.
std::vector<double> cluster_means(const MixtureFit& fit, std::span<const double> values);

/// Reorders clusters by decreasing mean (cluster 0 warmest); ties go to the
/// larger weight.
MixtureFit resolve_labels(const MixtureFit& fit, std::span<const double> temperature_means);

std::string describe(const MixtureSpec& spec);

}  // namespace cloudlayer::mixtures
