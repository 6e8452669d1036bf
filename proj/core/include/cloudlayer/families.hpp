#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace cloudlayer::mixtures {

enum class Family { Gamma, BivariateGamma, VonMises, Beta, Gaussian };

std::string_view family_name(Family f);

/// Shape alpha, scale beta: density x^(α-1) e^(-x/β) / (β^α Γ(α)).
struct GammaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

/// log p(x, y) = α log β + (α + a - 1) log x + (a - 1) log y - βx - xy - lnΓ(α) - lnΓ(a).
/// X is Gamma(α, rate β); Y | X is Gamma(a, rate x).
struct BivariateGammaParams {
  double alpha = 1.0;
  double beta = 1.0;
  double a = 1.0;
};

struct VonMisesParams {
  double mu = 0.0;
  double kappa = 1.0;
};

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

struct GaussianParams {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

using FamilyParams =
    std::variant<GammaParams, BivariateGammaParams, VonMisesParams, BetaParams, GaussianParams>;

Family family_of(const FamilyParams& p);

/// Sample dimension a family consumes (Gaussian: fixed by its mean).
std::size_t sample_dim(const FamilyParams& p);

/// Number of free parameters of one cluster of this family in d dimensions.
std::size_t parameter_count(Family f, std::size_t dim);

/// Log density. Throws DomainError outside the support.
double log_pdf(const FamilyParams& p, std::span<const double> x);

/// Gradient of log_pdf with respect to the parameter vector (see to_vector).
/// Gaussian: gradient with respect to the mean only.
std::vector<double> log_pdf_gradient(const FamilyParams& p, std::span<const double> x);

/// Flat parameter vector: Gamma (α, β), BivariateGamma (α, β, a), VonMises (μ, κ),
/// Beta (α, β), Gaussian (mean..., covariance row-major...).
std::vector<double> to_vector(const FamilyParams& p);
FamilyParams from_vector(Family f, std::span<const double> v, std::size_t dim = 1);

/// Box limits used by the numerical M-step.
struct ParamLimits {
  double min_positive = 1e-8;  // numerics min_arg
  double max_positive = 1e6;
  double max_kappa = 500.0;
  double min_shape = 1e-8;  // lower bound on Gamma, bivariate Gamma and Beta shapes
  double cov_floor_ratio = 1e-6;  // eigenvalue floor relative to total data variance
};

/// Precomputed evaluator of log_pdf for repeated calls with the same parameters.
class LogDensity {
 public:
  explicit LogDensity(const FamilyParams& p);
  double operator()(std::span<const double> x) const;

 private:
  FamilyParams params_;
  double constant_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> chol_;
};

/// γ-weighted maximization of Σ γᵢ log p(xᵢ | θ) for one cluster.
///
/// Gaussian: closed-form weighted moments with an eigenvalue floor.
/// Other families: projected gradient ascent on the weighted mean log-likelihood
/// in log-parameter space (μ of the Von Mises is unconstrained and wrapped),
/// with Barzilai-Borwein steps and Armijo backtracking, until the projected
/// gradient norm drops below grad_tol or max_iter steps. The result never has a
/// lower weighted objective than `start` when a start is given.
struct MStepOptions {
  ParamLimits limits{};
  double grad_tol = 1e-7;
  int max_iter = 500;
  double total_variance = 1.0;  // per-dimension data variance, for the covariance floor
};

FamilyParams maximize_weighted(Family f, std::span<const double> data, std::size_t dim,
                               std::span<const double> gamma, const FamilyParams* start,
                               const MStepOptions& opts);

/// Σ γᵢ log p(xᵢ | θ).
double weighted_log_likelihood(const FamilyParams& p, std::span<const double> data,
                               std::size_t dim, std::span<const double> gamma);

}  // namespace cloudlayer::mixtures
