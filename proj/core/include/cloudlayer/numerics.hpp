#pragma once

#include <functional>
#include <span>
#include <vector>

namespace cloudlayer::numerics {

struct SpecialFnConfig {
  int series_terms = 80;   // cap on power-series terms for I0/I1 (>= 20)
  double min_arg = 1e-8;   // floor applied to positivity-constrained parameters
};

inline constexpr SpecialFnConfig kDefaultConfig{};

/// ln Γ(x) for x > 0. Relative error below 1e-12 on [1e-6, 1e6].
double log_gamma(double x);

/// ψ(x) = Γ'(x)/Γ(x) for x > 0.
double digamma(double x);

/// Modified Bessel function of the first kind, order 0 or 1.
/// Overflows to +inf beyond kappa ~ 713; use log_bessel_i there.
double bessel_i(int order, double kappa, const SpecialFnConfig& cfg = kDefaultConfig);

/// log I_order(kappa), finite for every finite kappa > 0.
double log_bessel_i(int order, double kappa, const SpecialFnConfig& cfg = kDefaultConfig);

/// I1(kappa) / I0(kappa), computed without forming either function when kappa > 50.
double bessel_ratio(double kappa, const SpecialFnConfig& cfg = kDefaultConfig);

/// log B(a, b) = lnΓ(a) + lnΓ(b) - lnΓ(a + b).
double log_beta(double a, double b);

/// log Σ exp(v), stable for large magnitudes. Returns -inf for an empty or all -inf span.
double log_sum_exp(std::span<const double> v);

/// Central-difference gradient of f at x with step h. Test oracle for analytic gradients.
std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h);

}  // namespace cloudlayer::numerics
