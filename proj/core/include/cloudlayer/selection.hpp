#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "cloudlayer/mixtures.hpp"

namespace cloudlayer::selection {

enum class Criterion { ML, BIC, AIC, CLC, ICL };

std::string_view criterion_name(Criterion c);

struct MetricReport {
  double log_q = 0;    // hard-assignment complete-data log-likelihood
  double soft_q = 0;   // EM objective, for reference
  std::size_t lambda = 0;
  std::size_t n = 0;
  double entropy = 0;  // Σ γ log γ, ≤ 0
  double bic = 0, aic = 0, clc = 0, icl = 0;

  double value(Criterion c) const;
};

/// Per-cluster family parameters plus L - 1 free weights.
std::size_t parameter_count(const mixtures::MixtureSpec& spec);

/// Σᵢ Σ_l γ log γ with 0 log 0 = 0.
double entropy(std::span<const double> gamma);

/// Σᵢ log π_zᵢ + log p(xᵢ | θ_zᵢ) with zᵢ = argmax_l γ_il (first on ties).
double hard_log_q(const mixtures::MixtureFit& fit, const mixtures::MixtureData& data);

/// Fills BIC = λ ln N - 2 log Q, AIC = 2λ - 2 log Q, CLC = 2|H| - 2 log Q,
/// ICL = BIC + 2|H| from the given pieces.
MetricReport make_report(double log_q, std::size_t lambda, std::size_t n, double entropy);

MetricReport metrics(const mixtures::MixtureFit& fit, const mixtures::MixtureData& data);

/// Sum of independent factor reports (parameters, log Q and entropy add).
MetricReport combine(std::span<const MetricReport> parts);

/// Index + 1 of the best report: lowest criterion value, highest log Q for ML;
/// ties go to the smaller L.
std::size_t select(std::span<const MetricReport> reports, Criterion c);

}  // namespace cloudlayer::selection
