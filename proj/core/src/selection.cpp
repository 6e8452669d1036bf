#include "cloudlayer/selection.hpp"

#include <cmath>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::selection {

std::string_view criterion_name(Criterion c) {
  switch (c) {
    case Criterion::ML: return "ML";
    case Criterion::BIC: return "BIC";
    case Criterion::AIC: return "AIC";
    case Criterion::CLC: return "CLC";
    case Criterion::ICL: return "ICL";
  }
  return "?";
}

double MetricReport::value(Criterion c) const {
  switch (c) {
    case Criterion::ML: return log_q;
    case Criterion::BIC: return bic;
    case Criterion::AIC: return aic;
    case Criterion::CLC: return clc;
    case Criterion::ICL: return icl;
  }
  return 0.0;
}

std::size_t parameter_count(const mixtures::MixtureSpec& spec) {
  std::size_t per_cluster = 0;
  for (const auto& c : spec.components)
    per_cluster += mixtures::parameter_count(c.family, c.features.size());
  return spec.clusters * per_cluster + (spec.clusters - 1);
}

double entropy(std::span<const double> gamma) {
  double h = 0.0;
  for (double g : gamma)
    if (g > 0.0) h += g * std::log(g);
  return h;
}

double hard_log_q(const mixtures::MixtureFit& fit, const mixtures::MixtureData& data) {
  const std::size_t L = fit.clusters();
  if (data.n != fit.n) throw InputError("data does not match the fit");
  const auto loglik = mixtures::log_likelihood_matrix(data, fit.params);
  double q = 0.0;
  for (std::size_t i = 0; i < fit.n; ++i) {
    std::size_t z = 0;
    for (std::size_t l = 1; l < L; ++l)
      if (fit.gamma[i * L + l] > fit.gamma[i * L + z]) z = l;
    q += std::log(fit.weights[z]) + loglik[i * L + z];
  }
  return q;
}

MetricReport make_report(double log_q, std::size_t lambda, std::size_t n, double entropy) {
  MetricReport r;
  r.log_q = log_q;
  r.lambda = lambda;
  r.n = n;
  r.entropy = entropy;
  const double lam = static_cast<double>(lambda);
  r.bic = lam * std::log(static_cast<double>(n)) - 2.0 * log_q;
  r.aic = 2.0 * lam - 2.0 * log_q;
  r.clc = 2.0 * std::abs(entropy) - 2.0 * log_q;
  r.icl = r.bic + 2.0 * std::abs(entropy);
  return r;
}

MetricReport metrics(const mixtures::MixtureFit& fit, const mixtures::MixtureData& data) {
  MetricReport r =
      make_report(hard_log_q(fit, data), parameter_count(fit.spec), fit.n, entropy(fit.gamma));
  r.soft_q = fit.q;
  return r;
}

MetricReport combine(std::span<const MetricReport> parts) {
  if (parts.empty()) throw InputError("nothing to combine");
  double log_q = 0.0, h = 0.0, soft = 0.0;
  std::size_t lambda = 0;
  for (const auto& p : parts) {
    log_q += p.log_q;
    h += p.entropy;
    soft += p.soft_q;
    lambda += p.lambda;
  }
  MetricReport r = make_report(log_q, lambda, parts.front().n, h);
  r.soft_q = soft;
  return r;
}

std::size_t select(std::span<const MetricReport> reports, Criterion c) {
  if (reports.empty()) throw InputError("no reports to select from");
  std::size_t best = 0;
  for (std::size_t k = 1; k < reports.size(); ++k) {
    const double v = reports[k].value(c), b = reports[best].value(c);
    if (c == Criterion::ML ? v > b : v < b) best = k;
  }
  return best + 1;
}

}  // namespace cloudlayer::selection
