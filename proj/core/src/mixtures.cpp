#include "cloudlayer/mixtures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "cloudlayer/errors.hpp"
#include "cloudlayer/numerics.hpp"

namespace cloudlayer::mixtures {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::size_t arity(Family f) {
  switch (f) {
    case Family::BivariateGamma: return 2;
    case Family::Gaussian: return 0;  // any
    default: return 1;
  }
}

const std::vector<double>& column_of(const imaging::FeatureTable& t, Feature f) {
  switch (f) {
    case Feature::Kelvin: return t.kelvin;
    case Feature::BetaT: return t.beta_t;
    case Feature::GammaT: return t.gamma_t;
    case Feature::U: return t.u;
    case Feature::V: return t.v;
    case Feature::R: return t.r;
    case Feature::Phi: return t.phi;
  }
  throw InputError("unknown feature");
}

bool in_support(Family f, std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  switch (f) {
    case Family::Gamma: return x[0] > 0;
    case Family::BivariateGamma: return x[0] > 0 && x[1] > 0;
    case Family::Beta: return x[0] > 0 && x[0] < 1;
    default: return true;
  }
}

double total_variance(const ComponentData& c, std::size_t n) {
  double total = 0.0;
  for (std::size_t d = 0; d < c.dim; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += c.values[i * c.dim + d];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = c.values[i * c.dim + d] - mean;
      ss += e * e;
    }
    total += ss / static_cast<double>(n);
  }
  return total;
}

std::vector<double> alphas(const MixtureSpec& spec) {
  std::vector<double> a(spec.clusters);
  for (std::size_t l = 0; l < spec.clusters; ++l) a[l] = spec.alpha(l);
  return a;
}

std::vector<double> median_split(std::span<const double> key) {
  std::vector<double> sorted(key.begin(), key.end());
  const std::size_t mid = (sorted.size() - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  const double median = sorted[mid];
  std::vector<double> gamma(key.size() * 2, 0.0);
  for (std::size_t i = 0; i < key.size(); ++i) gamma[i * 2 + (key[i] > median ? 0 : 1)] = 1.0;
  return gamma;
}

std::vector<double> random_seed_split(const MixtureData& data, std::uint64_t seed) {
  // Standardized concatenation of every component column.
  const std::size_t n = data.n;
  std::vector<std::vector<double>> cols;
  for (const auto& c : data.components)
    for (std::size_t d = 0; d < c.dim; ++d) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = c.values[i * c.dim + d];
      const double mean = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(n);
      double ss = 0.0;
      for (double v : col) ss += (v - mean) * (v - mean);
      double sd = std::sqrt(ss / static_cast<double>(n));
      if (!(sd > 0.0)) sd = 1.0;
      for (double& v : col) v = (v - mean) / sd;
      cols.push_back(std::move(col));
    }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t a = pick(rng);
  std::size_t b = pick(rng);
  if (n > 1)
    while (b == a) b = pick(rng);
  std::vector<double> gamma(n * 2, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double da = 0.0, db = 0.0;
    for (const auto& col : cols) {
      da += (col[i] - col[a]) * (col[i] - col[a]);
      db += (col[i] - col[b]) * (col[i] - col[b]);
    }
    gamma[i * 2 + (db < da ? 1 : 0)] = 1.0;
  }
  return gamma;
}

struct Attempt {
  MixtureFit fit;
  bool ok = false;
};

Attempt run_em(const MixtureData& data, const MixtureSpec& spec, std::vector<double> gamma,
               const FitOptions& opts, const MStepOptions& mstep) {
  const std::size_t L = spec.clusters;
  const auto alpha = alphas(spec);
  Attempt out;
  MixtureFit& f = out.fit;
  f.spec = spec;
  f.n = data.n;
  try {
    f.weights = m_step_weights(gamma, data.n, L, alpha);
    f.params = m_step_params(data, gamma, spec, nullptr, mstep);
    std::vector<double> loglik;
    for (int it = 0;; ++it) {
      loglik = log_likelihood_matrix(data, f.params);
      EStep e = e_step(loglik, data.n, f.weights);
      gamma = std::move(e.gamma);
      f.flagged_rows = e.flagged_rows;
      const double ell = e.log_likelihood + log_dirichlet(f.weights, alpha);
      if (!std::isfinite(ell)) return out;
      f.trace.push_back(ell);
      if (it > 0) {
        const double prev = f.trace[f.trace.size() - 2];
        if (std::abs(ell - prev) < opts.rel_tol * (1.0 + std::abs(ell))) {
          f.converged = true;
          break;
        }
      }
      if (it + 1 >= opts.max_iter) break;
      f.weights = m_step_weights(gamma, data.n, L, alpha);
      f.params = m_step_params(data, gamma, spec, &f.params, mstep);
    }
    f.gamma = std::move(gamma);
    f.q = complete_data_objective(f.gamma, loglik, f.weights, alpha);
    out.ok = std::isfinite(f.q);
  } catch (const DegenerateError&) {
    out.ok = false;
  }
  return out;
}

}  // namespace

std::string_view feature_name(Feature f) {
  switch (f) {
    case Feature::Kelvin: return "T";
    case Feature::BetaT: return "T_beta";
    case Feature::GammaT: return "T_gamma";
    case Feature::U: return "u";
    case Feature::V: return "v";
    case Feature::R: return "r";
    case Feature::Phi: return "phi";
  }
  return "?";
}

bool is_temperature(Feature f) {
  return f == Feature::Kelvin || f == Feature::BetaT || f == Feature::GammaT;
}

double MixtureSpec::alpha(std::size_t l) const {
  return dirichlet_alpha.empty() ? 1.0 : dirichlet_alpha.at(l);
}

void MixtureSpec::validate() const {
  if (clusters < 1 || clusters > 2) throw InputError("cluster count must be 1 or 2");
  if (components.empty()) throw InputError("mixture spec has no components");
  for (const auto& c : components) {
    const std::size_t k = arity(c.family);
    if (c.features.empty() || (k != 0 && c.features.size() != k))
      throw InputError(std::string(family_name(c.family)) + " component has the wrong number of features");
  }
  if (!dirichlet_alpha.empty()) {
    if (dirichlet_alpha.size() != clusters)
      throw InputError("one Dirichlet alpha per cluster is required");
    for (double a : dirichlet_alpha)
      if (!(a >= 1.0) || !std::isfinite(a)) throw InputError("Dirichlet alpha must be >= 1");
  }
}

MixtureData extract(const imaging::FeatureTable& table, const MixtureSpec& spec) {
  spec.validate();
  MixtureData data;
  data.n = table.size();
  for (const auto& c : spec.components) {
    ComponentData cd;
    cd.dim = c.features.size();
    cd.values.resize(data.n * cd.dim);
    for (std::size_t d = 0; d < cd.dim; ++d) {
      const auto& col = column_of(table, c.features[d]);
      if (col.size() != data.n)
        throw InputError("feature " + std::string(feature_name(c.features[d])) + " is not available");
      for (std::size_t i = 0; i < data.n; ++i) cd.values[i * cd.dim + d] = col[i];
    }
    for (std::size_t i = 0; i < data.n; ++i)
      if (!in_support(c.family, cd.row(i)))
        throw DomainError("feature value outside the " + std::string(family_name(c.family)) +
                          " support");
    data.components.push_back(std::move(cd));
  }
  return data;
}

MixtureData single_component(std::vector<double> values, std::size_t dim) {
  MixtureData data;
  data.n = values.size() / dim;
  data.components.push_back(ComponentData{dim, std::move(values)});
  return data;
}

double log_dirichlet(std::span<const double> pi, std::span<const double> alpha) {
  if (pi.size() <= 1) return 0.0;
  double sum_alpha = 0.0, out = 0.0;
  for (std::size_t l = 0; l < pi.size(); ++l) {
    sum_alpha += alpha[l];
    out -= numerics::log_gamma(alpha[l]);
    if (alpha[l] != 1.0) out += (alpha[l] - 1.0) * std::log(pi[l]);
  }
  return out + numerics::log_gamma(sum_alpha);
}

std::vector<double> log_likelihood_matrix(const MixtureData& data, const ClusterParams& params) {
  const std::size_t L = params.size();
  std::vector<double> out(data.n * L, 0.0);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t k = 0; k < data.components.size(); ++k) {
      const LogDensity density(params[l][k]);
      const auto& c = data.components[k];
      for (std::size_t i = 0; i < data.n; ++i) out[i * L + l] += density(c.row(i));
    }
  return out;
}

EStep e_step(std::span<const double> log_lik, std::size_t n, std::span<const double> pi) {
  const std::size_t L = pi.size();
  if (n == 0 || log_lik.size() != n * L) throw InputError("E-step size mismatch");
  EStep out;
  out.gamma.assign(n * L, 0.0);
  std::vector<double> logw(L);
  for (std::size_t l = 0; l < L; ++l) logw[l] = std::log(pi[l]);
  std::vector<double> a(L);
  for (std::size_t i = 0; i < n; ++i) {
    double m = kNegInf;
    for (std::size_t l = 0; l < L; ++l) {
      a[l] = logw[l] + log_lik[i * L + l];
      if (std::isnan(a[l])) a[l] = kNegInf;
      m = std::max(m, a[l]);
    }
    if (!std::isfinite(m)) {
      for (std::size_t l = 0; l < L; ++l) out.gamma[i * L + l] = 1.0 / static_cast<double>(L);
      ++out.flagged_rows;
      out.log_likelihood = kNegInf;
      continue;
    }
    if (L == 1) {
      out.gamma[i] = 1.0;
      out.log_likelihood += a[0];
      continue;
    }
    double s = 0.0;
    for (std::size_t l = 0; l < L; ++l) s += std::exp(a[l] - m);
    const double lse = m + std::log(s);
    double row = 0.0;
    for (std::size_t l = 0; l < L; ++l) {
      out.gamma[i * L + l] = std::exp(a[l] - lse);
      row += out.gamma[i * L + l];
    }
    for (std::size_t l = 0; l < L; ++l) out.gamma[i * L + l] /= row;
    out.log_likelihood += lse;
  }
  return out;
}

std::vector<double> m_step_weights(std::span<const double> gamma, std::size_t n,
                                   std::size_t clusters, std::span<const double> alpha) {
  if (clusters == 1) return {1.0};
  std::vector<double> sums(clusters, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < clusters; ++l) sums[l] += gamma[i * clusters + l];
  double sum_alpha = 0.0;
  for (std::size_t l = 0; l < clusters; ++l) sum_alpha += alpha[l];
  const double denom = static_cast<double>(n) - static_cast<double>(clusters) + sum_alpha;
  std::vector<double> pi(clusters);
  for (std::size_t l = 0; l < clusters; ++l) pi[l] = (alpha[l] - 1.0 + sums[l]) / denom;
  return pi;
}

double complete_data_objective(std::span<const double> gamma, std::span<const double> log_lik,
                               std::span<const double> pi, std::span<const double> alpha) {
  const std::size_t L = pi.size();
  std::vector<double> logw(L);
  for (std::size_t l = 0; l < L; ++l) logw[l] = std::log(pi[l]);
  double q = 0.0;
  for (std::size_t idx = 0; idx < gamma.size(); ++idx)
    if (gamma[idx] > 0.0) q += gamma[idx] * (logw[idx % L] + log_lik[idx]);
  return q + log_dirichlet(pi, alpha);
}

ClusterParams m_step_params(const MixtureData& data, std::span<const double> gamma,
                            const MixtureSpec& spec, const ClusterParams* previous,
                            const MStepOptions& opts) {
  const std::size_t L = spec.clusters;
  ClusterParams out(L);
  std::vector<double> g(data.n);
  for (std::size_t l = 0; l < L; ++l) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n; ++i) {
      g[i] = gamma[i * L + l];
      total += g[i];
    }
    if (!(total >= 1e-8 * static_cast<double>(data.n)))
      throw DegenerateError("empty cluster in M-step");
    for (std::size_t k = 0; k < spec.components.size(); ++k) {
      const auto& c = data.components[k];
      MStepOptions o = opts;
      o.total_variance = total_variance(c, data.n);
      const FamilyParams* start = previous ? &(*previous)[l][k] : nullptr;
      out[l].push_back(maximize_weighted(spec.components[k].family, c.values, c.dim, g, start, o));
    }
  }
  return out;
}

MixtureFit fit(const MixtureData& data, const MixtureSpec& spec, const FitOptions& opts) {
  spec.validate();
  if (data.components.size() != spec.components.size())
    throw InputError("data does not match the mixture spec");
  if (data.n < spec.clusters) throw InputError("fewer samples than clusters");
  const std::size_t L = spec.clusters;

  std::vector<double> key = opts.split_key;
  if (key.empty()) {
    const auto& c = data.components.front();
    key.resize(data.n);
    for (std::size_t i = 0; i < data.n; ++i) key[i] = c.values[i * c.dim];
  }
  if (key.size() != data.n) throw InputError("split key length differs from the sample count");

  const std::size_t wanted = (L == 1) ? 1 : std::max<std::size_t>(opts.restarts, 1);
  const std::size_t max_attempts = (L == 1) ? 1 : 3 * wanted + 2;
  std::size_t successes = 0, degenerate = 0;
  Attempt best;
  for (std::size_t a = 0; a < max_attempts && successes < wanted; ++a) {
    std::vector<double> gamma;
    if (L == 1)
      gamma.assign(data.n, 1.0);
    else if (a == 0)
      gamma = median_split(key);
    else
      gamma = random_seed_split(data, opts.seed + a);
    Attempt att = run_em(data, spec, std::move(gamma), opts, opts.mstep);
    if (!att.ok) {
      ++degenerate;
      continue;
    }
    ++successes;
    att.fit.restart_id = a;
    if (!best.ok || att.fit.q > best.fit.q) best = std::move(att);
  }
  if (!best.ok) {
    std::string families;
    for (const auto& c : spec.components) {
      if (!families.empty()) families += "+";
      families += family_name(c.family);
    }
    throw FitError("all initializations degenerated for " + families + " mixture with L=" +
                   std::to_string(L));
  }
  best.fit.degenerate_restarts = degenerate;
  return best.fit;
}

std::vector<double> MixtureFit::column(std::size_t l) const {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = gamma[i * spec.clusters + l];
  return out;
}

std::vector<double> cluster_means(const MixtureFit& fit, std::span<const double> values) {
  if (values.size() != fit.n) throw InputError("value count differs from the fit's sample count");
  const std::size_t L = fit.clusters();
  std::vector<double> num(L, 0.0), den(L, 0.0);
  for (std::size_t i = 0; i < fit.n; ++i)
    for (std::size_t l = 0; l < L; ++l) {
      num[l] += fit.gamma[i * L + l] * values[i];
      den[l] += fit.gamma[i * L + l];
    }
  for (std::size_t l = 0; l < L; ++l) num[l] = den[l] > 0 ? num[l] / den[l] : 0.0;
  return num;
}

MixtureFit resolve_labels(const MixtureFit& fit, std::span<const double> temperature_means) {
  const std::size_t L = fit.clusters();
  if (temperature_means.size() != L) throw InputError("one mean per cluster is required");
  std::vector<std::size_t> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (temperature_means[a] != temperature_means[b])
      return temperature_means[a] > temperature_means[b];
    return fit.weights[a] > fit.weights[b];
  });
  MixtureFit out = fit;
  for (std::size_t l = 0; l < L; ++l) {
    out.params[l] = fit.params[order[l]];
    out.weights[l] = fit.weights[order[l]];
    if (!fit.spec.dirichlet_alpha.empty())
      out.spec.dirichlet_alpha[l] = fit.spec.dirichlet_alpha[order[l]];
    for (std::size_t i = 0; i < fit.n; ++i) out.gamma[i * L + l] = fit.gamma[i * L + order[l]];
  }
  return out;
}

std::string describe(const MixtureSpec& spec) {
  std::ostringstream os;
  for (std::size_t k = 0; k < spec.components.size(); ++k) {
    if (k) os << " x ";
    os << family_name(spec.components[k].family) << "(";
    for (std::size_t d = 0; d < spec.components[k].features.size(); ++d)
      os << (d ? "," : "") << feature_name(spec.components[k].features[d]);
    os << ")";
  }
  os << " L=" << spec.clusters;
  return os.str();
}

}  // namespace cloudlayer::mixtures
