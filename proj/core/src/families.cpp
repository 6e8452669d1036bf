#include "cloudlayer/families.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include "cloudlayer/errors.hpp"
#include "cloudlayer/numerics.hpp"

namespace cloudlayer::mixtures {
namespace {

using numerics::digamma;
using numerics::log_gamma;

constexpr double kLog2Pi = 1.8378770664093454836;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

void check_params(const FamilyParams& p) {
  std::visit(Overloaded{
                 [](const GammaParams& g) {
                   require(g.alpha > 0 && g.beta > 0, "Gamma parameters must be > 0");
                 },
                 [](const BivariateGammaParams& g) {
                   require(g.alpha > 0 && g.beta > 0 && g.a > 0,
                           "bivariate Gamma parameters must be > 0");
                 },
                 [](const VonMisesParams& g) {
                   require(g.kappa > 0 && std::isfinite(g.mu), "Von Mises needs kappa > 0");
                 },
                 [](const BetaParams& g) {
                   require(g.alpha > 0 && g.beta > 0, "Beta parameters must be > 0");
                 },
                 [](const GaussianParams& g) {
                   require(g.mean.size() > 0 && g.cov.rows() == g.mean.size() &&
                               g.cov.cols() == g.mean.size(),
                           "Gaussian mean/covariance dimensions disagree");
                 },
             },
             p);
}

void check_support(const FamilyParams& p, std::span<const double> x) {
  require(x.size() == sample_dim(p), "sample dimension does not match the family");
  for (double v : x) require(std::isfinite(v), "sample must be finite");
  switch (family_of(p)) {
    case Family::Gamma:
      require(x[0] > 0, "Gamma support is x > 0");
      break;
    case Family::BivariateGamma:
      require(x[0] > 0 && x[1] > 0, "bivariate Gamma support is x, y > 0");
      break;
    case Family::Beta:
      require(x[0] > 0 && x[0] < 1, "Beta support is 0 < x < 1");
      break;
    case Family::VonMises:
    case Family::Gaussian:
      break;
  }
}

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

// --- numerical M-step ---------------------------------------------------------

// Maximizes f over theta; coordinates flagged positive are optimized as log(theta)
// inside [lo, hi] (in log space), the rest are free (angles, wrapped).
struct BoxProblem {
  std::vector<bool> positive;
  std::vector<double> lo, hi;  // eta-space bounds for positive coordinates
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
};

std::vector<double> to_eta(const BoxProblem& pb, const std::vector<double>& theta) {
  std::vector<double> eta(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k)
    eta[k] = pb.positive[k] ? std::clamp(std::log(theta[k]), pb.lo[k], pb.hi[k]) : theta[k];
  return eta;
}

std::vector<double> to_theta(const BoxProblem& pb, const std::vector<double>& eta) {
  std::vector<double> theta(eta.size());
  for (std::size_t k = 0; k < eta.size(); ++k)
    theta[k] = pb.positive[k] ? std::exp(eta[k]) : wrap_angle(eta[k]);
  return theta;
}

std::vector<double> eta_gradient(const BoxProblem& pb, const std::vector<double>& theta) {
  auto g = pb.gradient(theta);
  for (std::size_t k = 0; k < g.size(); ++k)
    if (pb.positive[k]) g[k] *= theta[k];
  return g;
}

// Zero the components that push against an active bound.
std::vector<double> project_gradient(const BoxProblem& pb, const std::vector<double>& eta,
                                     std::vector<double> g) {
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!pb.positive[k]) continue;
    if ((eta[k] <= pb.lo[k] && g[k] < 0) || (eta[k] >= pb.hi[k] && g[k] > 0)) g[k] = 0.0;
  }
  return g;
}

double norm(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> gradient_ascent(const BoxProblem& pb, std::vector<double> theta,
                                    double grad_tol, int max_iter) {
  std::vector<double> eta = to_eta(pb, theta);
  theta = to_theta(pb, eta);
  double f = pb.value(theta);
  std::vector<double> g = project_gradient(pb, eta, eta_gradient(pb, theta));
  double step = 1.0;
  for (int it = 0; it < max_iter; ++it) {
    const double gnorm = norm(g);
    if (!(gnorm >= grad_tol)) break;
    bool accepted = false;
    std::vector<double> eta_new(eta.size()), theta_new;
    double f_new = f;
    for (int halving = 0; halving < 60; ++halving) {
      double decrease_dir = 0.0;
      for (std::size_t k = 0; k < eta.size(); ++k) {
        double e = eta[k] + step * g[k];
        if (pb.positive[k]) e = std::clamp(e, pb.lo[k], pb.hi[k]);
        eta_new[k] = e;
        decrease_dir += g[k] * (e - eta[k]);
      }
      theta_new = to_theta(pb, eta_new);
      f_new = pb.value(theta_new);
      if (std::isfinite(f_new) && f_new >= f + 1e-4 * decrease_dir && decrease_dir > 0.0) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    std::vector<double> g_new = project_gradient(pb, eta_new, eta_gradient(pb, theta_new));
    // Barzilai-Borwein step for the next iteration (ascent form).
    double ss = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < eta.size(); ++k) {
      const double s = eta_new[k] - eta[k];
      const double y = g_new[k] - g[k];
      ss += s * s;
      sy += s * y;
    }
    step = (sy < 0.0) ? std::clamp(-ss / sy, 1e-6, 1e6) : std::min(step * 4.0, 1e6);
    eta = std::move(eta_new);
    theta = std::move(theta_new);
    f = f_new;
    g = std::move(g_new);
  }
  return theta;
}

struct WeightedStats {
  double weight = 0.0;
  std::vector<double> mean;  // family-specific averages
};

double checked_total(std::span<const double> gamma) {
  double w = 0;
  for (double g : gamma) w += g;
  if (!(w > 0.0)) throw DegenerateError("M-step with zero total responsibility");
  return w;
}

double kappa_from_resultant(double r) {
  if (r < 0.53) return 2 * r + r * r * r + 5 * std::pow(r, 5) / 6;
  if (r < 0.85) return -0.4 + 1.39 * r + 0.43 / (1 - r);
  const double den = r * r * r - 4 * r * r + 3 * r;
  return den > 0.0 ? 1.0 / den : std::numeric_limits<double>::infinity();
}

double clamp_pos(double x, const ParamLimits& lim, double hi) {
  if (!std::isfinite(x)) return hi;
  return std::clamp(x, lim.min_positive, hi);
}

FamilyParams maximize_gaussian(std::span<const double> data, std::size_t dim,
                               std::span<const double> gamma, const FamilyParams* start,
                               const MStepOptions& opts) {
  const std::size_t n = gamma.size();
  const double w = checked_total(gamma);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += gamma[i] * data[i * dim + d];
  mean /= w;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd diff(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) diff[d] = data[i * dim + d] - mean[d];
    cov.noalias() += gamma[i] * diff * diff.transpose();
  }
  cov /= w;
  cov = 0.5 * (cov + cov.transpose());
  const double floor =
      std::max(opts.limits.cov_floor_ratio * opts.total_variance, 1e-12);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  Eigen::VectorXd values = eig.eigenvalues().cwiseMax(floor);
  cov = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose());
  FamilyParams result = GaussianParams{mean, cov};
  if (start != nullptr) {
    if (weighted_log_likelihood(*start, data, dim, gamma) >
        weighted_log_likelihood(result, data, dim, gamma))
      return *start;
  }
  return result;
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Gamma: return "gamma";
    case Family::BivariateGamma: return "bivariate_gamma";
    case Family::VonMises: return "von_mises";
    case Family::Beta: return "beta";
    case Family::Gaussian: return "gaussian";
  }
  return "unknown";
}

Family family_of(const FamilyParams& p) {
  return static_cast<Family>(p.index());
}

std::size_t sample_dim(const FamilyParams& p) {
  if (const auto* g = std::get_if<GaussianParams>(&p)) return static_cast<std::size_t>(g->mean.size());
  return family_of(p) == Family::BivariateGamma ? 2 : 1;
}

std::size_t parameter_count(Family f, std::size_t dim) {
  switch (f) {
    case Family::Gamma:
    case Family::VonMises:
    case Family::Beta:
      return 2;
    case Family::BivariateGamma:
      return 3;
    case Family::Gaussian:
      return dim + dim * (dim + 1) / 2;
  }
  return 0;
}

LogDensity::LogDensity(const FamilyParams& p) : params_(p) {
  check_params(p);
  std::visit(Overloaded{
                 [&](const GammaParams& g) {
                   constant_ = -g.alpha * std::log(g.beta) - log_gamma(g.alpha);
                 },
                 [&](const BivariateGammaParams& g) {
                   constant_ = g.alpha * std::log(g.beta) - log_gamma(g.alpha) - log_gamma(g.a);
                 },
                 [&](const VonMisesParams& g) {
                   constant_ = -kLog2Pi - numerics::log_bessel_i(0, g.kappa);
                 },
                 [&](const BetaParams& g) { constant_ = -numerics::log_beta(g.alpha, g.beta); },
                 [&](const GaussianParams& g) {
                   chol_.compute(g.cov);
                   if (chol_.info() != Eigen::Success)
                     throw DomainError("Gaussian covariance is not positive definite");
                   const Eigen::MatrixXd l = chol_.matrixL();
                   const double log_det = 2.0 * l.diagonal().array().log().sum();
                   constant_ = -0.5 * static_cast<double>(g.mean.size()) * kLog2Pi - 0.5 * log_det;
                 },
             },
             params_);
}

double LogDensity::operator()(std::span<const double> x) const {
  return std::visit(
      Overloaded{
          [&](const GammaParams& g) {
            return (g.alpha - 1.0) * std::log(x[0]) - x[0] / g.beta + constant_;
          },
          [&](const BivariateGammaParams& g) {
            return (g.alpha + g.a - 1.0) * std::log(x[0]) + (g.a - 1.0) * std::log(x[1]) -
                   g.beta * x[0] - x[0] * x[1] + constant_;
          },
          [&](const VonMisesParams& g) { return g.kappa * std::cos(x[0] - g.mu) + constant_; },
          [&](const BetaParams& g) {
            return (g.alpha - 1.0) * std::log(x[0]) + (g.beta - 1.0) * std::log1p(-x[0]) +
                   constant_;
          },
          [&](const GaussianParams& g) {
            Eigen::VectorXd diff(g.mean.size());
            for (Eigen::Index d = 0; d < g.mean.size(); ++d) diff[d] = x[d] - g.mean[d];
            const Eigen::VectorXd z = chol_.matrixL().solve(diff);
            return constant_ - 0.5 * z.squaredNorm();
          },
      },
      params_);
}

double log_pdf(const FamilyParams& p, std::span<const double> x) {
  check_params(p);
  check_support(p, x);
  return LogDensity(p)(x);
}

std::vector<double> log_pdf_gradient(const FamilyParams& p, std::span<const double> x) {
  check_params(p);
  check_support(p, x);
  return std::visit(
      Overloaded{
          [&](const GammaParams& g) -> std::vector<double> {
            return {std::log(x[0]) - std::log(g.beta) - digamma(g.alpha),
                    (x[0] / g.beta - g.alpha) / g.beta};
          },
          [&](const BivariateGammaParams& g) -> std::vector<double> {
            return {std::log(g.beta) + std::log(x[0]) - digamma(g.alpha), g.alpha / g.beta - x[0],
                    std::log(x[0]) + std::log(x[1]) - digamma(g.a)};
          },
          [&](const VonMisesParams& g) -> std::vector<double> {
            return {g.kappa * std::sin(x[0] - g.mu),
                    std::cos(x[0] - g.mu) - numerics::bessel_ratio(g.kappa)};
          },
          [&](const BetaParams& g) -> std::vector<double> {
            const double both = digamma(g.alpha + g.beta);
            return {std::log(x[0]) - digamma(g.alpha) + both,
                    std::log1p(-x[0]) - digamma(g.beta) + both};
          },
          [&](const GaussianParams& g) -> std::vector<double> {
            Eigen::VectorXd diff(g.mean.size());
            for (Eigen::Index d = 0; d < g.mean.size(); ++d) diff[d] = x[d] - g.mean[d];
            const Eigen::VectorXd grad = g.cov.llt().solve(diff);
            return {grad.data(), grad.data() + grad.size()};
          },
      },
      p);
}

std::vector<double> to_vector(const FamilyParams& p) {
  return std::visit(
      Overloaded{
          [](const GammaParams& g) -> std::vector<double> { return {g.alpha, g.beta}; },
          [](const BivariateGammaParams& g) -> std::vector<double> {
            return {g.alpha, g.beta, g.a};
          },
          [](const VonMisesParams& g) -> std::vector<double> { return {g.mu, g.kappa}; },
          [](const BetaParams& g) -> std::vector<double> { return {g.alpha, g.beta}; },
          [](const GaussianParams& g) -> std::vector<double> {
            std::vector<double> v(g.mean.data(), g.mean.data() + g.mean.size());
            for (Eigen::Index r = 0; r < g.cov.rows(); ++r)
              for (Eigen::Index c = 0; c < g.cov.cols(); ++c) v.push_back(g.cov(r, c));
            return v;
          },
      },
      p);
}

FamilyParams from_vector(Family f, std::span<const double> v, std::size_t dim) {
  auto need = [&](std::size_t n) {
    if (v.size() != n) throw InputError("parameter vector has the wrong length");
  };
  switch (f) {
    case Family::Gamma: need(2); return GammaParams{v[0], v[1]};
    case Family::BivariateGamma: need(3); return BivariateGammaParams{v[0], v[1], v[2]};
    case Family::VonMises: need(2); return VonMisesParams{v[0], v[1]};
    case Family::Beta: need(2); return BetaParams{v[0], v[1]};
    case Family::Gaussian: {
      need(dim + dim * dim);
      GaussianParams g{Eigen::VectorXd(dim), Eigen::MatrixXd(dim, dim)};
      for (std::size_t d = 0; d < dim; ++d) g.mean[d] = v[d];
      for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) g.cov(r, c) = v[dim + r * dim + c];
      return g;
    }
  }
  throw InputError("unknown family");
}

double weighted_log_likelihood(const FamilyParams& p, std::span<const double> data,
                               std::size_t dim, std::span<const double> gamma) {
  const LogDensity density(p);
  double s = 0.0;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    if (gamma[i] == 0.0) continue;
    s += gamma[i] * density(data.subspan(i * dim, dim));
  }
  return s;
}

FamilyParams maximize_weighted(Family f, std::span<const double> data, std::size_t dim,
                               std::span<const double> gamma, const FamilyParams* start,
                               const MStepOptions& opts) {
  if (data.size() != gamma.size() * dim) throw InputError("M-step data/weight size mismatch");
  if (f == Family::Gaussian) return maximize_gaussian(data, dim, gamma, start, opts);

  const auto& lim = opts.limits;
  const double w = checked_total(gamma);
  const std::size_t n = gamma.size();
  auto wmean = [&](auto&& fn) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (gamma[i] != 0.0) s += gamma[i] * fn(i);
    return s / w;
  };
  auto x = [&](std::size_t i) { return data[i * dim]; };
  const double lo = std::log(lim.min_positive);
  const double hi = std::log(lim.max_positive);
  const double shape_lo = std::log(std::max(lim.min_shape, lim.min_positive));

  BoxProblem pb;
  std::vector<double> init;

  switch (f) {
    case Family::Gamma: {
      const double slx = wmean([&](auto i) { return std::log(x(i)); });
      const double sx = wmean(x);
      const double var = wmean([&](auto i) { return (x(i) - sx) * (x(i) - sx); });
      pb.positive = {true, true};
      pb.lo = {shape_lo, lo};
      pb.hi = {hi, hi};
      pb.value = [=](const std::vector<double>& t) {
        return (t[0] - 1.0) * slx - sx / t[1] - t[0] * std::log(t[1]) - log_gamma(t[0]);
      };
      pb.gradient = [=](const std::vector<double>& t) {
        return std::vector<double>{slx - std::log(t[1]) - digamma(t[0]),
                                   (sx / t[1] - t[0]) / t[1]};
      };
      init = {clamp_pos(sx * sx / var, lim, lim.max_positive),
              clamp_pos(var / sx, lim, lim.max_positive)};
      break;
    }
    case Family::BivariateGamma: {
      auto y = [&](std::size_t i) { return data[i * dim + 1]; };
      const double slx = wmean([&](auto i) { return std::log(x(i)); });
      const double sly = wmean([&](auto i) { return std::log(y(i)); });
      const double sx = wmean(x);
      const double sxy = wmean([&](auto i) { return x(i) * y(i); });
      const double var = wmean([&](auto i) { return (x(i) - sx) * (x(i) - sx); });
      pb.positive = {true, true, true};
      pb.lo = {shape_lo, lo, shape_lo};
      pb.hi = {hi, hi, hi};
      pb.value = [=](const std::vector<double>& t) {
        return t[0] * std::log(t[1]) + (t[0] + t[2] - 1.0) * slx + (t[2] - 1.0) * sly -
               t[1] * sx - sxy - log_gamma(t[0]) - log_gamma(t[2]);
      };
      pb.gradient = [=](const std::vector<double>& t) {
        return std::vector<double>{std::log(t[1]) + slx - digamma(t[0]), t[0] / t[1] - sx,
                                   slx + sly - digamma(t[2])};
      };
      init = {clamp_pos(sx * sx / var, lim, lim.max_positive),
              clamp_pos(sx / var, lim, lim.max_positive), clamp_pos(sxy, lim, lim.max_positive)};
      break;
    }
    case Family::VonMises: {
      const double c = wmean([&](auto i) { return std::cos(x(i)); });
      const double s = wmean([&](auto i) { return std::sin(x(i)); });
      pb.positive = {false, true};
      pb.lo = {0.0, lo};
      pb.hi = {0.0, std::log(lim.max_kappa)};
      pb.value = [=](const std::vector<double>& t) {
        return t[1] * (c * std::cos(t[0]) + s * std::sin(t[0])) - kLog2Pi -
               numerics::log_bessel_i(0, t[1]);
      };
      pb.gradient = [=](const std::vector<double>& t) {
        return std::vector<double>{t[1] * (s * std::cos(t[0]) - c * std::sin(t[0])),
                                   c * std::cos(t[0]) + s * std::sin(t[0]) -
                                       numerics::bessel_ratio(t[1])};
      };
      init = {std::atan2(s, c),
              clamp_pos(kappa_from_resultant(std::hypot(c, s)), lim, lim.max_kappa)};
      break;
    }
    case Family::Beta: {
      const double slx = wmean([&](auto i) { return std::log(x(i)); });
      const double sl1x = wmean([&](auto i) { return std::log1p(-x(i)); });
      const double m = wmean(x);
      const double var = wmean([&](auto i) { return (x(i) - m) * (x(i) - m); });
      pb.positive = {true, true};
      pb.lo = {shape_lo, shape_lo};
      pb.hi = {hi, hi};
      pb.value = [=](const std::vector<double>& t) {
        return (t[0] - 1.0) * slx + (t[1] - 1.0) * sl1x - numerics::log_beta(t[0], t[1]);
      };
      pb.gradient = [=](const std::vector<double>& t) {
        const double both = digamma(t[0] + t[1]);
        return std::vector<double>{slx - digamma(t[0]) + both, sl1x - digamma(t[1]) + both};
      };
      double common = (var > 0.0) ? m * (1.0 - m) / var - 1.0 : lim.max_positive;
      if (!(common > 0.0)) common = 1e-2;
      init = {clamp_pos(m * common, lim, lim.max_positive),
              clamp_pos((1.0 - m) * common, lim, lim.max_positive)};
      break;
    }
    case Family::Gaussian:
      break;
  }

  std::vector<double> from = init;
  if (start != nullptr) {
    auto warm = to_vector(*start);
    if (family_of(*start) == f && pb.value(warm) > pb.value(init)) from = warm;
  }
  std::vector<double> theta = gradient_ascent(pb, from, opts.grad_tol, opts.max_iter);
  if (start != nullptr && family_of(*start) == f) {
    auto old = to_vector(*start);
    if (pb.value(old) > pb.value(theta)) theta = old;
  }
  return from_vector(f, theta, dim);
}

}  // namespace cloudlayer::mixtures
