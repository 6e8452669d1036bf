#pragma once

#include <array>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cloudlayer/families.hpp"
#include "cloudlayer/flow.hpp"
#include "cloudlayer/mixtures.hpp"
#include "cloudlayer/numerics.hpp"
#include "support.hpp"

namespace testsupport {

// Ordinary least squares on the stacked window rows [Ix Iy] v = 0.5 It,
// solved through explicit normal equations (design matrix built row by row).
inline Eigen::Vector2d brute_force_lk(const cloudlayer::flow::DerivativeStack& d, std::size_t i,
                                      std::size_t j, int half) {
  std::vector<std::array<double, 3>> rows;
  const long m = static_cast<long>(d.rows()), n = static_cast<long>(d.cols());
  for (long a = static_cast<long>(i) - half; a <= static_cast<long>(i) + half; ++a)
    for (long b = static_cast<long>(j) - half; b <= static_cast<long>(j) + half; ++b)
      if (a >= 0 && a < m && b >= 0 && b < n)
        rows.push_back({d.ix(a, b), d.iy(a, b), cloudlayer::flow::kTargetGain * d.it(a, b)});
  Eigen::MatrixXd x(rows.size(), 2);
  Eigen::VectorXd y(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    x(r, 0) = rows[r][0];
    x(r, 1) = rows[r][1];
    y(r) = rows[r][2];
  }
  const Eigen::Matrix2d a = x.transpose() * x;
  const Eigen::Vector2d b = x.transpose() * y;
  return a.ldlt().solve(b);
}

struct FamilyPoint {
  cloudlayer::mixtures::FamilyParams params;
  std::vector<double> x;
};

// Random parameters in the interior of the family's domain and a sample
// drawn from (or inside the support of) the resulting density.
inline FamilyPoint random_point(cloudlayer::mixtures::Family f, Rng& rng) {
  using namespace cloudlayer::mixtures;
  switch (f) {
    case Family::Gamma: {
      GammaParams p{rng.log_uniform(0.5, 20), rng.log_uniform(0.1, 10)};
      return {p, {std::max(1e-3, rng.gamma(p.alpha, p.beta))}};
    }
    case Family::BivariateGamma: {
      BivariateGammaParams p{rng.log_uniform(0.5, 10), rng.log_uniform(0.1, 5), rng.log_uniform(0.5, 10)};
      const double x = std::max(1e-3, rng.gamma(p.alpha, 1 / p.beta));
      return {p, {x, std::max(1e-3, rng.gamma(p.a, 1 / x))}};
    }
    case Family::VonMises: {
      VonMisesParams p{rng.uniform(-M_PI, M_PI), rng.log_uniform(0.05, 100)};
      return {p, {rng.uniform(-M_PI, M_PI)}};
    }
    case Family::Beta: {
      BetaParams p{rng.log_uniform(0.5, 20), rng.log_uniform(0.5, 20)};
      return {p, {rng.uniform(0.01, 0.99)}};
    }
    case Family::Gaussian: {
      const std::size_t d = static_cast<std::size_t>(rng.integer(1, 3));
      GaussianParams p;
      p.mean = Eigen::VectorXd(d);
      Eigen::MatrixXd a(d, d);
      std::vector<double> x(d);
      for (std::size_t i = 0; i < d; ++i) {
        p.mean(i) = rng.normal(0, 3);
        x[i] = rng.normal(0, 3);
        for (std::size_t j = 0; j < d; ++j) a(i, j) = rng.normal();
      }
      p.cov = a * a.transpose() + Eigen::MatrixXd::Identity(d, d);
      return {p, x};
    }
  }
  return {};
}

// Largest componentwise |analytic - fd| / max(|analytic|, |fd|, 1e-3).
inline double gradient_rel_error(const FamilyPoint& pt, double h) {
  using namespace cloudlayer::mixtures;
  const Family f = family_of(pt.params);
  const auto theta = to_vector(pt.params);
  const std::size_t dim = pt.x.size();
  auto analytic = log_pdf_gradient(pt.params, pt.x);
  // Gaussian gradients cover the mean only.
  const std::size_t k = f == Family::Gaussian ? dim : theta.size();
  auto fn = [&](std::span<const double> t) {
    std::vector<double> full(theta);
    std::copy(t.begin(), t.end(), full.begin());
    return log_pdf(from_vector(f, full, dim), pt.x);
  };
  auto fd = cloudlayer::numerics::finite_diff_gradient(
      fn, std::span<const double>(theta.data(), k), h);
  double worst = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double den = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-3});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / den);
  }
  return worst;
}

// Samples from an L-cluster mixture of one family with well-spread random
// parameters; used by the EM ascent property.
inline cloudlayer::mixtures::MixtureData random_mixture_data(cloudlayer::mixtures::Family f,
                                                             std::size_t n, Rng& rng,
                                                             std::size_t& dim) {
  using namespace cloudlayer::mixtures;
  std::vector<double> values;
  dim = f == Family::BivariateGamma ? 2 : (f == Family::Gaussian ? 2 : 1);
  const double split = rng.uniform(0.2, 0.8);
  for (int c = 0; c < 2; ++c) {
    const std::size_t count = c == 0 ? static_cast<std::size_t>(split * n) : n - static_cast<std::size_t>(split * n);
    const double a = rng.log_uniform(1, 30), b = rng.log_uniform(1, 30);
    const double mu = rng.uniform(-M_PI, M_PI), kappa = rng.log_uniform(0.5, 30);
    const double mx = rng.normal(0, 4), my = rng.normal(0, 4);
    for (std::size_t i = 0; i < count; ++i) {
      switch (f) {
        case Family::Gamma: values.push_back(std::max(1e-6, rng.gamma(a, 1 / std::sqrt(b)))); break;
        case Family::BivariateGamma: {
          const double x = std::max(1e-6, rng.gamma(a, 0.2));
          values.push_back(x);
          values.push_back(std::max(1e-6, rng.gamma(b, 1 / x)));
          break;
        }
        case Family::VonMises: {
          double x = mu + rng.normal(0, 1 / std::sqrt(kappa));
          x = std::remainder(x, 2 * M_PI);
          values.push_back(x);
          break;
        }
        case Family::Beta: {
          const double g1 = rng.gamma(a, 1), g2 = rng.gamma(b, 1);
          values.push_back(std::clamp(g1 / (g1 + g2), 1e-6, 1 - 1e-6));
          break;
        }
        case Family::Gaussian:
          values.push_back(mx + rng.normal(0, 1.5));
          values.push_back(my + rng.normal(0, 1.0));
          break;
      }
    }
  }
  return single_component(std::move(values), dim);
}

}  // namespace testsupport
