#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "support.hpp"

#include "cloudlayer/errors.hpp"
#include "cloudlayer/mixtures.hpp"

using namespace cloudlayer;
using namespace cloudlayer::mixtures;

namespace {

MixtureSpec one_component(Family f, std::size_t clusters, std::size_t dim = 1) {
  MixtureSpec s;
  s.clusters = clusters;
  Component c;
  c.family = f;
  if (f == Family::BivariateGamma) c.features = {Feature::GammaT, Feature::R};
  else if (f == Family::VonMises) c.features = {Feature::Phi};
  else if (f == Family::Beta) c.features = {Feature::BetaT};
  else if (f == Family::Gamma) c.features = {Feature::GammaT};
  else if (dim == 1) c.features = {Feature::Kelvin};
  else if (dim == 2) c.features = {Feature::U, Feature::V};
  else c.features = {Feature::Kelvin, Feature::U, Feature::V};
  s.components.push_back(c);
  return s;
}

MixtureData two_gaussians(std::size_t n, double gap, std::uint64_t seed) {
  testsupport::Rng rng(seed);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = (i % 2 ? gap : 0.0) + rng.normal();
  return single_component(std::move(v));
}

}  // namespace

TEST_CASE("e_step examples") {
  SUBCASE("single cluster") {
    const std::vector<double> ll = {-1.0, -5.0, -2.0};
    auto e = e_step(ll, 3, std::vector<double>{1.0});
    for (double g : e.gamma) CHECK(g == 1.0);
    CHECK(e.log_likelihood == doctest::Approx(-8.0));
  }
  SUBCASE("identical clusters, equal weights") {
    const std::vector<double> ll = {-1, -1, -3, -3};
    auto e = e_step(ll, 2, std::vector<double>{0.5, 0.5});
    for (double g : e.gamma) CHECK(g == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("weights dominate equal likelihoods") {
    const std::vector<double> ll = {-2, -2, -7, -7};
    auto e = e_step(ll, 2, std::vector<double>{0.9, 0.1});
    CHECK(e.gamma[0] == doctest::Approx(0.9).epsilon(1e-14));
    CHECK(e.gamma[3] == doctest::Approx(0.1).epsilon(1e-14));
  }
  SUBCASE("zero likelihood rows are uniform and flagged") {
    const double ninf = -std::numeric_limits<double>::infinity();
    const std::vector<double> ll = {ninf, ninf, -1, -2};
    auto e = e_step(ll, 2, std::vector<double>{0.3, 0.7});
    CHECK(e.flagged_rows == 1);
    CHECK(e.gamma[0] == 0.5);
    CHECK(e.gamma[1] == 0.5);
  }
}

TEST_CASE("m_step_weights examples") {
  // Σγ = (6, 4) over N = 10
  std::vector<double> gamma;
  for (int i = 0; i < 10; ++i) {
    gamma.push_back(i < 6 ? 1.0 : 0.0);
    gamma.push_back(i < 6 ? 0.0 : 1.0);
  }
  auto ml = m_step_weights(gamma, 10, 2, std::vector<double>{1, 1});
  CHECK(ml[0] == 0.6);
  CHECK(ml[1] == 0.4);
  auto map = m_step_weights(gamma, 10, 2, std::vector<double>{2, 2});
  CHECK(map[0] == doctest::Approx(7.0 / 12).epsilon(1e-15));
  CHECK(map[1] == doctest::Approx(5.0 / 12).epsilon(1e-15));
  CHECK(m_step_weights(std::vector<double>(10, 1.0), 10, 1, std::vector<double>{3})[0] == 1.0);
}

TEST_CASE("flat Dirichlet prior gives the ML update bit for bit") {
  testsupport::Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.integer(2, 500));
    std::vector<double> ll(n * 2);
    for (auto& v : ll) v = rng.normal(-3, 4);
    const double p0 = rng.uniform(0.01, 0.99);
    auto e = e_step(ll, n, std::vector<double>{p0, 1 - p0});
    auto pi = m_step_weights(e.gamma, n, 2, std::vector<double>{1, 1});
    double s0 = 0, s1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s0 += e.gamma[2 * i];
      s1 += e.gamma[2 * i + 1];
    }
    CHECK(pi[0] == s0 / static_cast<double>(n));
    CHECK(pi[1] == s1 / static_cast<double>(n));
  }
}

TEST_CASE("log Dirichlet") {
  CHECK(log_dirichlet(std::vector<double>{1.0}, std::vector<double>{5.0}) == 0.0);
  // Dir(1, 1) is uniform on the simplex with density Γ(2) = 1
  CHECK(std::abs(log_dirichlet(std::vector<double>{0.3, 0.7}, std::vector<double>{1, 1})) < 1e-15);
  CHECK(log_dirichlet(std::vector<double>{0.5, 0.5}, std::vector<double>{2, 2}) ==
        doctest::Approx(std::log(6.0 * 0.25)).epsilon(1e-14));
}

TEST_CASE("two separated Gaussian clusters") {
  auto data = two_gaussians(2000, 10.0, 52);
  FitOptions opts;
  opts.seed = 3;
  auto f = fit(data, one_component(Family::Gaussian, 2), opts);
  auto means = cluster_means(f, data.components[0].values);
  auto r = resolve_labels(f, means);
  auto m0 = std::get<GaussianParams>(r.params[0][0]).mean(0);
  auto m1 = std::get<GaussianParams>(r.params[1][0]).mean(0);
  CHECK(std::abs(m0 - 10.0) < 0.15);
  CHECK(std::abs(m1 - 0.0) < 0.15);
  CHECK(r.weights[0] == doctest::Approx(0.5).epsilon(0.02));
  CHECK(f.converged);
}

TEST_CASE("single Gaussian cluster gives the sample mean") {
  testsupport::Rng rng(53);
  std::vector<double> v(777);
  double s = 0;
  for (auto& x : v) {
    x = rng.normal(270, 3);
    s += x;
  }
  auto f = fit(single_component(v), one_component(Family::Gaussian, 1), FitOptions{});
  CHECK(std::get<GaussianParams>(f.params[0][0]).mean(0) ==
        doctest::Approx(s / 777).epsilon(1e-14));
  CHECK(f.trace.size() == 2);
}

TEST_CASE("Beta fits on clamped data stay finite") {
  testsupport::Rng rng(54);
  std::vector<double> v(400);
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = i < 5 ? (i % 2 ? 1e-6 : 1 - 1e-6) : rng.uniform(0.2, 0.8);
  for (std::size_t L : {1, 2}) {
    auto f = fit(single_component(v), one_component(Family::Beta, L), FitOptions{});
    CHECK(std::isfinite(f.q));
    for (double t : f.trace) CHECK(std::isfinite(t));
  }
}

TEST_CASE("EM trace never decreases and stays on the simplex") {
  testsupport::Rng rng(55);
  for (auto f : {Family::Gamma, Family::BivariateGamma, Family::VonMises, Family::Beta, Family::Gaussian}) {
    for (int trial = 0; trial < 8; ++trial) {
      std::size_t dim = 1;
      auto data = testsupport::random_mixture_data(f, 300, rng, dim);
      auto spec = one_component(f, 2, dim);
      spec.dirichlet_alpha = {double(rng.integer(1, 5)), double(rng.integer(1, 5))};
      FitOptions opts;
      opts.seed = static_cast<std::uint64_t>(trial);
      opts.restarts = 1;
      auto res = fit(data, spec, opts);
      CAPTURE(family_name(f));
      for (std::size_t k = 1; k < res.trace.size(); ++k) CHECK(res.trace[k] >= res.trace[k - 1] - 1e-9);
      CHECK(std::abs(res.weights[0] + res.weights[1] - 1) <= 1e-12);
      for (std::size_t i = 0; i < res.n; ++i)
        CHECK(std::abs(res.responsibility(i, 0) + res.responsibility(i, 1) - 1) <= 1e-12);
    }
  }
}

TEST_CASE("composite log-likelihood is the sum of its components") {
  testsupport::Rng rng(56);
  const std::size_t n = 50;
  MixtureData data;
  data.n = n;
  ComponentData beta{1, {}}, vm{1, {}}, gauss{2, {}};
  for (std::size_t i = 0; i < n; ++i) {
    beta.values.push_back(rng.uniform(0.01, 0.99));
    vm.values.push_back(rng.uniform(-3, 3));
    gauss.values.push_back(rng.normal());
    gauss.values.push_back(rng.normal());
  }
  data.components = {beta, vm, gauss};
  GaussianParams g{Eigen::Vector2d(0.1, 0.2), Eigen::Matrix2d::Identity() * 2};
  ClusterParams params = {{BetaParams{2, 3}, VonMisesParams{0.5, 2}, g},
                          {BetaParams{5, 1.5}, VonMisesParams{-1, 7}, g}};
  auto ll = log_likelihood_matrix(data, params);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < 2; ++l) {
      const double expect = log_pdf(params[l][0], beta.row(i)) + log_pdf(params[l][1], vm.row(i)) +
                            log_pdf(params[l][2], gauss.row(i));
      CHECK(ll[i * 2 + l] == doctest::Approx(expect).epsilon(1e-13));
    }
}

TEST_CASE("resolve_labels") {
  auto data = two_gaussians(400, 30.0, 57);
  FitOptions opts;
  auto f = fit(data, one_component(Family::Gaussian, 2), opts);

  SUBCASE("sorts by decreasing mean and preserves the objective") {
    auto r = resolve_labels(f, std::vector<double>{250, 280});
    CHECK(r.weights[0] == f.weights[1]);
    CHECK(r.column(0) == f.column(1));
    CHECK(r.q == f.q);
    auto again = resolve_labels(r, std::vector<double>{280, 250});
    CHECK(again.column(0) == r.column(0));
    CHECK(again.q == r.q);
  }
  SUBCASE("ties go to the larger weight") {
    auto g = f;
    g.weights = {0.3, 0.7};
    auto r = resolve_labels(g, std::vector<double>{260, 260});
    CHECK(r.weights[0] == 0.7);
  }
  SUBCASE("single cluster is unchanged") {
    auto one = fit(data, one_component(Family::Gaussian, 1), opts);
    auto r = resolve_labels(one, std::vector<double>{270});
    CHECK(r.gamma == one.gamma);
  }
}

TEST_CASE("degenerate data fails with the family named") {
  auto data = single_component(std::vector<double>(20, 3.5));
  try {
    fit(data, one_component(Family::Gamma, 2), FitOptions{});
    FAIL("expected FitError");
  } catch (const FitError& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
}

TEST_CASE("spec validation") {
  auto s = one_component(Family::Beta, 3);
  CHECK_THROWS_AS(s.validate(), InputError);
  s = one_component(Family::Beta, 2);
  s.dirichlet_alpha = {0.5, 1};
  CHECK_THROWS_AS(s.validate(), InputError);
  s = one_component(Family::BivariateGamma, 2);
  s.components[0].features = {Feature::GammaT};
  CHECK_THROWS_AS(s.validate(), InputError);
}

TEST_CASE("fits are deterministic for a fixed seed") {
  auto data = two_gaussians(300, 3.0, 58);
  FitOptions opts;
  opts.seed = 9;
  auto a = fit(data, one_component(Family::Gaussian, 2), opts);
  auto b = fit(data, one_component(Family::Gaussian, 2), opts);
  CHECK(a.gamma == b.gamma);
  CHECK(a.trace == b.trace);
}
