#include <cmath>
#include <vector>

#include "doctest.h"
#include "support.hpp"

#include "cloudlayer/mixtures.hpp"
#include "cloudlayer/selection.hpp"

using namespace cloudlayer;
using namespace cloudlayer::selection;
using mixtures::Component;
using mixtures::Family;
using mixtures::Feature;
using mixtures::MixtureSpec;

namespace {

MixtureSpec spec_of(std::size_t clusters, std::vector<Component> comps) {
  MixtureSpec s;
  s.clusters = clusters;
  s.components = std::move(comps);
  return s;
}

std::array<MetricReport, 2> reports_for(const std::vector<double>& v) {
  auto data = mixtures::single_component(v);
  std::array<MetricReport, 2> out;
  for (std::size_t L = 1; L <= 2; ++L) {
    auto spec = spec_of(L, {Component{{Feature::Kelvin}, Family::Gaussian}});
    mixtures::FitOptions opts;
    opts.seed = 17;
    out[L - 1] = metrics(mixtures::fit(data, spec, opts), data);
  }
  return out;
}

}  // namespace

TEST_CASE("parameter counts") {
  CHECK(parameter_count(spec_of(2, {Component{{Feature::Kelvin}, Family::Gaussian}})) == 5);
  CHECK(parameter_count(spec_of(1, {Component{{Feature::BetaT}, Family::Beta}})) == 2);
  CHECK(parameter_count(spec_of(2, {Component{{Feature::BetaT}, Family::Beta},
                                    Component{{Feature::U, Feature::V}, Family::Gaussian}})) == 15);
}

TEST_CASE("entropy") {
  CHECK(entropy(std::vector<double>{1, 0, 0, 1, 1, 0}) == 0.0);
  CHECK(entropy(std::vector<double>(20, 0.5)) == doctest::Approx(-6.9315).epsilon(1e-5));
  CHECK(entropy(std::vector<double>(7, 1.0)) == 0.0);
  testsupport::Rng rng(61);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> g;
    bool hard = true;
    for (int i = 0; i < 10; ++i) {
      const double a = rng.uniform(0, 1) < 0.3 ? 1.0 : rng.uniform(0, 1);
      hard = hard && (a == 1.0 || a == 0.0);
      g.push_back(a);
      g.push_back(1 - a);
    }
    const double h = entropy(g);
    CHECK(h <= 0.0);
    CHECK((h == 0.0) == hard);
  }
}

TEST_CASE("metric formulas") {
  auto r = make_report(-50, 2, 100, 0.0);
  CHECK(r.bic == doctest::Approx(109.2103).epsilon(1e-6));
  CHECK(r.aic == 104.0);
  CHECK(r.clc == 100.0);
  CHECK(r.icl == r.bic);
  auto s = make_report(-50, 2, 100, -3.0);
  CHECK(s.clc == 106.0);
  CHECK(s.icl == doctest::Approx(r.bic + 6.0));
  testsupport::Rng rng(62);
  for (int k = 0; k < 100; ++k) {
    const std::size_t lam = static_cast<std::size_t>(rng.integer(1, 20));
    const std::size_t n = static_cast<std::size_t>(rng.integer(10, 5000));
    auto m = make_report(rng.normal(-1000, 300), lam, n, -rng.uniform(0, 50));
    CHECK(m.bic - m.aic == doctest::Approx(lam * (std::log(double(n)) - 2)).epsilon(1e-12));
  }
}

TEST_CASE("select") {
  MetricReport a, b;
  a.bic = 110; b.bic = 95;
  CHECK(select(std::vector<MetricReport>{a, b}, Criterion::BIC) == 2);
  b.bic = 110;
  CHECK(select(std::vector<MetricReport>{a, b}, Criterion::BIC) == 1);
  a.log_q = -50; b.log_q = -40;
  CHECK(select(std::vector<MetricReport>{a, b}, Criterion::ML) == 2);
  b.log_q = -50;
  CHECK(select(std::vector<MetricReport>{a, b}, Criterion::ML) == 1);
}

TEST_CASE("combine adds factor reports") {
  auto a = make_report(-10, 2, 50, -1);
  auto b = make_report(-20, 3, 50, -2);
  auto c = combine(std::vector<MetricReport>{a, b});
  CHECK(c.lambda == 5);
  CHECK(c.log_q == -30);
  CHECK(c.entropy == -3);
  CHECK(c.bic == doctest::Approx(make_report(-30, 5, 50, -3).bic));
}

TEST_CASE("criteria agree on clear-cut data") {
  testsupport::Rng rng(63);
  std::vector<double> two(2000), one(2000);
  for (std::size_t i = 0; i < 2000; ++i) {
    two[i] = (i % 2 ? 5.0 : 0.0) + rng.normal();
    one[i] = rng.normal();
  }
  auto r2 = reports_for(two);
  auto r1 = reports_for(one);
  for (auto c : {Criterion::ML, Criterion::BIC, Criterion::AIC, Criterion::CLC, Criterion::ICL}) {
    CAPTURE(criterion_name(c));
    CHECK(select(r2, c) == 2);
    CHECK(select(r1, c) == 1);
  }
}
