#include "cloudlayer/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::numerics {
namespace {

constexpr double kEulerGamma = 0.57721566490153286061;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw DomainError(std::string(fn) + ": argument must be finite and > 0, got " +
                      std::to_string(x));
  }
}

// zeta(k) - 1 for k = 2..kZetaTerms+1, by direct summation plus an
// Euler-Maclaurin tail.
constexpr int kZetaTerms = 40;

const std::array<double, kZetaTerms>& zeta_minus_one() {
  static const std::array<double, kZetaTerms> table = [] {
    std::array<double, kZetaTerms> t{};
    constexpr double n_cut = 64.0;
    for (int idx = 0; idx < kZetaTerms; ++idx) {
      const double s = idx + 2.0;
      double tail = std::pow(n_cut, 1.0 - s) / (s - 1.0) + 0.5 * std::pow(n_cut, -s) +
                    s * std::pow(n_cut, -s - 1.0) / 12.0 -
                    s * (s + 1.0) * (s + 2.0) * std::pow(n_cut, -s - 3.0) / 720.0 +
                    s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) *
                        std::pow(n_cut, -s - 5.0) / 30240.0;
      double sum = tail;
      for (int n = static_cast<int>(n_cut) - 1; n >= 2; --n) sum += std::pow(n, -s);
      t[idx] = sum;
    }
    return t;
  }();
  return table;
}

// ln Γ(1 + z) for |z| <= 0.5 from the zeta series; exact near the roots at 1 and 2.
double log_gamma_1p(double z) {
  const auto& zm1 = zeta_minus_one();
  double acc = 0.0;
  double zk = z * z;
  for (int idx = 0; idx < kZetaTerms; ++idx) {
    const int k = idx + 2;
    const double term = zm1[idx] * zk / k;
    acc += (k % 2 == 0) ? term : -term;
    zk *= z;
  }
  return -std::log1p(z) + z * (1.0 - kEulerGamma) + acc;
}

// Lanczos, g = 7, n = 9.
double log_gamma_lanczos(double x) {
  static constexpr std::array<double, 9> c = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  const double xm1 = x - 1.0;
  double series = c[0];
  for (int i = 1; i < 9; ++i) series += c[i] / (xm1 + i);
  const double t = xm1 + 7.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (xm1 + 0.5) * std::log(t) - t +
         std::log(series);
}

// Power series of I_nu, nu in {0, 1}, without its leading term.
double bessel_series_tail(int order, double kappa, int max_terms) {
  const double q = 0.25 * kappa * kappa;
  const double head = (order == 0) ? 1.0 : 0.5 * kappa;
  double term = head;
  double tail = 0.0;
  for (int n = 1; n < max_terms; ++n) {
    term *= q / (static_cast<double>(n) * (n + order));
    tail += term;
    if (term < (head + tail) * 1e-17) break;
  }
  return tail;
}

double bessel_series(int order, double kappa, int max_terms) {
  const double head = (order == 0) ? 1.0 : 0.5 * kappa;
  return head + bessel_series_tail(order, kappa, max_terms);
}

// Σ_k (-1)^k a_k(nu) / kappa^k of the large-argument expansion
// I_nu(kappa) ~ e^kappa / sqrt(2 pi kappa) * sum.
double bessel_asymptotic_sum(int order, double kappa) {
  const double mu = 4.0 * order * order;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (k * 8.0 * kappa);
    if (std::abs(next) >= std::abs(term)) break;
    term = next;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

constexpr double kSeriesLimit = 30.0;
constexpr double kRatioLogLimit = 50.0;

void check_order(int order) {
  if (order != 0 && order != 1) throw DomainError("bessel_i: order must be 0 or 1");
}

}  // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma");
  if (x < 0.5) return log_gamma(x + 1.0) - std::log(x);
  if (x < 1.5) return log_gamma_1p(x - 1.0);
  if (x < 2.5) {
    const double z = x - 2.0;
    return log_gamma_1p(z) + std::log1p(z);
  }
  return log_gamma_lanczos(x);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli tail: -Σ B_2k / (2k x^2k)
  const double tail =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
  return acc + std::log(x) - 0.5 * inv - tail;
}

double bessel_i(int order, double kappa, const SpecialFnConfig& cfg) {
  check_order(order);
  require_positive(kappa, "bessel_i");
  if (kappa <= kSeriesLimit) return bessel_series(order, kappa, cfg.series_terms);
  return std::exp(log_bessel_i(order, kappa, cfg));
}

double log_bessel_i(int order, double kappa, const SpecialFnConfig& cfg) {
  check_order(order);
  require_positive(kappa, "log_bessel_i");
  if (kappa <= kSeriesLimit) {
    if (order == 0) return std::log1p(bessel_series_tail(0, kappa, cfg.series_terms));
    return std::log(bessel_series(order, kappa, cfg.series_terms));
  }
  return kappa - 0.5 * std::log(2.0 * std::numbers::pi * kappa) +
         std::log(bessel_asymptotic_sum(order, kappa));
}

double bessel_ratio(double kappa, const SpecialFnConfig& cfg) {
  require_positive(kappa, "bessel_ratio");
  if (kappa <= kSeriesLimit) {
    return bessel_series(1, kappa, cfg.series_terms) / bessel_series(0, kappa, cfg.series_terms);
  }
  if (kappa <= kRatioLogLimit) {
    return bessel_asymptotic_sum(1, kappa) / bessel_asymptotic_sum(0, kappa);
  }
  return std::exp(std::log(bessel_asymptotic_sum(1, kappa)) -
                  std::log(bessel_asymptotic_sum(0, kappa)));
}

double log_beta(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double log_sum_exp(std::span<const double> v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

std::vector<double> finite_diff_gradient(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> x, double h) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace cloudlayer::numerics
