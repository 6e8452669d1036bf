#include "cloudlayer/hmm.hpp"

#include <limits>

#include "cloudlayer/errors.hpp"

namespace cloudlayer::hmm {

HmmState initial_state(double beta, int l0) {
  if (l0 != 1 && l0 != 2) throw InputError("initial layer count must be 1 or 2");
  if (!(beta >= 0.0)) throw InputError("beta must be nonnegative");
  HmmState s;
  s.previous_l = l0;
  s.beta = beta;
  return s;
}

double psi(int l_t, int l_prev, double beta) { return l_t == l_prev ? -beta : beta; }

HypothesisScore score(int l, double posterior_sum, const HmmState& state) {
  HypothesisScore s;
  s.l = l;
  s.posterior_sum = posterior_sum;
  s.psi = psi(l, state.previous_l, state.beta);
  s.total = posterior_sum - s.psi;
  return s;
}

HypothesisScore score_hypothesis(const mixtures::MixtureFit& fit, const HmmState& state) {
  return score(static_cast<int>(fit.clusters()), fit.q, state);
}

HypothesisScore failed_hypothesis(int l, const HmmState& state) {
  HypothesisScore s;
  s.l = l;
  s.psi = psi(l, state.previous_l, state.beta);
  s.posterior_sum = -std::numeric_limits<double>::infinity();
  s.total = -std::numeric_limits<double>::infinity();
  s.failed = true;
  return s;
}

int step(const std::array<HypothesisScore, 2>& scores, std::size_t t, HmmState& state) {
  // total_2 > total_1  <=>  sum_2 - sum_1 > psi_2 - psi_1 (0 or ±2β, exact).
  const double advantage = scores[1].posterior_sum - scores[0].posterior_sum;
  const double margin = scores[1].psi - scores[0].psi;
  int chosen = state.previous_l;
  if (advantage > margin)
    chosen = 2;
  else if (advantage < margin)
    chosen = 1;
  state.history.push_back(Step{t, chosen, scores});
  state.previous_l = chosen;
  return chosen;
}

}  // namespace cloudlayer::hmm
