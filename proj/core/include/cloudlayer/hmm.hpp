#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "cloudlayer/mixtures.hpp"

namespace cloudlayer::hmm {

struct HypothesisScore {
  int l = 1;
  double posterior_sum = 0;
  double psi = 0;
  double total = 0;  // posterior_sum - psi; -inf when the fit failed
  bool failed = false;
};

struct Step {
  std::size_t t = 0;
  int chosen = 1;
  std::array<HypothesisScore, 2> scores{};
};

struct HmmState {
  int previous_l = 1;
  double beta = 0.0;
  std::vector<Step> history;
};

HmmState initial_state(double beta, int l0 = 1);

/// -β when the layer count is unchanged, +β otherwise.
double psi(int l_t, int l_prev, double beta);

/// Scores a hypothesis from its (possibly summed over factors) complete-data
/// objective Σ γ [log π + log p] + log Dir(π | α).
HypothesisScore score(int l, double posterior_sum, const HmmState& state);
HypothesisScore score_hypothesis(const mixtures::MixtureFit& fit, const HmmState& state);
HypothesisScore failed_hypothesis(int l, const HmmState& state);

/// Picks the larger total (ties keep the previous state), records it and
/// advances the state. scores[0] is L = 1, scores[1] is L = 2.
int step(const std::array<HypothesisScore, 2>& scores, std::size_t t, HmmState& state);

}  // namespace cloudlayer::hmm
