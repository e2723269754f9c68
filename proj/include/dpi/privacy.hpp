#pragma once

#include <cstdint>
#include <functional>

#include "dpi/models.hpp"
#include "dpi/rng.hpp"

namespace dpi::privacy {

// Total epsilon with a composition split: every released value consumes
// epsilon / splits. The batch algorithms release one noisy log-likelihood per
// (round, state), so splits = K * |Theta|; the streaming algorithm releases
// per state each step with fresh data, so splits = |Theta|.
struct PrivacyBudget {
  double epsilon = 1.0;
  int splits = 1;
  double per_release() const { return epsilon / splits; }
};

struct LaplaceNoise {
  double scale = 0.0;  // Lap(scale); standard deviation sqrt(2) * scale
  double stddev() const;
};

// scale = sensitivity / per-release budget = sensitivity * splits / epsilon.
LaplaceNoise laplace_for(const PrivacyBudget& budget, double sensitivity);

double laplace_sample(double scale, rng::Rng& g);

// Flip probability of the randomized-response channel: 1 / (1 + e^eps).
double rr_flip_prob(double eps);
int randomized_response(int bit, double eps, rng::Rng& g);

// Empirical differential-privacy smoke check: histogram a mechanism's output
// on two adjacent inputs and require |log ratio| <= eps + slack on every bin
// where both sides have enough mass; slack is a 3-sigma multinomial allowance.
struct RatioCheck {
  bool pass = false;
  double worst_log_ratio = 0.0;
  int worst_bin = -1;
  bool inconclusive = false;  // no bin reached the minimum count
};
RatioCheck dp_ratio_check(const std::function<double(rng::Rng&)>& mech_a,
                          const std::function<double(rng::Rng&)>& mech_b,
                          double eps, int trials, int bins, double lo,
                          double hi, std::uint64_t seed);

// Exact channel check for randomized response (no sampling).
RatioCheck rr_ratio_check(double eps);

// One-record sensitivity bound of the partial log-likelihood: 2 b_theta b_x.
double cox_sensitivity(double b_theta, double b_x);

// Max |log-likelihood change at theta| over random one-record perturbations
// (replacements drawn from the model, plus targeted covariate/bit flips).
double empirical_sensitivity(const models::SignalModel& model,
                             const models::AgentData& data, double theta,
                             int perturbations, rng::Rng& g);

}  // namespace dpi::privacy
