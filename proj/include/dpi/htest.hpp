#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dpi/graph.hpp"
#include "dpi/mle.hpp"
#include "dpi/models.hpp"

namespace dpi::htest {

struct TestOutcome {
  double statistic = 0.0;
  double threshold = 0.0;  // reject iff statistic > threshold
  bool reject = false;
  double alpha = 0.0;
  std::string family;  // "caller" | "bootstrap" | "bootstrap-distributed" | "chi2_n" | "chi2_1"
  double p_value = std::nan("");
  int K = 0, T = 0;  // rounds/iterations actually run (0 for closed forms)
};

// ---------------------------------------------------------------------------
// Single-agent vs collective power (binary signals; alternative success
// probability p > 1/2, null 1 - p).

// Power of the most powerful level-alpha randomized test for a single agent
// holding one bit.
double individual_power_binary(double p, double alpha);

// Power of the exact-binomially-calibrated collective test on n
// randomized-response bits.
double rr_collective_power(int n, double p, double eps, double alpha);

struct CriticalBudget {
  double eps_star = 0.0;
  bool at_lower_edge = false, at_upper_edge = false;
};

// Smallest budget at which the RR collective test matches the best single
// agent; bisection on [1e-3, 10] to tol, edges flagged.
CriticalBudget critical_budget_rr(int n, double p, double alpha,
                                  double tol = 1e-4);

// Monte Carlo power of the collective test summing per-agent noisy
// log-likelihood ratios (Laplace scale 2|log p - log(1-p)| / eps). Common
// random numbers across eps, so curves and bisections are stable in the seed.
double laplace_sum_test_power(int n, double p, double eps, double alpha,
                              int mc, std::uint64_t seed);
CriticalBudget critical_budget_laplace(int n, double p, double alpha, int mc,
                                       std::uint64_t seed, double tol = 1e-4);

struct PowerCurve {
  std::vector<double> eps;
  std::vector<double> rr_power, laplace_power;
  double individual_power = 0.0;
  CriticalBudget eps_star_rr, eps_star_laplace;
  int n = 0;
  double p = 0.0, alpha = 0.0;
  int mc = 0;
  std::uint64_t seed = 0;  // recorded: the Monte Carlo stream is part of the result
};
PowerCurve power_curve(int n, double p, double alpha,
                       const std::vector<double>& eps_grid, int mc,
                       std::uint64_t seed);

// ---------------------------------------------------------------------------
// Distributed tests on the belief-exchange pipeline.

// Exact centralized critical value for the binary-signal simple test:
// the least conservative rho with P[2*Lambda > rho | null] <= level.
double binary_simple_rho_c(const std::vector<int>& signals_per_agent, double p,
                           double level);

struct SimpleTestConfig {
  double alpha = 0.05;
  // Centralized critical value at level alpha/2. NaN: derive by parametric
  // bootstrap of 2*Lambda under the null.
  double rho_c = std::nan("");
  int bootstrap_mc = 2000;
  // Bootstrap the full private statistic instead (empirical 1-alpha quantile,
  // no unit slack). Calibrated at any eps, unlike the rho_c - 1 route whose
  // level holds above min_epsilon_for_test_validity.
  bool bootstrap_distributed = false;
  std::uint64_t seed = 1;
  std::uint64_t rep = 0;
};

// Simple null vs simple alternative (state space must have exactly two
// states: index 0 = null, 1 = alternative). Runs the geometric-mean
// aggregation with type-I budget alpha/2 and unit threshold exponent;
// statistic (n / 2^{T-1}) * log(nu_gm(theta1) / nu_gm(theta0)) at agent 0.
TestOutcome distributed_simple_test(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data, const graph::Network& net,
    const models::StateSpace& space, double eps, const SimpleTestConfig& cfg);

struct CompositeTestConfig {
  double alpha = 0.05;
  double b_theta = 1.0;
  double b_x = 1.0;
  double ridge = 0.05;
  std::uint64_t seed = 1;
  std::uint64_t rep = 0;
};

// Composite alternative on per-center survival data: each center fits its
// clamped ridge MLE, the network aggregates the per-center generalized
// likelihood ratios over a binary (null sup, alternative sup) space, and the
// statistic is compared against the chi-square(n) quantile at 1 - alpha/2
// minus the unit consensus slack. Wilks asymptotics; level additionally
// requires eps >= min_epsilon_for_test_validity.
TestOutcome distributed_composite_test(
    const std::vector<models::SurvData>& centers, const graph::Network& net,
    double eps, const CompositeTestConfig& cfg);

// Pooled single-coefficient fit, chi-square(1) threshold at 1 - alpha.
TestOutcome centralized_composite_test(
    const std::vector<models::SurvData>& centers, double alpha, double b_theta,
    double ridge = 0.05);

// Budget floor for the chi-square-threshold tests: total belief noise stays
// within the unit slack w.p. 1 - alpha/2 (Chebyshev), i.e.
// eps >= delta * |Theta| * sqrt(32 n K / alpha).
double min_epsilon_for_test_validity(double delta, int n_states, int n, int K,
                                     double alpha);

// ---------------------------------------------------------------------------
// Communication complexity.

struct LowerBound {
  double kt = 0.0;       // lower bound on rounds x iterations
  bool unbounded = false;  // zero privatized information: no finite protocol
  int t_min = 0;         // iterations must span the diameter
};

// kl_private: per-agent KL between the privatized local observation laws
// under the two hypotheses (whole local dataset).
LowerBound communication_lower_bound(const std::vector<double>& kl_private,
                                     double alpha, double beta, int diam);

// Exact per-bit KL through randomized response for the Be(1/2) vs
// Be(1/2 + gap/2) pair.
double rr_privatized_kl(double gap, double eps);

// Closed-form randomized-response bound:
// (2 |1-alpha-beta| / gap^2) * ((e^eps + 1)/(e^eps - 1))^2 * diam / n.
double rr_lower_bound_closed_form(double gap, double alpha, double beta,
                                  double eps, int diam, int n);

}  // namespace dpi::htest
