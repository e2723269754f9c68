#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dpi/graph.hpp"
#include "dpi/models.hpp"

namespace dpi::mle {

// Frequency-vote (two-threshold) parameters. q1 / q2 are the belief-cutoff
// crossing probabilities being tested against for non-optimal / optimal
// states; pi1 / pi2 are the multiplicative margins. In single-threshold mode
// pi1 is derived from (q1, q2, pi2) so both votes share one frequency
// threshold (requires q2 > q1).
struct ThresholdParams {
  double q1 = 0.25, q2 = 0.75;
  double pi1 = 0.5, pi2 = 0.5;
  bool single = false;
};

// Manual overrides for experimentation. Overriding K or the noise scale keeps
// the privacy split consistent with the K actually run, but the statistical
// guarantees only cover the derived values.
struct ScheduleOverrides {
  std::optional<int> K, T;
  std::optional<double> noise_scale, rho_am, rho_gm, rho_thr1, rho_thr2;
};

struct MleSchedule {
  int K = 1, T = 1;
  double noise_scale = 0.0;  // per-(round, state) Laplace scale

  // Log-ratio thresholds with belief-space cutoffs tau = 1/(1 + e^rho).
  double rho_am = 0, rho_gm = 0;
  double tau_am = 0, tau_gm = 0;
  double log_tau_am = 0, log_tau_gm = 0;

  bool with_threshold = false;
  bool single_threshold = false;
  double q1 = 0, q2 = 0, pi1 = 0, pi2 = 0;
  double rho_thr1 = 0, rho_thr2 = 0;
  double tau_hat1 = 0, tau_hat2 = 0;          // belief cutoffs
  double log_tau_hat1 = 0, log_tau_hat2 = 0;
  double tau_thr1 = 0, tau_thr2 = 0;          // round-fraction thresholds

  // Diagnostics.
  double a_star = 0, V = 0;
  int K_am = 1, K_gm = 1, K_thr1 = 1, K_thr2 = 1;
  models::Constants constants;
};

// Derive (K, T, noise scale, thresholds) from the instance constants. When
// theta_star_size is unknown (<= 0) the |Theta| bound is used and the
// subset/superset guarantees hold jointly. Thresholds default to the
// closed-form optimizers that equalize the two T lower bounds.
MleSchedule compute_mle_schedule(double eps, double alpha, double beta,
                                 const models::Constants& c,
                                 const graph::Network& net, int n_states,
                                 int theta_star_size,
                                 bool with_threshold = false,
                                 const ThresholdParams& thr = {},
                                 const ScheduleOverrides& ov = {});

// K-round belief dynamics shared by all batch estimators. Round k perturbs
// the realized log-likelihoods log_gamma (n x S) with one Laplace draw per
// (agent, state), then iterates T log-linear lazy-consensus steps whose
// exponents (I + A) sum to 2 per agent. Log-beliefs are renormalized every
// step; max_lse_dev records the largest |logsumexp| seen right after
// renormalization (the numerical-stability invariant).
struct RoundsResult {
  std::vector<Eigen::MatrixXd> terminal;           // K matrices, n x S
  std::vector<std::vector<Eigen::MatrixXd>> traj;  // K x (T+1) when recorded
  double max_lse_dev = 0.0;
};

RoundsResult run_belief_rounds(const Eigen::MatrixXd& log_gamma,
                               const graph::Network& net, int K, int T,
                               double noise_scale, std::uint64_t seed,
                               std::uint64_t rep, bool record_traj = false);

// Same dynamics from caller-provided per-round initial log-beliefs (used by
// the hypothesis tests, which build their own likelihood columns).
RoundsResult run_belief_rounds_from_init(std::vector<Eigen::MatrixXd> init,
                                         const graph::Network& net, int T,
                                         bool record_traj = false);

struct MleOptions {
  std::uint64_t seed = 1;
  std::uint64_t rep = 0;
  bool record_traj = false;
};

struct MleResult {
  // Per-agent output sets of state indices, ascending.
  std::vector<std::vector<int>> am_set, gm_set, thr_set1, thr_set2;
  Eigen::MatrixXd log_nu_am, log_nu_gm;  // n x S aggregated log-beliefs
  Eigen::MatrixXd freq1, freq2;          // n x S round-win fractions
  Eigen::MatrixXd log_gamma;             // realized n x S log-likelihoods
  RoundsResult rounds;
  double max_lse_dev = 0.0;
};

// Run the scheduled rounds on the caller's datasets and aggregate the
// arithmetic and geometric means (and the threshold votes if scheduled).
MleResult run_mle_am_gm(const std::vector<const models::SignalModel*>& models,
                        const std::vector<models::AgentData>& data,
                        const graph::Network& net,
                        const models::StateSpace& space,
                        const MleSchedule& sched, const MleOptions& opt = {});

// Same rounds; requires a schedule built with with_threshold = true.
MleResult run_mle_two_threshold(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data, const graph::Network& net,
    const models::StateSpace& space, const MleSchedule& sched,
    const MleOptions& opt = {});

// Non-private variant: a single noiseless round. The output set uses the
// belief cutoff 1/(1 + e^rho); rho defaults to log(S + 1) so that tied
// argmax states always clear it.
MleResult run_mle_nonprivate(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data, const graph::Network& net,
    const models::StateSpace& space, int T, double rho = -1.0,
    bool record_traj = false);

// Centralized argmax of the pooled log-likelihood, with a relative tie
// tolerance. The reference the distributed estimators are measured against.
std::vector<int> centralized_mle_set(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data,
    const models::StateSpace& space, double rel_tol = 1e-9);

// Smallest pooled log-likelihood gap separating the argmax set from the
// remaining states (infinity when no state is excluded).
double realized_min_gap(const std::vector<const models::SignalModel*>& models,
                        const std::vector<models::AgentData>& data,
                        const models::StateSpace& space);

// Whether a shared single threshold can separate optimal from non-optimal
// states when |Theta*| = f_star * |Theta|, in the asymptotic vote regime.
bool separability_check(int n_states, double f_star);

}  // namespace dpi::mle
