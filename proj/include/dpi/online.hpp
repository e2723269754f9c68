#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpi/graph.hpp"
#include "dpi/models.hpp"

namespace dpi::online {

// Signal arrivals for the streaming algorithm. Deterministic arrivals deliver
// round(xi_i) signals per step (zero arrival variance); Poisson arrivals have
// mean and variance xi_i.
struct StreamConfig {
  std::vector<double> xi;
  bool poisson = false;
  int theta_true_idx = 0;
  int horizon = 0;  // 0: run to the schedule's T
};

struct OnlineSchedule {
  int T = 1;
  double noise_scale = 0.0;  // per-(step, state) Laplace scale, Delta |Theta| / eps
  double rho = 0.0;          // log |Theta|
  double eta = 0.0;
  // Diagnostics.
  double V = 0.0, V_prime = 0.0, Xi = 0.0, b_star = 0.0;
  models::Constants constants;
};

// Horizon, noise scale and confidence margin for the streaming update. The
// chain must mix (slem of the weight matrix < 1), otherwise ConfigError.
OnlineSchedule compute_online_schedule(double eps, double eta,
                                       const models::Constants& c,
                                       const std::vector<double>& xi,
                                       bool poisson,
                                       const graph::Network& net,
                                       int n_states);

struct OnlineResult {
  Eigen::MatrixXd log_nu;               // n x S terminal log-beliefs
  Eigen::MatrixXd avg_ratio;            // n x S: psi_{i,T}(s, truth) / T
  std::vector<int> argmax;              // per agent
  bool all_correct = false;
  std::vector<Eigen::MatrixXd> traj;    // per step when recorded
  double max_lse_dev = 0.0;
};

// Streaming update: each step every agent scores its fresh signals, adds one
// Laplace draw per state, and mixes log-beliefs with weights A (exponents sum
// to 1). Beliefs start from the first noisy scores. Fresh noise every step.
OnlineResult run_online(const std::vector<const models::SignalModel*>& models,
                        const StreamConfig& stream, const graph::Network& net,
                        const models::StateSpace& space,
                        const OnlineSchedule& sched, std::uint64_t seed,
                        std::uint64_t rep, bool record_traj = false);

// Noise-free variant on the same signal streams: bit-for-bit equal to
// run_online with noise_scale == 0.
OnlineResult run_online_nonprivate(
    const std::vector<const models::SignalModel*>& models,
    const StreamConfig& stream, const graph::Network& net,
    const models::StateSpace& space, const OnlineSchedule& sched,
    std::uint64_t seed, std::uint64_t rep, bool record_traj = false);

}  // namespace dpi::online
