#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "dpi/graph.hpp"
#include "dpi/models.hpp"

namespace dpi::baselines {

// Privatized first-order consensus on the Cox partial-likelihood score: each
// step averages neighbor iterates, takes one clipped gradient step on the
// local partial log-likelihood, and adds Laplace noise scaled for T releases
// of a gradient with per-record sensitivity 2 * b_theta * b_x.
struct FirstOrderConfig {
  double eta_lr = 0.001;
  int T = 100;
  double b_theta = 1.0;
  double b_x = 1.0;
  double eps = 1.0;
};

struct FirstOrderResult {
  Eigen::VectorXd theta_final;            // per-agent iterate after T steps
  std::vector<double> p_values;           // per-agent chi^2_1 Wald-type p-value
  bool diverged = false;                  // any iterate clamped at 10 * b_theta
  std::vector<Eigen::VectorXd> traj;      // T+1 iterates when recorded
  double noise_scale = 0.0;
};

FirstOrderResult run_first_order(const std::vector<models::SurvData>& data,
                                 const graph::Network& net,
                                 const FirstOrderConfig& cfg,
                                 std::uint64_t seed, std::uint64_t rep = 0,
                                 bool record_traj = false);

}  // namespace dpi::baselines
