#include "dpi/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "dpi/errors.hpp"
#include "dpi/rng.hpp"
#include "dpi/stats.hpp"

namespace dpi::baselines {

namespace {
constexpr std::uint64_t kFirstOrderTag = 0x666f2d6772;
}

FirstOrderResult run_first_order(const std::vector<models::SurvData>& data,
                                 const graph::Network& net,
                                 const FirstOrderConfig& cfg,
                                 std::uint64_t seed, std::uint64_t rep,
                                 bool record_traj) {
  const int n = net.n;
  if (static_cast<int>(data.size()) != n) {
    throw ConfigError("need one dataset per agent");
  }
  if (cfg.T < 1 || cfg.eta_lr < 0.0 || cfg.eps <= 0.0 || cfg.b_theta <= 0.0 ||
      cfg.b_x <= 0.0) {
    throw ConfigError("first-order baseline: bad configuration");
  }
  const double clip = 2.0 * cfg.b_theta * cfg.b_x;
  const double bound = 10.0 * cfg.b_theta;

  FirstOrderResult res;
  // T gradient releases share the budget, so each release's scale carries the
  // factor T.
  res.noise_scale = clip * cfg.T * cfg.eta_lr / cfg.eps;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  if (record_traj) res.traj.push_back(theta);
  for (int t = 1; t <= cfg.T; ++t) {
    Eigen::VectorXd mixed = net.weights * theta;
    for (int i = 0; i < n; ++i) {
      const double grad = std::clamp(models::cox_gradient(data[i], theta(i)),
                                     -clip, clip);
      auto g = rng::Rng::substream(
          seed, {kFirstOrderTag, rep, static_cast<std::uint64_t>(i),
                 static_cast<std::uint64_t>(t)});
      double next = mixed(i) + cfg.eta_lr * grad + g.laplace(res.noise_scale);
      if (std::fabs(next) > bound) {
        res.diverged = true;
        next = std::clamp(next, -bound, bound);
      }
      theta(i) = next;
    }
    if (record_traj) res.traj.push_back(theta);
  }

  res.theta_final = theta;
  res.p_values.resize(n);
  for (int i = 0; i < n; ++i) {
    const double ll1 =
        models::cox_partial_log_likelihood(data[i], theta(i)).value;
    const double ll0 = models::cox_partial_log_likelihood(data[i], 0.0).value;
    const double stat = std::max(0.0, 2.0 * (ll1 - ll0));
    res.p_values[i] = 1.0 - stats::chi2_cdf(1, stat);
  }
  return res;
}

}  // namespace dpi::baselines
