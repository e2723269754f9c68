#include "dpi/online.hpp"

#include <algorithm>
#include <cmath>

#include "dpi/errors.hpp"
#include "dpi/stats.hpp"

namespace dpi::online {

namespace {

constexpr std::uint64_t kOnlineNoiseTag = 0x6f6e2d6e;   // noise substreams
constexpr std::uint64_t kOnlineSignalTag = 0x6f6e2d73;  // signal substreams

void normalize_rows(Eigen::MatrixXd& L, double& max_dev) {
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double m = L.row(i).maxCoeff();
    if (!std::isfinite(m)) throw RunError("belief update produced non-finite values");
    double s = 0.0;
    for (Eigen::Index j = 0; j < L.cols(); ++j) s += std::exp(L(i, j) - m);
    L.row(i).array() -= m + std::log(s);

    double s2 = 0.0;
    const double m2 = L.row(i).maxCoeff();
    for (Eigen::Index j = 0; j < L.cols(); ++j) s2 += std::exp(L(i, j) - m2);
    const double dev = std::fabs(m2 + std::log(s2));
    if (std::isnan(dev)) throw RunError("belief normalization produced NaN");
    max_dev = std::max(max_dev, dev);
  }
}

}  // namespace

OnlineSchedule compute_online_schedule(double eps, double eta,
                                       const models::Constants& c,
                                       const std::vector<double>& xi,
                                       bool poisson, const graph::Network& net,
                                       int n_states) {
  if (eps <= 0.0) throw ConfigError("epsilon must be positive");
  if (!(eta > 0.0 && eta < 0.5)) {
    throw ConfigError("eta must lie in (0, 0.5) for a nontrivial guarantee");
  }
  if (static_cast<int>(xi.size()) != net.n) {
    throw ConfigError("need one arrival rate per agent");
  }
  if (!(c.l > 0.0)) throw ConfigError("constants: l must be positive");
  const int S = n_states;
  if (S < 2) throw ConfigError("need at least two candidate states");

  OnlineSchedule sched;
  sched.constants = c;
  sched.eta = eta;
  sched.b_star = net.slem_A;
  if (sched.b_star >= 1.0 - 1e-12) {
    throw ConfigError("weight chain does not mix: slem(A) = 1 "
                      "(periodic chain); use lazy or different weights");
  }
  sched.noise_scale = c.Delta * S / eps;
  const int n = net.n;
  sched.V = n * std::sqrt(2.0) * sched.noise_scale;
  sched.Xi = 0.0;
  double xi_max = 0.0;
  for (double x : xi) {
    if (x < 0.0) throw ConfigError("arrival rates must be nonnegative");
    if (poisson) sched.Xi += x;  // Poisson arrival variance equals the mean
    xi_max = std::max(xi_max, x);
  }
  sched.V_prime = std::sqrt(2.0) / n * (n * c.Q + sched.V) *
                  (xi_max + std::sqrt(sched.Xi / eta));
  sched.rho = std::log(static_cast<double>(S));
  const double rate = c.l / n;
  sched.T = std::max(
      1, static_cast<int>(std::ceil(
             (sched.rho + S * sched.V_prime / (2.0 * eta * (1.0 - sched.b_star))) /
             rate)));
  return sched;
}

OnlineResult run_online(const std::vector<const models::SignalModel*>& models,
                        const StreamConfig& stream, const graph::Network& net,
                        const models::StateSpace& space,
                        const OnlineSchedule& sched, std::uint64_t seed,
                        std::uint64_t rep, bool record_traj) {
  const int n = net.n;
  const int S = space.size();
  if (static_cast<int>(models.size()) != n ||
      static_cast<int>(stream.xi.size()) != n) {
    throw ConfigError("need one model and one arrival rate per agent");
  }
  if (stream.theta_true_idx < 0 || stream.theta_true_idx >= S) {
    throw ConfigError("theta_true index out of range");
  }
  const int T = stream.horizon > 0 ? stream.horizon : sched.T;

  OnlineResult res;
  Eigen::MatrixXd L(n, S);
  Eigen::MatrixXd scores(n, S);
  const double truth = space.states[stream.theta_true_idx];

  for (int t = 0; t <= T; ++t) {
    for (int i = 0; i < n; ++i) {
      auto gs = rng::Rng::substream(
          seed, {kOnlineSignalTag, rep, static_cast<std::uint64_t>(i),
                 static_cast<std::uint64_t>(t)});
      const int m = stream.poisson
                        ? gs.poisson(stream.xi[i])
                        : static_cast<int>(std::lround(stream.xi[i]));
      const models::AgentData data = models[i]->sample(truth, m, gs);
      for (int s = 0; s < S; ++s) {
        auto gn = rng::Rng::substream(
            seed, {kOnlineNoiseTag, rep, static_cast<std::uint64_t>(i),
                   static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(s)});
        scores(i, s) = models[i]->log_likelihood(data, space.states[s]) +
                       gn.laplace(sched.noise_scale);
      }
    }
    if (t == 0) {
      L = scores;  // beliefs start from the first noisy scores
    } else {
      L = scores + net.weights * L;
    }
    normalize_rows(L, res.max_lse_dev);
    if (record_traj) res.traj.push_back(L);
  }

  res.log_nu = L;
  res.avg_ratio.resize(n, S);
  res.argmax.resize(n);
  res.all_correct = true;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int s = 0; s < S; ++s) {
      res.avg_ratio(i, s) =
          (L(i, s) - L(i, stream.theta_true_idx)) / static_cast<double>(T);
      if (L(i, s) > L(i, best)) best = s;
    }
    res.argmax[i] = best;
    res.all_correct = res.all_correct && best == stream.theta_true_idx;
  }
  return res;
}

OnlineResult run_online_nonprivate(
    const std::vector<const models::SignalModel*>& models,
    const StreamConfig& stream, const graph::Network& net,
    const models::StateSpace& space, const OnlineSchedule& sched,
    std::uint64_t seed, std::uint64_t rep, bool record_traj) {
  OnlineSchedule noiseless = sched;
  noiseless.noise_scale = 0.0;
  return run_online(models, stream, net, space, noiseless, seed, rep,
                    record_traj);
}

}  // namespace dpi::online
