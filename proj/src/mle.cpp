#include "dpi/mle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpi/errors.hpp"
#include "dpi/stats.hpp"

namespace dpi::mle {

namespace {

constexpr std::uint64_t kMleNoiseTag = 0x6d6c65;  // substream domain separator

// Subtract each row's logsumexp, then re-measure it; the residual is the
// stability invariant the acceptance checks tally.
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

double log_tau_of(double rho) {
  // log(1/(1 + e^rho)) computed without overflow for large rho.
  return -(rho + std::log1p(std::exp(-rho)));
}

int ceil_at_least_one(double x) {
  return std::max(1, static_cast<int>(std::ceil(x)));
}

}  // namespace

bool separability_check(int n_states, double f_star) {
  if (n_states < 1) throw ConfigError("separability_check: need n_states >= 1");
  if (!(f_star > 0.0 && f_star <= 1.0)) {
    throw ConfigError("separability_check: f_star must lie in (0, 1]");
  }
  if (n_states <= 4) return true;
  const double half_width =
      0.5 * std::sqrt(static_cast<double>(n_states - 4) / n_states);
  return f_star < 0.5 - half_width || f_star > 0.5 + half_width;
}

MleSchedule compute_mle_schedule(double eps, double alpha, double beta,
                                 const models::Constants& c,
                                 const graph::Network& net, int n_states,
                                 int theta_star_size, bool with_threshold,
                                 const ThresholdParams& thr,
                                 const ScheduleOverrides& ov) {
  if (eps <= 0.0) throw ConfigError("epsilon must be positive");
  if (!(alpha > 0.0 && alpha < 1.0) || !(beta > 0.0 && beta < 1.0)) {
    throw ConfigError("alpha and beta must lie in (0, 1)");
  }
  if (n_states < 2) throw ConfigError("need at least two candidate states");
  if (!(c.l > 0.0)) throw ConfigError("constants: l must be positive");

  const int S = n_states;
  const int n = net.n;
  MleSchedule sched;
  sched.constants = c;
  sched.with_threshold = with_threshold;

  // --- rounds ---------------------------------------------------------------
  double k1_num, k2_num;  // Hoeffding numerators for the vote estimators
  if (theta_star_size >= 1 && theta_star_size < S) {
    const double j = theta_star_size;
    const double comp = S - theta_star_size;
    sched.K_gm = ceil_at_least_one(j * std::log(comp / alpha));
    sched.K_am = ceil_at_least_one(comp * std::log(j / (1.0 - beta)));
    k1_num = std::log(comp / alpha);
    k2_num = std::log(j / (1.0 - beta));
  } else {
    // Unknown optimal-set size: |Theta| bound, joint guarantee.
    const double k = S * std::log(S / std::min(alpha, 1.0 - beta));
    sched.K_gm = sched.K_am = ceil_at_least_one(k);
    k1_num = std::log(S / alpha);
    k2_num = std::log(S / (1.0 - beta));
  }

  ThresholdParams tp = thr;
  if (with_threshold) {
    if (!(tp.q1 > 0.0 && tp.q1 < 1.0 && tp.q2 > 0.0 && tp.q2 < 1.0)) {
      throw ConfigError("threshold crossing probabilities must lie in (0, 1)");
    }
    if (!(tp.pi2 > 0.0 && tp.pi2 < 1.0)) {
      throw ConfigError("pi2 must lie in (0, 1)");
    }
    if (tp.single) {
      if (!(tp.q2 > tp.q1)) {
        throw ConfigError("single-threshold mode needs q2 > q1");
      }
      tp.pi1 = (1.0 - tp.pi2) * tp.q2 / tp.q1 - 1.0;
      if (!(tp.pi1 > 0.0)) {
        throw ConfigError("single-threshold margins infeasible: derived pi1 <= 0");
      }
    } else if (!(tp.pi1 > 0.0)) {
      throw ConfigError("pi1 must be positive");
    }
    sched.K_thr1 = ceil_at_least_one(k1_num / (2.0 * tp.pi1 * tp.pi1));
    sched.K_thr2 = ceil_at_least_one(k2_num / (2.0 * tp.pi2 * tp.pi2));
  }

  sched.K = std::max({1, sched.K_am, sched.K_gm,
                      with_threshold ? sched.K_thr1 : 1,
                      with_threshold ? sched.K_thr2 : 1});
  if (ov.K) sched.K = std::max(1, *ov.K);

  // --- noise ----------------------------------------------------------------
  sched.noise_scale =
      ov.noise_scale ? *ov.noise_scale : c.Delta * sched.K * S / eps;
  sched.V = n * std::sqrt(2.0) * sched.noise_scale;

  // --- thresholds and iterations ---------------------------------------------
  // The closed-form optimizer rho* = C^e1 (l / 2n)^e2 equalizes the two T
  // lower bounds; e1 + e2 = 1 with e1 = log2 / log(2/a*), e2 = log(1/a*)/log(2/a*).
  sched.a_star = net.slem_lazy;
  const double a_star = std::max(sched.a_star, 1e-12);
  const double e1 = std::log(2.0) / std::log(2.0 / a_star);
  const double e2 = std::log(1.0 / a_star) / std::log(2.0 / a_star);
  const double rho_floor = std::log(static_cast<double>(S) + 1.0);
  const double base = static_cast<double>(S) * S * (n - 1) * (n * c.Gamma + sched.V);
  auto rho_opt = [&](double denom) {
    const double C = base / denom;
    if (C <= 0.0) return rho_floor;  // n = 1: no consensus error term
    return std::max(rho_floor,
                    std::pow(C, e1) * std::pow(c.l / (2.0 * n), e2));
  };
  auto T_for = [&](double rho, double denom) {
    const double t1 = std::log(2.0 * rho * n / c.l) / std::log(2.0);
    double t2 = 0.0;
    const double C = base / denom;
    if (C > 0.0 && C > rho) t2 = std::log(C / rho) / std::log(1.0 / a_star);
    return std::max({1, static_cast<int>(std::ceil(t1)),
                     static_cast<int>(std::ceil(t2))});
  };

  const double sqrtK = std::sqrt(static_cast<double>(sched.K));
  const double d_gm = 2.0 * alpha * sqrtK;
  const double d_am = 2.0 * std::log(1.0 / (1.0 - beta)) / sched.K;
  sched.rho_gm = ov.rho_gm ? *ov.rho_gm : rho_opt(d_gm);
  sched.rho_am = ov.rho_am ? *ov.rho_am : rho_opt(d_am);
  sched.tau_gm = 1.0 / (1.0 + std::exp(sched.rho_gm));
  sched.tau_am = 1.0 / (1.0 + std::exp(sched.rho_am));
  sched.log_tau_gm = log_tau_of(sched.rho_gm);
  sched.log_tau_am = log_tau_of(sched.rho_am);

  int T = std::max(T_for(sched.rho_gm, d_gm), T_for(sched.rho_am, d_am));

  if (with_threshold) {
    sched.single_threshold = tp.single;
    sched.q1 = tp.q1;
    sched.q2 = tp.q2;
    sched.pi1 = tp.pi1;
    sched.pi2 = tp.pi2;
    const double d1 = 2.0 * tp.q1 * sqrtK;
    const double d2 = 2.0 * (1.0 - tp.q2) * sqrtK;
    sched.rho_thr1 = ov.rho_thr1 ? *ov.rho_thr1 : rho_opt(d1);
    sched.rho_thr2 = ov.rho_thr2 ? *ov.rho_thr2 : rho_opt(d2);
    sched.tau_hat1 = 1.0 / (1.0 + std::exp(sched.rho_thr1));
    sched.tau_hat2 = 1.0 / (1.0 + std::exp(sched.rho_thr2));
    sched.log_tau_hat1 = log_tau_of(sched.rho_thr1);
    sched.log_tau_hat2 = log_tau_of(sched.rho_thr2);
    sched.tau_thr1 = (1.0 + tp.pi1) * tp.q1;
    sched.tau_thr2 = (1.0 - tp.pi2) * tp.q2;
    if (!(sched.tau_thr1 > 0.0 && sched.tau_thr1 < 1.0) ||
        !(sched.tau_thr2 > 0.0 && sched.tau_thr2 < 1.0)) {
      throw ConfigError("frequency thresholds fall outside (0, 1); "
                        "adjust (q1, q2, pi1, pi2)");
    }
    T = std::max({T, T_for(sched.rho_thr1, d1), T_for(sched.rho_thr2, d2)});
  }

  sched.T = ov.T ? std::max(1, *ov.T) : T;
  return sched;
}

RoundsResult run_belief_rounds_from_init(std::vector<Eigen::MatrixXd> init,
                                         const graph::Network& net, int T,
                                         bool record_traj) {
  if (init.empty()) throw ConfigError("need at least one round");
  const int K = static_cast<int>(init.size());
  const Eigen::MatrixXd lazy =
      net.weights + Eigen::MatrixXd::Identity(net.n, net.n);

  RoundsResult out;
  out.terminal.reserve(K);
  if (record_traj) out.traj.resize(K);
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd L = std::move(init[k]);
    if (L.rows() != net.n) throw ConfigError("belief rows must match agents");
    normalize_rows(L, out.max_lse_dev);
    if (record_traj) out.traj[k].push_back(L);
    for (int t = 1; t <= T; ++t) {
      L = lazy * L;
      normalize_rows(L, out.max_lse_dev);
      if (record_traj) out.traj[k].push_back(L);
    }
    out.terminal.push_back(std::move(L));
  }
  return out;
}

RoundsResult run_belief_rounds(const Eigen::MatrixXd& log_gamma,
                               const graph::Network& net, int K, int T,
                               double noise_scale, std::uint64_t seed,
                               std::uint64_t rep, bool record_traj) {
  const int n = net.n;
  const int S = static_cast<int>(log_gamma.cols());
  if (log_gamma.rows() != n) throw ConfigError("log_gamma rows must match agents");
  std::vector<Eigen::MatrixXd> init(K);
  for (int k = 0; k < K; ++k) {
    init[k] = log_gamma;
    if (noise_scale > 0.0) {
      for (int i = 0; i < n; ++i) {
        for (int s = 0; s < S; ++s) {
          auto g = rng::Rng::substream(
              seed, {kMleNoiseTag, rep, static_cast<std::uint64_t>(k),
                     static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s)});
          init[k](i, s) += g.laplace(noise_scale);
        }
      }
    }
  }
  return run_belief_rounds_from_init(std::move(init), net, T, record_traj);
}

namespace {

Eigen::MatrixXd realized_log_gamma(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data,
    const models::StateSpace& space) {
  if (models.empty() || models.size() != data.size()) {
    throw ConfigError("need one model and one dataset per agent");
  }
  const int n = static_cast<int>(models.size());
  const int S = space.size();
  Eigen::MatrixXd lg(n, S);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < S; ++s) {
      lg(i, s) = models[i]->log_likelihood(data[i], space.states[s]);
    }
  }
  return lg;
}

std::vector<std::vector<int>> sets_from_log_beliefs(const Eigen::MatrixXd& log_nu,
                                                    double log_tau) {
  std::vector<std::vector<int>> sets(log_nu.rows());
  for (Eigen::Index i = 0; i < log_nu.rows(); ++i) {
    for (Eigen::Index s = 0; s < log_nu.cols(); ++s) {
      if (log_nu(i, s) >= log_tau) sets[i].push_back(static_cast<int>(s));
    }
  }
  return sets;
}

MleResult run_batch(const std::vector<const models::SignalModel*>& models,
                    const std::vector<models::AgentData>& data,
                    const graph::Network& net, const models::StateSpace& space,
                    const MleSchedule& sched, const MleOptions& opt) {
  MleResult res;
  res.log_gamma = realized_log_gamma(models, data, space);
  res.rounds = run_belief_rounds(res.log_gamma, net, sched.K, sched.T,
                                 sched.noise_scale, opt.seed, opt.rep,
                                 opt.record_traj);
  const int n = net.n;
  const int S = space.size();
  const int K = sched.K;
  res.max_lse_dev = res.rounds.max_lse_dev;

  // Arithmetic and geometric means across rounds, in log space.
  res.log_nu_am.resize(n, S);
  res.log_nu_gm.resize(n, S);
  std::vector<double> acc(K);
  for (int i = 0; i < n; ++i) {
    for (int s = 0; s < S; ++s) {
      double gm = 0.0;
      for (int k = 0; k < K; ++k) {
        acc[k] = res.rounds.terminal[k](i, s);
        gm += acc[k];
      }
      res.log_nu_am(i, s) = stats::logsumexp(acc) - std::log(K);
      res.log_nu_gm(i, s) = gm / K;
    }
  }
  normalize_rows(res.log_nu_am, res.max_lse_dev);
  normalize_rows(res.log_nu_gm, res.max_lse_dev);
  res.am_set = sets_from_log_beliefs(res.log_nu_am, sched.log_tau_am);
  res.gm_set = sets_from_log_beliefs(res.log_nu_gm, sched.log_tau_gm);

  if (sched.with_threshold) {
    res.freq1 = Eigen::MatrixXd::Zero(n, S);
    res.freq2 = Eigen::MatrixXd::Zero(n, S);
    for (int k = 0; k < K; ++k) {
      for (int i = 0; i < n; ++i) {
        for (int s = 0; s < S; ++s) {
          const double b = res.rounds.terminal[k](i, s);
          if (b > sched.log_tau_hat1) res.freq1(i, s) += 1.0;
          if (b > sched.log_tau_hat2) res.freq2(i, s) += 1.0;
        }
      }
    }
    res.freq1 /= K;
    res.freq2 /= K;
    res.thr_set1.resize(n);
    res.thr_set2.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int s = 0; s < S; ++s) {
        if (res.freq1(i, s) >= sched.tau_thr1) res.thr_set1[i].push_back(s);
        if (res.freq2(i, s) >= sched.tau_thr2) res.thr_set2[i].push_back(s);
      }
    }
  }
  return res;
}

}  // namespace

MleResult run_mle_am_gm(const std::vector<const models::SignalModel*>& models,
                        const std::vector<models::AgentData>& data,
                        const graph::Network& net,
                        const models::StateSpace& space,
                        const MleSchedule& sched, const MleOptions& opt) {
  return run_batch(models, data, net, space, sched, opt);
}

MleResult run_mle_two_threshold(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data, const graph::Network& net,
    const models::StateSpace& space, const MleSchedule& sched,
    const MleOptions& opt) {
  if (!sched.with_threshold) {
    throw ConfigError("two-threshold run needs a schedule built with "
                      "with_threshold = true");
  }
  return run_batch(models, data, net, space, sched, opt);
}

MleResult run_mle_nonprivate(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data, const graph::Network& net,
    const models::StateSpace& space, int T, double rho, bool record_traj) {
  MleSchedule sched;
  sched.K = 1;
  sched.T = std::max(1, T);
  sched.noise_scale = 0.0;
  const double r = rho > 0.0 ? rho : std::log(space.size() + 1.0);
  sched.rho_am = sched.rho_gm = r;
  sched.tau_am = sched.tau_gm = 1.0 / (1.0 + std::exp(r));
  sched.log_tau_am = sched.log_tau_gm = log_tau_of(r);
  MleOptions opt;
  opt.record_traj = record_traj;
  return run_batch(models, data, net, space, sched, opt);
}

std::vector<int> centralized_mle_set(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data,
    const models::StateSpace& space, double rel_tol) {
  const Eigen::MatrixXd lg = realized_log_gamma(models, data, space);
  const Eigen::VectorXd pooled = lg.colwise().sum();
  const double top = pooled.maxCoeff();
  const double tol = rel_tol * std::max(1.0, std::fabs(top));
  std::vector<int> set;
  for (int s = 0; s < pooled.size(); ++s) {
    if (pooled(s) >= top - tol) set.push_back(s);
  }
  return set;
}

double realized_min_gap(const std::vector<const models::SignalModel*>& models,
                        const std::vector<models::AgentData>& data,
                        const models::StateSpace& space) {
  const Eigen::MatrixXd lg = realized_log_gamma(models, data, space);
  const Eigen::VectorXd pooled = lg.colwise().sum();
  const double top = pooled.maxCoeff();
  const auto star = centralized_mle_set(models, data, space);
  std::vector<char> in_star(space.size(), 0);
  for (int s : star) in_star[s] = 1;
  double gap = std::numeric_limits<double>::infinity();
  for (int s = 0; s < pooled.size(); ++s) {
    if (!in_star[s]) gap = std::min(gap, top - pooled(s));
  }
  return gap;
}

}  // namespace dpi::mle
