#include "dpi/htest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dpi/errors.hpp"
#include "dpi/privacy.hpp"
#include "dpi/stats.hpp"

namespace dpi::htest {

namespace {

constexpr std::uint64_t kLapPowerTag = 0x6c61702d70;
constexpr std::uint64_t kBootDataTag = 0x626f6f74;
constexpr std::uint64_t kCompNoiseTag = 0x636f6d70;
// Bootstrap replicate ids live far above experiment replicate ids so their
// noise substreams cannot collide with the run being tested.
constexpr std::uint64_t kBootRepBase = 0x626f6f7400000000ull;

void check_level(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("level must lie in (0, 1)");
}

void check_signal_prob(double p) {
  if (!(p > 0.5 && p < 1.0)) {
    throw ConfigError("alternative success probability must lie in (1/2, 1)");
  }
}

double empirical_quantile(std::vector<double>& v, double q) {
  std::sort(v.begin(), v.end());
  const int k = std::clamp(
      static_cast<int>(std::ceil(q * static_cast<double>(v.size()))), 1,
      static_cast<int>(v.size()));
  return v[k - 1];
}

CriticalBudget bisect_budget(const std::function<bool(double)>& cond,
                             double tol) {
  double lo = 1e-3, hi = 10.0;
  if (cond(lo)) return {lo, true, false};
  if (!cond(hi)) return {hi, false, true};
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    (cond(mid) ? hi : lo) = mid;
  }
  return {hi, false, false};
}

}  // namespace

double individual_power_binary(double p, double alpha) {
  check_signal_prob(p);
  check_level(alpha);
  const double q = 1.0 - p;  // null P[s = 1]
  if (q < alpha) {
    // Reject on s = 1 and randomize on s = 0 to spend the rest of the level.
    const double gamma = (alpha - q) / p;
    return p + (1.0 - p) * gamma;
  }
  if (q == alpha) return p;
  // q > alpha: reject on s = 1 with probability alpha / q.
  return p * alpha / q;
}

double rr_collective_power(int n, double p, double eps, double alpha) {
  check_signal_prob(p);
  check_level(alpha);
  if (n < 1) throw ConfigError("need n >= 1 agents");
  const double f = privacy::rr_flip_prob(eps);
  // Null: each observed bit is 1 w.p. p' = p*f + (1-p)*(1-f); alternative
  // mirrors it to 1 - p'.
  const double p_prime = p * f + (1.0 - p) * (1.0 - f);
  const int tau = stats::binomial_quantile(n, p_prime, 1.0 - alpha);
  return 1.0 - stats::binomial_cdf(n, 1.0 - p_prime, tau);
}

CriticalBudget critical_budget_rr(int n, double p, double alpha, double tol) {
  const double beta_ind = individual_power_binary(p, alpha);
  auto cond = [&](double eps) {
    return rr_collective_power(n, p, eps, alpha) >= beta_ind;
  };
  return bisect_budget(cond, tol);
}

double laplace_sum_test_power(int n, double p, double eps, double alpha,
                              int mc, std::uint64_t seed) {
  check_signal_prob(p);
  check_level(alpha);
  if (n < 1 || mc < 100) throw ConfigError("need n >= 1 and mc >= 100");
  if (eps <= 0.0) throw ConfigError("epsilon must be positive");
  const double a = std::log(p / (1.0 - p));  // per-bit log-likelihood ratio
  const double scale = 2.0 * a / eps;        // ratio sensitivity / budget
  std::vector<double> null_stats(mc), alt_stats(mc);
  for (int j = 0; j < mc; ++j) {
    double s_null = 0.0, s_alt = 0.0;
    for (int i = 0; i < n; ++i) {
      auto g = rng::Rng::substream(
          seed, {kLapPowerTag, static_cast<std::uint64_t>(j),
                 static_cast<std::uint64_t>(i)});
      const double u_sig = g.next_double();
      const double noise = g.laplace(scale);
      s_null += (u_sig < 1.0 - p ? a : -a) + noise;
      s_alt += (u_sig < p ? a : -a) + noise;
    }
    null_stats[j] = s_null;
    alt_stats[j] = s_alt;
  }
  const double tau = empirical_quantile(null_stats, 1.0 - alpha);
  int wins = 0;
  for (double s : alt_stats) wins += s > tau;
  return static_cast<double>(wins) / mc;
}

CriticalBudget critical_budget_laplace(int n, double p, double alpha, int mc,
                                       std::uint64_t seed, double tol) {
  const double beta_ind = individual_power_binary(p, alpha);
  auto cond = [&](double eps) {
    return laplace_sum_test_power(n, p, eps, alpha, mc, seed) >= beta_ind;
  };
  return bisect_budget(cond, tol);
}

PowerCurve power_curve(int n, double p, double alpha,
                       const std::vector<double>& eps_grid, int mc,
                       std::uint64_t seed) {
  PowerCurve c;
  c.n = n;
  c.p = p;
  c.alpha = alpha;
  c.mc = mc;
  c.seed = seed;
  c.eps = eps_grid;
  c.individual_power = individual_power_binary(p, alpha);
  for (double eps : eps_grid) {
    c.rr_power.push_back(rr_collective_power(n, p, eps, alpha));
    c.laplace_power.push_back(laplace_sum_test_power(n, p, eps, alpha, mc, seed));
  }
  c.eps_star_rr = critical_budget_rr(n, p, alpha);
  c.eps_star_laplace = critical_budget_laplace(n, p, alpha, mc, seed);
  return c;
}

// ---------------------------------------------------------------------------

double binary_simple_rho_c(const std::vector<int>& signals_per_agent, double p,
                           double level) {
  check_signal_prob(p);
  check_level(level);
  long m_total = 0;
  for (int m : signals_per_agent) {
    if (m < 0) throw ConfigError("signal counts must be nonnegative");
    m_total += m;
  }
  if (m_total < 1) throw ConfigError("need at least one signal");
  const int M = static_cast<int>(m_total);
  const double a = std::log(p / (1.0 - p));
  // 2*Lambda = 2a(2H - M) with H ~ Bin(M, 1-p) under the null; pick the
  // smallest tail {H >= h} inside the level and put rho_c between the jumps.
  int h_star = M + 1;
  for (int h = 0; h <= M; ++h) {
    const double tail = 1.0 - stats::binomial_cdf(M, 1.0 - p, h - 1);
    if (tail <= level) {
      h_star = h;
      break;
    }
  }
  return 2.0 * a * (2.0 * h_star - 1.0 - M);
}

namespace {

models::Constants simple_test_constants(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data,
    const models::StateSpace& space) {
  models::Constants c;
  const double s0 = space.states[0], s1 = space.states[1];
  double l01 = 0.0, l10 = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    c.Gamma = std::max(c.Gamma, models[i]->gamma_bound(data[i], space));
    const double xi = models::data_size(data[i]);
    l01 += xi * models[i]->kl(s0, s1);
    l10 += xi * models[i]->kl(s1, s0);
    c.Delta = std::max({c.Delta, models[i]->sensitivity(s0),
                        models[i]->sensitivity(s1)});
    c.Q = std::max(c.Q, std::max(models[i]->llr_std(s0, s1, s0),
                                 models[i]->llr_std(s0, s1, s1)));
  }
  c.l = std::min(l01, l10);
  if (!(c.l > 1e-12)) throw ConfigError("hypotheses not identifiable");
  return c;
}

}  // namespace

TestOutcome distributed_simple_test(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<models::AgentData>& data, const graph::Network& net,
    const models::StateSpace& space, double eps, const SimpleTestConfig& cfg) {
  if (space.size() != 2) {
    throw ConfigError("simple test needs exactly two states (null, alternative)");
  }
  if (models.size() != data.size() ||
      static_cast<int>(models.size()) != net.n) {
    throw ConfigError("need one model and one dataset per agent");
  }
  check_level(cfg.alpha);
  const int n = net.n;
  const models::Constants c = simple_test_constants(models, data, space);

  // Geometric-mean aggregation with type-I budget alpha/2 (schedule parameter
  // alpha/4, whose guarantee is 1 - 2*parameter) and unit threshold exponent.
  mle::ScheduleOverrides ov;
  ov.rho_gm = 1.0;
  ov.rho_am = 1.0;
  const mle::MleSchedule sched = mle::compute_mle_schedule(
      eps, cfg.alpha / 4.0, 1.0 - cfg.alpha / 4.0, c, net, 2, 1, false, {}, ov);

  Eigen::MatrixXd lg(n, 2);
  for (int i = 0; i < n; ++i) {
    lg(i, 0) = models[i]->log_likelihood(data[i], space.states[0]);
    lg(i, 1) = models[i]->log_likelihood(data[i], space.states[1]);
  }
  const auto rounds = mle::run_belief_rounds(lg, net, sched.K, sched.T,
                                             sched.noise_scale, cfg.seed,
                                             cfg.rep);
  double gm_ratio = 0.0;
  for (const auto& term : rounds.terminal) gm_ratio += term(0, 1) - term(0, 0);
  gm_ratio /= sched.K;
  const double scale_back = n / std::pow(2.0, sched.T - 1);

  TestOutcome out;
  out.alpha = cfg.alpha;
  out.K = sched.K;
  out.T = sched.T;
  out.statistic = scale_back * gm_ratio;

  if (cfg.bootstrap_distributed) {
    // Parametric bootstrap of the full private statistic under the null.
    std::vector<double> sims(cfg.bootstrap_mc);
    for (int b = 0; b < cfg.bootstrap_mc; ++b) {
      Eigen::MatrixXd lgb(n, 2);
      for (int i = 0; i < n; ++i) {
        auto g = rng::Rng::substream(
            cfg.seed, {kBootDataTag, static_cast<std::uint64_t>(b),
                       static_cast<std::uint64_t>(i)});
        const auto sim = models[i]->sample(space.states[0],
                                           models::data_size(data[i]), g);
        lgb(i, 0) = models[i]->log_likelihood(sim, space.states[0]);
        lgb(i, 1) = models[i]->log_likelihood(sim, space.states[1]);
      }
      const auto r = mle::run_belief_rounds(
          lgb, net, sched.K, sched.T, sched.noise_scale, cfg.seed,
          kBootRepBase + static_cast<std::uint64_t>(b));
      double ratio = 0.0;
      for (const auto& term : r.terminal) ratio += term(0, 1) - term(0, 0);
      sims[b] = scale_back * ratio / sched.K;
    }
    int geq = 0;
    for (double s : sims) geq += s >= out.statistic;
    out.p_value = (1.0 + geq) / (1.0 + cfg.bootstrap_mc);
    std::vector<double> sims_copy = sims;
    out.threshold = empirical_quantile(sims_copy, 1.0 - cfg.alpha);
    out.family = "bootstrap-distributed";
  } else {
    double rho_c = cfg.rho_c;
    if (std::isnan(rho_c)) {
      // Parametric bootstrap of the centralized statistic at level alpha/2.
      std::vector<double> sims(cfg.bootstrap_mc);
      for (int b = 0; b < cfg.bootstrap_mc; ++b) {
        double lam = 0.0;
        for (int i = 0; i < n; ++i) {
          auto g = rng::Rng::substream(
              cfg.seed, {kBootDataTag, static_cast<std::uint64_t>(b),
                         static_cast<std::uint64_t>(i)});
          const auto sim = models[i]->sample(space.states[0],
                                             models::data_size(data[i]), g);
          lam += models[i]->log_likelihood(sim, space.states[1]) -
                 models[i]->log_likelihood(sim, space.states[0]);
        }
        sims[b] = 2.0 * lam;
      }
      rho_c = empirical_quantile(sims, 1.0 - cfg.alpha / 2.0);
      out.family = "bootstrap";
    } else {
      out.family = "caller";
    }
    out.threshold = rho_c - 1.0;  // unit slack absorbs consensus + noise
  }
  out.reject = out.statistic > out.threshold;
  return out;
}

TestOutcome distributed_composite_test(
    const std::vector<models::SurvData>& centers, const graph::Network& net,
    double eps, const CompositeTestConfig& cfg) {
  const int n = net.n;
  if (static_cast<int>(centers.size()) != n) {
    throw ConfigError("need one dataset per center");
  }
  check_level(cfg.alpha);
  if (eps <= 0.0) throw ConfigError("epsilon must be positive");

  Eigen::MatrixXd lg(n, 2);
  for (int i = 0; i < n; ++i) {
    const auto fit = models::cox_fit_mle(centers[i], cfg.b_theta, cfg.ridge);
    if (!fit.identifiable) {
      throw RunError("center " + std::to_string(i) +
                     ": effect not identifiable (no events or constant covariate)");
    }
    // Generalized likelihood ratio columns: sup over the null {0} and over
    // the clamped alternative range. The ridge steers the fit only.
    lg(i, 0) = models::cox_partial_log_likelihood(centers[i], 0.0).value;
    lg(i, 1) = models::cox_partial_log_likelihood(centers[i], fit.theta_hat).value;
  }

  const double delta = privacy::cox_sensitivity(cfg.b_theta, cfg.b_x);
  const int K = std::max(1, static_cast<int>(std::ceil(std::log(4.0 / cfg.alpha))));
  const double noise_scale = delta * K * 2.0 / eps;

  std::vector<Eigen::MatrixXd> init(K, lg);
  double max_dev = 0.0;
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < n; ++i) {
      for (int s = 0; s < 2; ++s) {
        auto g = rng::Rng::substream(
            cfg.seed, {kCompNoiseTag, cfg.rep, static_cast<std::uint64_t>(k),
                       static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s)});
        init[k](i, s) += g.laplace(noise_scale);
      }
    }
    const Eigen::VectorXd psi = init[k].col(1) - init[k].col(0);
    const double mean = psi.mean();
    for (int i = 0; i < n; ++i) {
      max_dev = std::max(max_dev, std::fabs(psi(i) - mean));
    }
  }

  // Iterate until the non-consensus component leaves the statistic within a
  // slack far below the unit threshold allowance.
  const double a_star = std::max(net.slem_lazy, 1e-12);
  const double slack = 0.01;
  int T = 1;
  if (max_dev > 0.0) {
    const double need = std::log(2.0 * n * max_dev / slack) / std::log(1.0 / a_star);
    T = std::max(1, static_cast<int>(std::ceil(need)));
  }

  const auto rounds = mle::run_belief_rounds_from_init(std::move(init), net, T);
  double gm_ratio = 0.0;
  for (const auto& term : rounds.terminal) gm_ratio += term(0, 1) - term(0, 0);
  gm_ratio /= K;

  TestOutcome out;
  out.alpha = cfg.alpha;
  out.K = K;
  out.T = T;
  out.family = "chi2_n";
  out.statistic = n / std::pow(2.0, T - 1) * gm_ratio;
  out.threshold = stats::chi2_quantile(n, 1.0 - cfg.alpha / 2.0) - 1.0;
  out.reject = out.statistic > out.threshold;
  out.p_value =
      out.statistic <= 0.0 ? 1.0 : 1.0 - stats::chi2_cdf(n, out.statistic);
  return out;
}

TestOutcome centralized_composite_test(
    const std::vector<models::SurvData>& centers, double alpha, double b_theta,
    double ridge) {
  check_level(alpha);
  models::SurvData pooled;
  for (const auto& c : centers) pooled.insert(pooled.end(), c.begin(), c.end());
  const auto fit = models::cox_fit_mle(pooled, b_theta, ridge);
  if (!fit.identifiable) {
    throw RunError("pooled data: effect not identifiable");
  }
  TestOutcome out;
  out.alpha = alpha;
  out.family = "chi2_1";
  const double ll1 = models::cox_partial_log_likelihood(pooled, fit.theta_hat).value;
  const double ll0 = models::cox_partial_log_likelihood(pooled, 0.0).value;
  out.statistic = std::max(0.0, 2.0 * (ll1 - ll0));
  out.threshold = stats::chi2_quantile(1, 1.0 - alpha);
  out.reject = out.statistic > out.threshold;
  out.p_value =
      out.statistic <= 0.0 ? 1.0 : 1.0 - stats::chi2_cdf(1, out.statistic);
  return out;
}

double min_epsilon_for_test_validity(double delta, int n_states, int n, int K,
                                     double alpha) {
  check_level(alpha);
  if (delta < 0.0 || n_states < 2 || n < 1 || K < 1) {
    throw ConfigError("min_epsilon_for_test_validity: bad arguments");
  }
  return delta * n_states * std::sqrt(32.0 * n * K / alpha);
}

// ---------------------------------------------------------------------------

LowerBound communication_lower_bound(const std::vector<double>& kl_private,
                                     double alpha, double beta, int diam) {
  check_level(alpha);
  check_level(beta);
  if (diam < 0) throw ConfigError("diameter must be nonnegative");
  double sum = 0.0;
  for (double kl : kl_private) {
    if (kl < 0.0) throw ConfigError("KL divergences must be nonnegative");
    sum += kl;
  }
  LowerBound lb;
  lb.t_min = diam;
  if (sum <= 0.0) {
    lb.unbounded = true;
    lb.kt = std::numeric_limits<double>::infinity();
    return lb;
  }
  lb.kt = std::fabs(1.0 - alpha - beta) * diam / (2.0 * sum);
  return lb;
}

double rr_privatized_kl(double gap, double eps) {
  if (!(gap > 0.0 && gap < 1.0)) throw ConfigError("gap must lie in (0, 1)");
  const double f = privacy::rr_flip_prob(eps);
  // Be(1/2 + gap/2) through the flip channel vs Be(1/2) (flip-invariant).
  const double q1 = f + (0.5 + gap / 2.0) * (1.0 - 2.0 * f);
  return q1 * std::log(2.0 * q1) + (1.0 - q1) * std::log(2.0 * (1.0 - q1));
}

double rr_lower_bound_closed_form(double gap, double alpha, double beta,
                                  double eps, int diam, int n) {
  check_level(alpha);
  check_level(beta);
  if (!(gap > 0.0 && gap < 1.0)) throw ConfigError("gap must lie in (0, 1)");
  if (eps <= 0.0) throw ConfigError("epsilon must be positive");
  const double channel = (std::exp(eps) + 1.0) / (std::exp(eps) - 1.0);
  return 2.0 * std::fabs(1.0 - alpha - beta) / (gap * gap) * channel * channel *
         diam / n;
}

}  // namespace dpi::htest
