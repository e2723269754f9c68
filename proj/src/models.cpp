#include "dpi/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dpi/errors.hpp"
#include "dpi/stats.hpp"

namespace dpi::models {

namespace {

void check_prob(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ConfigError("Bernoulli state must lie strictly inside (0, 1)");
  }
}

const BitData& as_bits(const AgentData& data) {
  if (const auto* b = std::get_if<BitData>(&data)) return *b;
  throw ConfigError("model expects bit-valued signals");
}

const RealData& as_reals(const AgentData& data) {
  if (const auto* r = std::get_if<RealData>(&data)) return *r;
  throw ConfigError("model expects real-valued signals");
}

const SurvData& as_surv(const AgentData& data) {
  if (const auto* s = std::get_if<SurvData>(&data)) return *s;
  throw ConfigError("model expects survival records");
}

// Solve for the exponential censoring rate mu that achieves the target
// censoring fraction under balanced binary covariates:
//   0.5 * (mu/(1 + mu) + mu/(exp(theta) + mu)) = rate.
double censoring_rate_param(double theta, double rate) {
  const double h1 = std::exp(theta);
  auto frac = [&](double mu) {
    return 0.5 * (mu / (1.0 + mu) + mu / (h1 + mu));
  };
  double lo = 1e-12, hi = 1e12;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);  // bisect in log space
    (frac(mid) < rate ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

int data_size(const AgentData& data) {
  return std::visit([](const auto& v) { return static_cast<int>(v.size()); },
                    data);
}

double SignalModel::gamma_bound(const AgentData& data,
                                const StateSpace& space) const {
  double g = 0.0;
  for (double theta : space.states) {
    g = std::max(g, std::fabs(log_likelihood(data, theta)));
  }
  return g;
}

// ---------------------------------------------------------------------------
// Bernoulli

double bernoulli_log_likelihood(const BitData& bits, double p) {
  check_prob(p);
  if (bits.empty()) return 0.0;
  int ones = 0;
  for (int b : bits) {
    if (b != 0 && b != 1) throw ConfigError("bit signal must be 0 or 1");
    ones += b;
  }
  const int zeros = static_cast<int>(bits.size()) - ones;
  return ones * std::log(p) + zeros * std::log1p(-p);
}

double BernoulliModel::log_likelihood(const AgentData& data, double theta) const {
  return bernoulli_log_likelihood(as_bits(data), theta);
}

AgentData BernoulliModel::sample(double theta, int m, rng::Rng& g) const {
  check_prob(theta);
  BitData bits(m);
  for (int j = 0; j < m; ++j) bits[j] = g.bernoulli(theta) ? 1 : 0;
  return bits;
}

double BernoulliModel::sensitivity(double theta) const {
  check_prob(theta);
  return std::fabs(std::log(theta) - std::log1p(-theta));
}

double BernoulliModel::kl(double t1, double t2) const {
  check_prob(t1);
  check_prob(t2);
  return t1 * std::log(t1 / t2) + (1.0 - t1) * std::log((1.0 - t1) / (1.0 - t2));
}

double BernoulliModel::llr_std(double t1, double t2, double theta_true) const {
  check_prob(theta_true);
  // log l(s|t1) - log l(s|t2) takes two values; its spread is the log odds
  // ratio, scaled by the Bernoulli standard deviation at the true state.
  const double swing = std::fabs((std::log(t1) - std::log(t2)) -
                                 (std::log1p(-t1) - std::log1p(-t2)));
  return swing * std::sqrt(theta_true * (1.0 - theta_true));
}

// ---------------------------------------------------------------------------
// Gaussian

double GaussianModel::log_likelihood(const AgentData& data, double theta) const {
  const RealData& vals = as_reals(data);
  if (vals.empty()) return 0.0;
  double ll = 0.0;
  for (double v : vals) {
    const double d = v - theta;
    ll += -0.5 * d * d - 0.9189385332046727;  // log sqrt(2 pi)
  }
  return ll;
}

AgentData GaussianModel::sample(double theta, int m, rng::Rng& g) const {
  RealData vals(m);
  for (int j = 0; j < m; ++j) {
    double x;
    do {
      x = theta + g.normal();
    } while (std::fabs(x) > bound_);
    vals[j] = x;
  }
  return vals;
}

double GaussianModel::sensitivity(double theta) const {
  const double hi = (bound_ + std::fabs(theta));
  const double lo = std::max(0.0, std::fabs(theta) - bound_);
  return 0.5 * (hi * hi - lo * lo);
}

double GaussianModel::kl(double t1, double t2) const {
  return 0.5 * (t1 - t2) * (t1 - t2);
}

double GaussianModel::llr_std(double t1, double t2, double) const {
  return std::fabs(t1 - t2);  // |t1 - t2| * sd(s), unit variance
}

// ---------------------------------------------------------------------------
// Proportional hazards

namespace {

std::vector<int> sort_desc_by_time(const SurvData& records) {
  std::vector<int> idx(records.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return records[a].time > records[b].time;
  });
  return idx;
}

void check_record(const SurvivalRecord& r) {
  if (!(r.time > 0.0)) throw ConfigError("survival record needs time > 0");
  if (r.event != 0 && r.event != 1) {
    throw ConfigError("survival record event flag must be 0 or 1");
  }
}

}  // namespace

CoxLogLik cox_partial_log_likelihood(const SurvData& records, double theta) {
  if (records.empty()) return {0.0, true};
  const auto idx = sort_desc_by_time(records);
  double lse = -std::numeric_limits<double>::infinity();
  double ll = 0.0;
  bool any_event = false;
  std::size_t i = 0;
  while (i < idx.size()) {
    // Records tied on time enter the risk set together before their events
    // are scored, so each event's risk set is {j' : t_j' >= t_j}.
    std::size_t j = i;
    while (j < idx.size() &&
           records[idx[j]].time == records[idx[i]].time) {
      ++j;
    }
    for (std::size_t k = i; k < j; ++k) {
      check_record(records[idx[k]]);
      lse = stats::logsumexp2(lse, theta * records[idx[k]].covariate);
    }
    for (std::size_t k = i; k < j; ++k) {
      const auto& r = records[idx[k]];
      if (r.event == 1) {
        any_event = true;
        ll += theta * r.covariate - lse;
      }
    }
    i = j;
  }
  return {any_event ? ll : 0.0, !any_event};
}

double cox_gradient(const SurvData& records, double theta) {
  if (records.empty()) return 0.0;
  const auto idx = sort_desc_by_time(records);
  double s0 = 0.0, s1 = 0.0, grad = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() &&
           records[idx[j]].time == records[idx[i]].time) {
      ++j;
    }
    for (std::size_t k = i; k < j; ++k) {
      const double x = records[idx[k]].covariate;
      const double w = std::exp(theta * x);
      s0 += w;
      s1 += x * w;
    }
    for (std::size_t k = i; k < j; ++k) {
      const auto& r = records[idx[k]];
      if (r.event == 1) grad += r.covariate - s1 / s0;
    }
    i = j;
  }
  return grad;
}

CoxFit cox_fit_mle(const SurvData& records, double b_theta, double ridge) {
  if (records.empty()) return {0.0, false};
  bool any_event = false;
  double x0 = records.front().covariate;
  bool constant_x = true;
  for (const auto& r : records) {
    check_record(r);
    any_event = any_event || r.event == 1;
    constant_x = constant_x && r.covariate == x0;
  }
  if (!any_event || constant_x) return {0.0, false};

  auto objective = [&](double th) {
    return cox_partial_log_likelihood(records, th).value - ridge * th * th;
  };
  // Golden-section search on a concave objective.
  const double inv_phi = 0.6180339887498949;
  double a = -b_theta, b = b_theta;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = objective(c), fd = objective(d);
  while (b - a > 1e-8) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = objective(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = objective(d);
    }
  }
  return {0.5 * (a + b), true};
}

double CoxModel::log_likelihood(const AgentData& data, double theta) const {
  return cox_partial_log_likelihood(as_surv(data), theta).value;
}

AgentData CoxModel::sample(double theta, int m, rng::Rng& g) const {
  SurvData records(m);
  const double mu =
      censor_rate_ > 0.0 ? censoring_rate_param(theta, censor_rate_) : 0.0;
  for (int j = 0; j < m; ++j) {
    const double x = j < m / 2 ? 1.0 : 0.0;  // balanced binary covariates
    const double event_time = g.exponential(std::exp(theta * x));
    double time = event_time;
    int event = 1;
    if (censor_rate_ > 0.0) {
      const double censor_time = g.exponential(mu);
      if (censor_time < event_time) {
        time = censor_time;
        event = 0;
      }
    }
    records[j] = {time, event, x};
  }
  return records;
}

double CoxModel::sensitivity(double) const { return 2.0 * b_theta_ * b_x_; }

double CoxModel::kl(double t1, double t2) const {
  return 0.5 * ((t1 - t2) + std::exp(t2 - t1) - 1.0);
}

double CoxModel::llr_std(double t1, double t2, double theta_true) const {
  // Monte Carlo on a fixed internal stream: per-signal spread of the partial
  // log-likelihood ratio, estimated on blocks.
  auto g = rng::Rng::substream(0x636f78ull, {1});
  const int block = kl_block_size();
  const int reps = 200;
  std::vector<double> vals(reps);
  for (int r = 0; r < reps; ++r) {
    const AgentData data = sample(theta_true, block, g);
    vals[r] = (log_likelihood(data, t1) - log_likelihood(data, t2)) /
              std::sqrt(static_cast<double>(block));
  }
  return std::sqrt(stats::variance(vals));
}

// ---------------------------------------------------------------------------

KlEstimate model_kl(const SignalModel& model, double t1, double t2,
                    int mc_samples, rng::Rng* g) {
  if (mc_samples <= 0) return {model.kl(t1, t2), 0.0};
  if (g == nullptr) throw ConfigError("model_kl: Monte Carlo mode needs an rng");
  const int block = model.kl_block_size();
  std::vector<double> vals(mc_samples);
  for (int r = 0; r < mc_samples; ++r) {
    const AgentData data = model.sample(t1, block, *g);
    vals[r] = (model.log_likelihood(data, t1) - model.log_likelihood(data, t2)) /
              static_cast<double>(block);
  }
  const double m = stats::mean(vals);
  const double se =
      std::sqrt(stats::variance(vals) / static_cast<double>(mc_samples));
  return {m, se};
}

namespace {

double worst_case_llr_std(const std::vector<const SignalModel*>& models,
                          const StateSpace& space) {
  double q = 0.0;
  for (const SignalModel* m : models) {
    for (double t1 : space.states) {
      for (double t2 : space.states) {
        if (t1 == t2) continue;
        for (double tt : space.states) {
          q = std::max(q, m->llr_std(t1, t2, tt));
        }
      }
    }
  }
  return q;
}

double max_sensitivity(const std::vector<const SignalModel*>& models,
                       const StateSpace& space) {
  double d = 0.0;
  for (const SignalModel* m : models) {
    for (double theta : space.states) d = std::max(d, m->sensitivity(theta));
  }
  return d;
}

}  // namespace

Constants constants_for_mle(const std::vector<const SignalModel*>& models,
                            const std::vector<AgentData>& data,
                            const StateSpace& space,
                            const std::vector<int>& theta_star_idx) {
  const int n = static_cast<int>(models.size());
  if (n == 0 || data.size() != models.size()) {
    throw ConfigError("constants_for_mle: need one model and dataset per agent");
  }
  const int S = space.size();
  std::vector<char> in_star(S, 0);
  for (int s : theta_star_idx) {
    if (s < 0 || s >= S) throw ConfigError("theta_star index out of range");
    in_star[s] = 1;
  }
  if (theta_star_idx.empty()) throw ConfigError("theta_star set is empty");
  if (static_cast<int>(theta_star_idx.size()) >= S) {
    throw ConfigError("theta_star covers the whole state space; nothing to separate");
  }

  Constants c;
  for (int i = 0; i < n; ++i) {
    c.Gamma = std::max(c.Gamma, models[i]->gamma_bound(data[i], space));
  }
  c.l = std::numeric_limits<double>::infinity();
  for (int sbar = 0; sbar < S; ++sbar) {
    if (in_star[sbar]) continue;
    for (int sstar : theta_star_idx) {
      double sum = 0.0;
      for (int i = 0; i < n; ++i) {
        sum += data_size(data[i]) *
               models[i]->kl(space.states[sbar], space.states[sstar]);
      }
      c.l = std::min(c.l, sum);
    }
  }
  if (!(c.l > 1e-12)) {
    throw ConfigError("states not identifiable: zero joint KL separation");
  }
  c.Q = worst_case_llr_std(models, space);
  c.Delta = max_sensitivity(models, space);
  return c;
}

Constants constants_for_online(const std::vector<const SignalModel*>& models,
                               const std::vector<double>& xi,
                               const StateSpace& space, int theta_true_idx) {
  const int n = static_cast<int>(models.size());
  if (n == 0 || xi.size() != models.size()) {
    throw ConfigError("constants_for_online: need one model and rate per agent");
  }
  const int S = space.size();
  if (theta_true_idx < 0 || theta_true_idx >= S) {
    throw ConfigError("theta_true index out of range");
  }
  Constants c;
  const double t_true = space.states[theta_true_idx];
  c.l = std::numeric_limits<double>::infinity();
  for (int sbar = 0; sbar < S; ++sbar) {
    if (sbar == theta_true_idx) continue;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      // Drift of the log-belief ratio under the true signal law.
      sum += xi[i] * models[i]->kl(t_true, space.states[sbar]);
    }
    c.l = std::min(c.l, sum);
  }
  if (!(c.l > 1e-12)) {
    throw ConfigError("states not identifiable: zero joint KL separation");
  }
  c.Q = worst_case_llr_std(models, space);
  c.Delta = max_sensitivity(models, space);
  return c;
}

}  // namespace dpi::models
