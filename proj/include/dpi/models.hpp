#pragma once

#include <variant>
#include <vector>

#include "dpi/rng.hpp"

namespace dpi::models {

// Candidate parameter values the network reasons over.
struct StateSpace {
  std::vector<double> states;
  int size() const { return static_cast<int>(states.size()); }
};

struct SurvivalRecord {
  double time = 0.0;     // observed time, > 0
  int event = 0;         // 1 = event observed, 0 = censored
  double covariate = 0;  // bounded, |x| <= b_x (synthetic data uses {0, 1})
};

using BitData = std::vector<int>;
using RealData = std::vector<double>;
using SurvData = std::vector<SurvivalRecord>;
using AgentData = std::variant<BitData, RealData, SurvData>;

int data_size(const AgentData& data);

// A local observation model: how one agent's dataset scores candidate states.
//
// Conventions shared by all implementations:
//  - log_likelihood of an empty dataset is 0;
//  - sensitivity(theta) bounds the change of log_likelihood(theta) under a
//    one-record replacement (the privacy adjacency);
//  - kl(t1, t2) is the per-signal KL divergence from the signal law at t1 to
//    the one at t2 (closed form where available).
class SignalModel {
 public:
  virtual ~SignalModel() = default;

  virtual double log_likelihood(const AgentData& data, double theta) const = 0;
  virtual AgentData sample(double theta, int m, rng::Rng& g) const = 0;
  virtual double sensitivity(double theta) const = 0;
  virtual double kl(double t1, double t2) const = 0;
  // Per-signal standard deviation of log(l(s|t1)/l(s|t2)) when s is drawn at
  // theta_true.
  virtual double llr_std(double t1, double t2, double theta_true) const = 0;
  // Dataset size used per draw when kl is estimated by Monte Carlo. Models
  // whose likelihood couples records (partial likelihood) need blocks > 1.
  virtual int kl_block_size() const { return 1; }

  // Bound on |log_likelihood(data, theta)| over the state space; evaluated
  // exactly as the realized maximum.
  double gamma_bound(const AgentData& data, const StateSpace& space) const;
};

// States are success probabilities in (0, 1).
class BernoulliModel final : public SignalModel {
 public:
  double log_likelihood(const AgentData& data, double theta) const override;
  AgentData sample(double theta, int m, rng::Rng& g) const override;
  double sensitivity(double theta) const override;
  double kl(double t1, double t2) const override;
  double llr_std(double t1, double t2, double theta_true) const override;
};

// States are means of a unit-variance normal; signals are drawn truncated to
// [-bound, bound] so one-record sensitivity is finite. The working likelihood
// is the untruncated normal density.
class GaussianModel final : public SignalModel {
 public:
  explicit GaussianModel(double bound = 4.0) : bound_(bound) {}
  double log_likelihood(const AgentData& data, double theta) const override;
  AgentData sample(double theta, int m, rng::Rng& g) const override;
  double sensitivity(double theta) const override;
  double kl(double t1, double t2) const override;
  double llr_std(double t1, double t2, double theta_true) const override;

 private:
  double bound_;
};

// States are log hazard ratios of a proportional-hazards model; the agent
// likelihood is the partial likelihood of its local survival records.
class CoxModel final : public SignalModel {
 public:
  CoxModel(double b_theta = 1.0, double b_x = 1.0, double censor_rate = 0.0)
      : b_theta_(b_theta), b_x_(b_x), censor_rate_(censor_rate) {}
  double log_likelihood(const AgentData& data, double theta) const override;
  // Balanced binary covariates, unit-baseline exponential event times, and
  // independent exponential censoring tuned to the target censoring fraction.
  AgentData sample(double theta, int m, rng::Rng& g) const override;
  // Global bound 2 * b_theta * b_x; the partial likelihood's record
  // sensitivity does not vanish at theta = 0 (risk-set sizes shift), so no
  // per-state tightening is applied.
  double sensitivity(double theta) const override;
  // Censoring-free full-likelihood divergence, used as the identifiability
  // proxy for schedules: 0.5 * ((t1 - t2) + exp(t2 - t1) - 1).
  double kl(double t1, double t2) const override;
  double llr_std(double t1, double t2, double theta_true) const override;
  int kl_block_size() const override { return 64; }

  double b_theta() const { return b_theta_; }
  double b_x() const { return b_x_; }

 private:
  double b_theta_, b_x_, censor_rate_;
};

double bernoulli_log_likelihood(const BitData& bits, double p);

struct CoxLogLik {
  double value = 0.0;
  bool no_events = false;
};
// Breslow-style partial log-likelihood with tied times sharing a full risk
// set. One descending sort plus a running log-sum-exp accumulator.
CoxLogLik cox_partial_log_likelihood(const SurvData& records, double theta);

// Analytic d/dtheta of the partial log-likelihood (same sweep, plain running
// sums; terms are bounded so no rescaling is needed).
double cox_gradient(const SurvData& records, double theta);

struct CoxFit {
  double theta_hat = 0.0;
  bool identifiable = true;
};
// Maximize the ridge-regularized partial log-likelihood over
// [-b_theta, b_theta] by golden-section search (argument tolerance 1e-8).
// The ridge term only steers the fit; callers evaluate likelihoods without it.
CoxFit cox_fit_mle(const SurvData& records, double b_theta, double ridge = 0.05);

struct KlEstimate {
  double value = 0.0;
  double std_error = 0.0;
};
// mc_samples == 0: the model's closed form. Otherwise a Monte Carlo estimate
// with its standard error.
KlEstimate model_kl(const SignalModel& model, double t1, double t2,
                    int mc_samples, rng::Rng* g);

// Instance constants feeding the round/iteration schedules:
//   Gamma — max over agents/states of |log-likelihood| of the realized data;
//   l     — min over (wrong state, optimal state) of sum_i xi_i * KL_i;
//   Q     — max per-signal log-likelihood-ratio standard deviation (worst
//           case over candidate true states);
//   Delta — max per-state one-record sensitivity.
struct Constants {
  double Gamma = 0.0, l = 0.0, Q = 0.0, Delta = 0.0;
};

Constants constants_for_mle(const std::vector<const SignalModel*>& models,
                            const std::vector<AgentData>& data,
                            const StateSpace& space,
                            const std::vector<int>& theta_star_idx);

Constants constants_for_online(const std::vector<const SignalModel*>& models,
                               const std::vector<double>& xi,
                               const StateSpace& space, int theta_true_idx);

}  // namespace dpi::models
