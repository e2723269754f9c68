#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpi/graph.hpp"
#include "dpi/mle.hpp"
#include "dpi/models.hpp"
#include "dpi/online.hpp"

namespace dpi::harness {

struct TopologySpec {
  std::string name = "complete";  // complete | path | cycle | erdos-renyi | edges
  int n = 5;
  double p = 0.5;           // erdos-renyi edge probability
  std::uint64_t seed = 1;   // erdos-renyi draw seed
  std::vector<graph::Edge> edges;  // explicit edge list (name == "edges")
};

struct ModelSpec {
  std::string type = "bernoulli";  // bernoulli | gaussian | cox
  std::vector<double> states;
  int true_state = 0;
  int signals_per_agent = 1;
  // Cox-specific knobs.
  int records_per_center = 40;
  double censor_rate = 0.0;
  double b_theta = 1.0, b_x = 1.0;
  double theta_true = 0.5;
  double gaussian_bound = 4.0;
};

struct TargetSpec {
  double alpha = 0.1;  // subset-guarantee failure budget
  double beta = 0.9;   // superset-guarantee success target
  double eta = 0.1;    // online failure budget
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int replications = 100;
  std::string out_dir;
  std::string algo = "am-gm";  // am-gm | two-threshold | online
  TopologySpec topology;
  ModelSpec model;
  TargetSpec targets;
  double epsilon = 1.0;
  // 0: schedule with the realized |Theta*|; -1: schedule for unknown
  // |Theta*|; > 0: explicit value.
  int theta_star_size = 0;
  bool poisson_signals = false;
  bool record_trajectories = false;
  mle::ThresholdParams threshold;
  mle::ScheduleOverrides overrides;
};

// Strict parser: unknown keys anywhere are configuration errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

graph::Network build_topology(const TopologySpec& spec);

// One shared model instance (they are stateless) exposed per-agent.
struct ModelBundle {
  std::unique_ptr<models::SignalModel> owned;
  std::vector<const models::SignalModel*> agents;
  models::StateSpace space;
};
ModelBundle make_models(const ModelSpec& spec, int n);

// Per-replication synthetic datasets drawn under the configured true state.
std::vector<models::AgentData> synth_data(const ModelSpec& spec, int n,
                                          std::uint64_t seed,
                                          std::uint64_t rep);

// Survival CSV with header "time,event,covariate" or
// "time,event,covariate,center". Without a center column the records are
// dealt into n_centers seeded pseudo-random equal shares.
std::vector<models::SurvData> load_survival_csv(const std::string& path,
                                                int n_centers,
                                                std::uint64_t seed);
void write_survival_csv(const std::string& path,
                        const std::vector<models::SurvData>& centers);
std::vector<models::SurvData> synth_survival(const ModelSpec& spec, int n,
                                             std::uint64_t seed);

// The states Theta* the guarantees speak about: minimizers of the
// xi-weighted KL divergence from the true state.
std::vector<int> optimal_state_set(
    const std::vector<const models::SignalModel*>& models,
    const std::vector<double>& xi, const models::StateSpace& space,
    int true_state);

struct CiValue {
  double estimate = 0.0, lo = 0.0, hi = 0.0;
  int successes = 0, trials = 0;
};
CiValue wilson_ci(int successes, int trials);

struct MleMcSummary {
  int replications = 0;
  int aborts = 0;  // reps lost to numerical failure, counted as misses
  std::vector<int> theta_star;
  CiValue gm_subset;    // all agents: GM set inside Theta*
  CiValue am_superset;  // all agents: Theta* inside AM set
  CiValue sandwich;     // both at once
  CiValue thr1_superset, thr2_subset;  // two-threshold votes, when scheduled
  mle::MleSchedule schedule;           // from the first replication
  // Mean over agents of TVD(private GM belief, noiseless belief) per round,
  // measured on the first replication when trajectories are recorded.
  std::vector<double> tvd_gm;
};
MleMcSummary monte_carlo_mle(const ExperimentConfig& cfg);

struct OnlineMcSummary {
  int replications = 0;
  int aborts = 0;
  CiValue all_correct;               // every agent's argmax is the true state
  std::vector<double> mean_avg_ratio;  // per state, over agents and reps
  online::OnlineSchedule schedule;
};
OnlineMcSummary monte_carlo_online(const ExperimentConfig& cfg);

nlohmann::ordered_json report_mle(const ExperimentConfig& cfg,
                                  const MleMcSummary& s);
nlohmann::ordered_json report_online(const ExperimentConfig& cfg,
                                     const OnlineMcSummary& s);

void write_json(const std::string& path, const nlohmann::ordered_json& j);
// Long-format log-beliefs: round,agent,state,chain,log_belief.
void write_beliefs_csv(const std::string& path,
                       const std::vector<std::vector<Eigen::MatrixXd>>& traj);
void write_tvd_csv(const std::string& path, const std::vector<double>& tvd);

}  // namespace dpi::harness
