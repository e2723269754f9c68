#include "dpi/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "dpi/errors.hpp"
#include "dpi/rng.hpp"
#include "dpi/stats.hpp"

namespace dpi::harness {

namespace {

constexpr std::uint64_t kDataTag = 0x64617461;
constexpr std::uint64_t kSplitTag = 0x73706c69;

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw ConfigError("config: unknown key \"" + key + "\" in " + where);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_optional(const json& j, const char* key, std::optional<int>& out) {
  if (j.contains(key)) out = j.at(key).get<int>();
}

void read_optional(const json& j, const char* key,
                   std::optional<double>& out) {
  if (j.contains(key)) out = j.at(key).get<double>();
}

TopologySpec topology_from_json(const json& j) {
  check_keys(j, "topology", {"name", "n", "p", "seed", "edges"});
  TopologySpec t;
  read_field(j, "name", t.name);
  read_field(j, "n", t.n);
  read_field(j, "p", t.p);
  read_field(j, "seed", t.seed);
  if (j.contains("edges")) {
    t.name = "edges";
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) {
        throw ConfigError("config: each edge must be a pair [a, b]");
      }
      t.edges.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  }
  return t;
}

ModelSpec model_from_json(const json& j) {
  check_keys(j, "model",
             {"type", "states", "true_state", "signals_per_agent",
              "records_per_center", "censor_rate", "b_theta", "b_x",
              "theta_true", "gaussian_bound"});
  ModelSpec m;
  read_field(j, "type", m.type);
  read_field(j, "states", m.states);
  read_field(j, "true_state", m.true_state);
  read_field(j, "signals_per_agent", m.signals_per_agent);
  read_field(j, "records_per_center", m.records_per_center);
  read_field(j, "censor_rate", m.censor_rate);
  read_field(j, "b_theta", m.b_theta);
  read_field(j, "b_x", m.b_x);
  read_field(j, "theta_true", m.theta_true);
  read_field(j, "gaussian_bound", m.gaussian_bound);
  return m;
}

json ci_to_json(const CiValue& v) {
  return json{{"estimate", v.estimate},
              {"wilson_lo", v.lo},
              {"wilson_hi", v.hi},
              {"successes", v.successes},
              {"trials", v.trials}};
}

// Row-renormalized across-chain geometric mean of log-beliefs.
Eigen::MatrixXd gm_log(const std::vector<Eigen::MatrixXd>& per_chain) {
  Eigen::MatrixXd acc = per_chain[0];
  for (std::size_t k = 1; k < per_chain.size(); ++k) acc += per_chain[k];
  acc /= static_cast<double>(per_chain.size());
  for (Eigen::Index i = 0; i < acc.rows(); ++i) {
    std::vector<double> row(acc.cols());
    for (Eigen::Index s = 0; s < acc.cols(); ++s) row[s] = acc(i, s);
    acc.row(i).array() -= stats::logsumexp(row);
  }
  return acc;
}

double mean_row_tvd(const Eigen::MatrixXd& log_a, const Eigen::MatrixXd& log_b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < log_a.rows(); ++i) {
    std::vector<double> pa(log_a.cols()), pb(log_b.cols());
    for (Eigen::Index s = 0; s < log_a.cols(); ++s) {
      pa[s] = std::exp(log_a(i, s));
      pb[s] = std::exp(log_b(i, s));
    }
    total += stats::tvd(pa, pb);
  }
  return total / static_cast<double>(log_a.rows());
}

bool subset_of(const std::vector<int>& small, const std::vector<int>& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

std::unique_ptr<models::SignalModel> instantiate(const ModelSpec& spec) {
  if (spec.type == "bernoulli") return std::make_unique<models::BernoulliModel>();
  if (spec.type == "gaussian") {
    return std::make_unique<models::GaussianModel>(spec.gaussian_bound);
  }
  if (spec.type == "cox") {
    return std::make_unique<models::CoxModel>(spec.b_theta, spec.b_x,
                                              spec.censor_rate);
  }
  throw ConfigError("config: unknown model type \"" + spec.type + "\"");
}

models::StateSpace space_for(const ModelSpec& spec) {
  models::StateSpace space;
  space.states = spec.states;
  if (space.states.empty()) {
    if (spec.type == "cox") {
      space.states = {0.0, spec.theta_true};
    } else {
      throw ConfigError("config: model.states must be nonempty");
    }
  }
  if (spec.true_state < 0 || spec.true_state >= space.size()) {
    throw ConfigError("config: model.true_state out of range");
  }
  return space;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

void ensure_parent_dir(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
  try {
    check_keys(j, "the top level",
               {"seed", "replications", "out_dir", "algo", "topology", "model",
                "targets", "privacy", "theta_star_size", "poisson_signals",
                "record_trajectories", "threshold", "overrides"});
    ExperimentConfig cfg;
    read_field(j, "seed", cfg.seed);
    read_field(j, "replications", cfg.replications);
    read_field(j, "out_dir", cfg.out_dir);
    read_field(j, "algo", cfg.algo);
    if (j.contains("topology")) cfg.topology = topology_from_json(j.at("topology"));
    if (j.contains("model")) cfg.model = model_from_json(j.at("model"));
    if (j.contains("targets")) {
      const auto& t = j.at("targets");
      check_keys(t, "targets", {"alpha", "beta", "eta"});
      read_field(t, "alpha", cfg.targets.alpha);
      read_field(t, "beta", cfg.targets.beta);
      read_field(t, "eta", cfg.targets.eta);
    }
    if (j.contains("privacy")) {
      const auto& p = j.at("privacy");
      check_keys(p, "privacy", {"epsilon"});
      read_field(p, "epsilon", cfg.epsilon);
    }
    read_field(j, "theta_star_size", cfg.theta_star_size);
    read_field(j, "poisson_signals", cfg.poisson_signals);
    read_field(j, "record_trajectories", cfg.record_trajectories);
    if (j.contains("threshold")) {
      const auto& t = j.at("threshold");
      check_keys(t, "threshold", {"q1", "q2", "pi1", "pi2", "single"});
      read_field(t, "q1", cfg.threshold.q1);
      read_field(t, "q2", cfg.threshold.q2);
      read_field(t, "pi1", cfg.threshold.pi1);
      read_field(t, "pi2", cfg.threshold.pi2);
      read_field(t, "single", cfg.threshold.single);
    }
    if (j.contains("overrides")) {
      const auto& o = j.at("overrides");
      check_keys(o, "overrides",
                 {"K", "T", "noise_scale", "rho_am", "rho_gm", "rho_thr1",
                  "rho_thr2"});
      read_optional(o, "K", cfg.overrides.K);
      read_optional(o, "T", cfg.overrides.T);
      read_optional(o, "noise_scale", cfg.overrides.noise_scale);
      read_optional(o, "rho_am", cfg.overrides.rho_am);
      read_optional(o, "rho_gm", cfg.overrides.rho_gm);
      read_optional(o, "rho_thr1", cfg.overrides.rho_thr1);
      read_optional(o, "rho_thr2", cfg.overrides.rho_thr2);
    }
    if (cfg.replications < 1) throw ConfigError("config: replications must be >= 1");
    if (cfg.algo != "am-gm" && cfg.algo != "two-threshold" &&
        cfg.algo != "online") {
      throw ConfigError("config: algo must be am-gm, two-threshold or online");
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

graph::Network build_topology(const TopologySpec& spec) {
  if (spec.n < 1) throw ConfigError("config: topology.n must be >= 1");
  std::vector<graph::Edge> edges;
  if (spec.name == "complete") {
    edges = graph::complete_edges(spec.n);
  } else if (spec.name == "path") {
    edges = graph::path_edges(spec.n);
  } else if (spec.name == "cycle") {
    edges = graph::cycle_edges(spec.n);
  } else if (spec.name == "erdos-renyi") {
    edges = graph::erdos_renyi_edges(spec.n, spec.p, spec.seed);
  } else if (spec.name == "edges") {
    edges = spec.edges;
  } else {
    throw ConfigError("config: unknown topology \"" + spec.name + "\"");
  }
  return graph::build_network(edges, spec.n, graph::WeightScheme::Metropolis);
}

ModelBundle make_models(const ModelSpec& spec, int n) {
  ModelBundle b;
  b.space = space_for(spec);
  b.owned = instantiate(spec);
  b.agents.assign(n, b.owned.get());
  return b;
}

std::vector<models::AgentData> synth_data(const ModelSpec& spec, int n,
                                          std::uint64_t seed,
                                          std::uint64_t rep) {
  const auto space = space_for(spec);
  const auto model = instantiate(spec);
  const double truth = space.states[spec.true_state];
  const int m =
      spec.type == "cox" ? spec.records_per_center : spec.signals_per_agent;
  if (m < 1) throw ConfigError("config: need at least one signal per agent");
  std::vector<models::AgentData> data;
  data.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto g = rng::Rng::substream(seed,
                                 {kDataTag, rep, static_cast<std::uint64_t>(i)});
    data.push_back(model->sample(truth, m, g));
  }
  return data;
}

std::vector<models::SurvData> load_survival_csv(const std::string& path,
                                                int n_centers,
                                                std::uint64_t seed) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError(path + ": empty file");
  const auto header = split_csv_line(line);
  bool has_center = false;
  if (header.size() == 4 && header[3] == "center") {
    has_center = true;
  } else if (header.size() != 3) {
    throw ConfigError(path + ": header must be time,event,covariate[,center]");
  }
  if (header[0] != "time" || header[1] != "event" || header[2] != "covariate") {
    throw ConfigError(path + ": header must be time,event,covariate[,center]");
  }

  std::vector<models::SurvivalRecord> records;
  std::vector<int> center_of;
  int max_center = -1;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    const auto fail = [&](const std::string& why) -> ConfigError {
      return ConfigError(path + ":" + std::to_string(line_no) + ": " + why);
    };
    if (cells.size() != header.size()) throw fail("wrong number of columns");
    models::SurvivalRecord r;
    try {
      r.time = std::stod(cells[0]);
      r.event = std::stoi(cells[1]);
      r.covariate = std::stod(cells[2]);
      if (has_center) {
        const int c = std::stoi(cells[3]);
        if (c < 0) throw fail("center must be nonnegative");
        center_of.push_back(c);
        max_center = std::max(max_center, c);
      }
    } catch (const std::invalid_argument&) {
      throw fail("malformed number");
    } catch (const std::out_of_range&) {
      throw fail("number out of range");
    }
    if (!(r.time > 0.0)) throw fail("time must be positive");
    if (r.event != 0 && r.event != 1) throw fail("event must be 0 or 1");
    records.push_back(r);
  }
  if (records.empty()) throw ConfigError(path + ": no records");

  if (has_center) {
    std::vector<models::SurvData> centers(max_center + 1);
    for (std::size_t i = 0; i < records.size(); ++i) {
      centers[center_of[i]].push_back(records[i]);
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (centers[c].empty()) {
        throw ConfigError(path + ": center " + std::to_string(c) +
                          " has no records");
      }
    }
    return centers;
  }

  if (n_centers < 1) throw ConfigError("need n_centers >= 1 to split " + path);
  // Seeded Fisher-Yates, then deal round-robin: a deterministic equal split.
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto g = rng::Rng::substream(seed, {kSplitTag});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[g.next_below(i)]);
  }
  std::vector<models::SurvData> centers(n_centers);
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    centers[pos % n_centers].push_back(records[order[pos]]);
  }
  for (int c = 0; c < n_centers; ++c) {
    if (centers[c].empty()) {
      throw ConfigError(path + ": fewer records than centers");
    }
  }
  return centers;
}

void write_survival_csv(const std::string& path,
                        const std::vector<models::SurvData>& centers) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw RunError("cannot write " + path);
  f << "time,event,covariate,center\n";
  f.precision(17);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    for (const auto& r : centers[c]) {
      f << r.time << ',' << r.event << ',' << r.covariate << ',' << c << '\n';
    }
  }
}

std::vector<models::SurvData> synth_survival(const ModelSpec& spec, int n,
                                             std::uint64_t seed) {
  models::CoxModel model(spec.b_theta, spec.b_x, spec.censor_rate);
  std::vector<models::SurvData> centers;
  centers.reserve(n);
  for (int i = 0; i < n; ++i) {
    auto g = rng::Rng::substream(
        seed, {kDataTag, 0, static_cast<std::uint64_t>(i)});
    centers.push_back(std::get<models::SurvData>(
        model.sample(spec.theta_true, spec.records_per_center, g)));
  }
  return centers;
}

std::vector<int> optimal_state_set(
    const std::vector<const models::SignalModel*>& model_ptrs,
    const std::vector<double>& xi, const models::StateSpace& space,
    int true_state) {
  if (true_state < 0 || true_state >= space.size()) {
    throw ConfigError("true_state out of range");
  }
  const double truth = space.states[true_state];
  std::vector<double> div(space.size(), 0.0);
  for (int s = 0; s < space.size(); ++s) {
    for (std::size_t i = 0; i < model_ptrs.size(); ++i) {
      div[s] += xi[i] * model_ptrs[i]->kl(truth, space.states[s]);
    }
  }
  const double best = *std::min_element(div.begin(), div.end());
  std::vector<int> out;
  for (int s = 0; s < space.size(); ++s) {
    if (div[s] <= best + 1e-12 * std::max(1.0, std::fabs(best))) {
      out.push_back(s);
    }
  }
  return out;
}

CiValue wilson_ci(int successes, int trials) {
  CiValue v;
  v.successes = successes;
  v.trials = trials;
  v.estimate = trials > 0 ? static_cast<double>(successes) / trials : 0.0;
  const auto [lo, hi] = stats::wilson(successes, trials);
  v.lo = lo;
  v.hi = hi;
  return v;
}

MleMcSummary monte_carlo_mle(const ExperimentConfig& cfg) {
  if (cfg.algo == "online") {
    throw ConfigError("monte_carlo_mle: config requests the online algorithm");
  }
  const graph::Network net = build_topology(cfg.topology);
  const ModelBundle bundle = make_models(cfg.model, net.n);
  const int m = cfg.model.type == "cox" ? cfg.model.records_per_center
                                        : cfg.model.signals_per_agent;
  const std::vector<double> xi(net.n, static_cast<double>(m));
  const bool with_thr = cfg.algo == "two-threshold";

  MleMcSummary sum;
  sum.replications = cfg.replications;
  sum.theta_star = optimal_state_set(bundle.agents, xi, bundle.space,
                                     cfg.model.true_state);
  const int sched_star_size = cfg.theta_star_size != 0
                                  ? cfg.theta_star_size
                                  : static_cast<int>(sum.theta_star.size());

  int gm_ok = 0, am_ok = 0, both_ok = 0, thr1_ok = 0, thr2_ok = 0;
  bool have_schedule = false;
  for (int rep = 0; rep < cfg.replications; ++rep) {
    const auto data = synth_data(cfg.model, net.n, cfg.seed,
                                 static_cast<std::uint64_t>(rep));
    try {
      const auto c = models::constants_for_mle(bundle.agents, data,
                                               bundle.space, sum.theta_star);
      const auto sched = mle::compute_mle_schedule(
          cfg.epsilon, cfg.targets.alpha, cfg.targets.beta, c, net,
          bundle.space.size(), sched_star_size, with_thr, cfg.threshold,
          cfg.overrides);
      if (!have_schedule) {
        sum.schedule = sched;
        have_schedule = true;
      }
      mle::MleOptions opt;
      opt.seed = cfg.seed;
      opt.rep = static_cast<std::uint64_t>(rep);
      opt.record_traj = cfg.record_trajectories && rep == 0;
      const auto res = with_thr
                           ? mle::run_mle_two_threshold(bundle.agents, data,
                                                        net, bundle.space,
                                                        sched, opt)
                           : mle::run_mle_am_gm(bundle.agents, data, net,
                                                bundle.space, sched, opt);
      bool gm_in = true, am_sup = true, t1_sup = true, t2_in = true;
      for (int i = 0; i < net.n; ++i) {
        gm_in = gm_in && subset_of(res.gm_set[i], sum.theta_star);
        am_sup = am_sup && subset_of(sum.theta_star, res.am_set[i]);
        if (with_thr) {
          t1_sup = t1_sup && subset_of(sum.theta_star, res.thr_set1[i]);
          t2_in = t2_in && subset_of(res.thr_set2[i], sum.theta_star);
        }
      }
      gm_ok += gm_in;
      am_ok += am_sup;
      both_ok += gm_in && am_sup;
      if (with_thr) {
        thr1_ok += t1_sup;
        thr2_ok += t2_in;
      }

      if (opt.record_traj) {
        const auto np = mle::run_mle_nonprivate(bundle.agents, data, net,
                                                bundle.space, sched.T, -1.0,
                                                true);
        for (int t = 0; t <= sched.T; ++t) {
          std::vector<Eigen::MatrixXd> per_chain;
          per_chain.reserve(sched.K);
          for (int k = 0; k < sched.K; ++k) {
            per_chain.push_back(res.rounds.traj[k][t]);
          }
          sum.tvd_gm.push_back(
              mean_row_tvd(gm_log(per_chain), np.rounds.traj[0][t]));
        }
      }
    } catch (const RunError&) {
      ++sum.aborts;
    }
  }
  if (10 * sum.aborts > cfg.replications) {
    throw RunError("more than 10% of replications aborted numerically");
  }
  sum.gm_subset = wilson_ci(gm_ok, cfg.replications);
  sum.am_superset = wilson_ci(am_ok, cfg.replications);
  sum.sandwich = wilson_ci(both_ok, cfg.replications);
  if (with_thr) {
    sum.thr1_superset = wilson_ci(thr1_ok, cfg.replications);
    sum.thr2_subset = wilson_ci(thr2_ok, cfg.replications);
  }
  return sum;
}

OnlineMcSummary monte_carlo_online(const ExperimentConfig& cfg) {
  if (cfg.algo != "online") {
    throw ConfigError("monte_carlo_online: config requests a batch algorithm");
  }
  const graph::Network net = build_topology(cfg.topology);
  const ModelBundle bundle = make_models(cfg.model, net.n);
  if (cfg.model.signals_per_agent < 1) {
    throw ConfigError("config: need at least one signal per agent per step");
  }
  const std::vector<double> xi(net.n,
                               static_cast<double>(cfg.model.signals_per_agent));
  const auto c = models::constants_for_online(bundle.agents, xi, bundle.space,
                                              cfg.model.true_state);
  OnlineMcSummary sum;
  sum.replications = cfg.replications;
  sum.schedule = online::compute_online_schedule(cfg.epsilon, cfg.targets.eta,
                                                 c, xi, cfg.poisson_signals,
                                                 net, bundle.space.size());
  online::StreamConfig stream;
  stream.xi = xi;
  stream.poisson = cfg.poisson_signals;
  stream.theta_true_idx = cfg.model.true_state;

  int correct = 0;
  std::vector<double> ratio_acc(bundle.space.size(), 0.0);
  long ratio_count = 0;
  for (int rep = 0; rep < cfg.replications; ++rep) {
    try {
      const auto res = online::run_online(bundle.agents, stream, net,
                                          bundle.space, sum.schedule, cfg.seed,
                                          static_cast<std::uint64_t>(rep));
      correct += res.all_correct;
      for (int s = 0; s < bundle.space.size(); ++s) {
        ratio_acc[s] += res.avg_ratio.col(s).mean();
      }
      ++ratio_count;
    } catch (const RunError&) {
      ++sum.aborts;
    }
  }
  if (10 * sum.aborts > cfg.replications) {
    throw RunError("more than 10% of replications aborted numerically");
  }
  sum.all_correct = wilson_ci(correct, cfg.replications);
  sum.mean_avg_ratio.resize(bundle.space.size(), 0.0);
  if (ratio_count > 0) {
    for (int s = 0; s < bundle.space.size(); ++s) {
      sum.mean_avg_ratio[s] = ratio_acc[s] / static_cast<double>(ratio_count);
    }
  }
  return sum;
}

namespace {

nlohmann::ordered_json experiment_block(const ExperimentConfig& cfg) {
  nlohmann::ordered_json e;
  e["algo"] = cfg.algo;
  e["epsilon"] = cfg.epsilon;
  e["seed"] = cfg.seed;
  e["replications"] = cfg.replications;
  e["topology"] = {{"name", cfg.topology.name}, {"n", cfg.topology.n}};
  e["model"] = {{"type", cfg.model.type},
                {"states", cfg.model.states},
                {"true_state", cfg.model.true_state},
                {"signals_per_agent", cfg.model.signals_per_agent}};
  e["targets"] = {{"alpha", cfg.targets.alpha},
                  {"beta", cfg.targets.beta},
                  {"eta", cfg.targets.eta}};
  return e;
}

}  // namespace

nlohmann::ordered_json report_mle(const ExperimentConfig& cfg,
                                  const MleMcSummary& s) {
  nlohmann::ordered_json r;
  r["experiment"] = experiment_block(cfg);
  nlohmann::ordered_json sched;
  sched["K"] = s.schedule.K;
  sched["T"] = s.schedule.T;
  sched["noise_scale"] = s.schedule.noise_scale;
  sched["rho_am"] = s.schedule.rho_am;
  sched["rho_gm"] = s.schedule.rho_gm;
  sched["tau_am"] = s.schedule.tau_am;
  sched["tau_gm"] = s.schedule.tau_gm;
  if (s.schedule.with_threshold) {
    sched["rho_thr1"] = s.schedule.rho_thr1;
    sched["rho_thr2"] = s.schedule.rho_thr2;
    sched["tau_thr1"] = s.schedule.tau_thr1;
    sched["tau_thr2"] = s.schedule.tau_thr2;
  }
  sched["constants"] = {{"Gamma", s.schedule.constants.Gamma},
                        {"l", s.schedule.constants.l},
                        {"Q", s.schedule.constants.Q},
                        {"Delta", s.schedule.constants.Delta}};
  r["schedule"] = sched;
  r["theta_star"] = s.theta_star;
  nlohmann::ordered_json res;
  res["gm_subset"] = ci_to_json(s.gm_subset);
  res["am_superset"] = ci_to_json(s.am_superset);
  res["sandwich"] = ci_to_json(s.sandwich);
  if (s.schedule.with_threshold) {
    res["thr1_superset"] = ci_to_json(s.thr1_superset);
    res["thr2_subset"] = ci_to_json(s.thr2_subset);
  }
  res["aborts"] = s.aborts;
  r["results"] = res;
  if (!s.tvd_gm.empty()) r["tvd_gm"] = s.tvd_gm;
  return r;
}

nlohmann::ordered_json report_online(const ExperimentConfig& cfg,
                                     const OnlineMcSummary& s) {
  nlohmann::ordered_json r;
  r["experiment"] = experiment_block(cfg);
  r["schedule"] = {{"T", s.schedule.T},
                   {"noise_scale", s.schedule.noise_scale},
                   {"rho", s.schedule.rho},
                   {"eta", s.schedule.eta},
                   {"V_prime", s.schedule.V_prime},
                   {"constants",
                    {{"Gamma", s.schedule.constants.Gamma},
                     {"l", s.schedule.constants.l},
                     {"Q", s.schedule.constants.Q},
                     {"Delta", s.schedule.constants.Delta}}}};
  nlohmann::ordered_json res;
  res["all_correct"] = ci_to_json(s.all_correct);
  res["mean_avg_ratio"] = s.mean_avg_ratio;
  res["aborts"] = s.aborts;
  r["results"] = res;
  return r;
}

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw RunError("cannot write " + path);
  f << j.dump(2) << '\n';
}

void write_beliefs_csv(const std::string& path,
                       const std::vector<std::vector<Eigen::MatrixXd>>& traj) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw RunError("cannot write " + path);
  f << "round,agent,state,chain,log_belief\n";
  f.precision(17);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    for (std::size_t t = 0; t < traj[k].size(); ++t) {
      const auto& m = traj[k][t];
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index s = 0; s < m.cols(); ++s) {
          f << t << ',' << i << ',' << s << ',' << k << ',' << m(i, s) << '\n';
        }
      }
    }
  }
}

void write_tvd_csv(const std::string& path, const std::vector<double>& tvd) {
  ensure_parent_dir(path);
  std::ofstream f(path);
  if (!f) throw RunError("cannot write " + path);
  f << "round,tvd\n";
  f.precision(17);
  for (std::size_t t = 0; t < tvd.size(); ++t) {
    f << t << ',' << tvd[t] << '\n';
  }
}

}  // namespace dpi::harness
