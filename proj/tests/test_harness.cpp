#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "dpi/errors.hpp"
#include "dpi/harness.hpp"
#include "dpi/models.hpp"

using namespace dpi;
using nlohmann::json;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("dpi_test_" + std::to_string(std::rand()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

json base_config() {
  return json{
      {"seed", 7},
      {"replications", 4},
      {"algo", "am-gm"},
      {"privacy", {{"epsilon", 2.0}}},
      {"topology", {{"name", "complete"}, {"n", 4}}},
      {"model",
       {{"type", "bernoulli"},
        {"states", {0.3, 0.7}},
        {"true_state", 1},
        {"signals_per_agent", 40}}},
      {"targets", {{"alpha", 0.1}, {"beta", 0.9}}},
  };
}

}  // namespace

TEST_CASE("config: json round-trip of the main fields") {
  const auto cfg = harness::config_from_json(base_config());
  CHECK(cfg.seed == 7);
  CHECK(cfg.replications == 4);
  CHECK(cfg.algo == "am-gm");
  CHECK(cfg.epsilon == 2.0);
  CHECK(cfg.topology.name == "complete");
  CHECK(cfg.topology.n == 4);
  CHECK(cfg.model.type == "bernoulli");
  CHECK(cfg.model.states == std::vector<double>{0.3, 0.7});
  CHECK(cfg.model.true_state == 1);
  CHECK(cfg.model.signals_per_agent == 40);
  CHECK(cfg.targets.alpha == 0.1);
  CHECK(cfg.targets.beta == 0.9);
  // Defaults survive when sections are absent.
  CHECK(cfg.theta_star_size == 0);
  CHECK_FALSE(cfg.poisson_signals);
}

TEST_CASE("config: unknown keys are rejected with their location") {
  auto top = base_config();
  top["replicas"] = 3;  // typo for replications
  CHECK_THROWS_WITH_AS(harness::config_from_json(top),
                       doctest::Contains("replicas"), ConfigError);

  auto nested = base_config();
  nested["model"]["stats"] = {0.1};  // typo for states
  CHECK_THROWS_WITH_AS(harness::config_from_json(nested),
                       doctest::Contains("stats"), ConfigError);

  auto bad_algo = base_config();
  bad_algo["algo"] = "gradient";
  CHECK_THROWS_AS(harness::config_from_json(bad_algo), ConfigError);
}

TEST_CASE("config: overrides and thresholds parse") {
  auto j = base_config();
  j["algo"] = "two-threshold";
  j["threshold"] = {{"q1", 0.2}, {"q2", 0.8}, {"single", true}};
  j["overrides"] = {{"K", 9}, {"noise_scale", 0.0}};
  const auto cfg = harness::config_from_json(j);
  CHECK(cfg.algo == "two-threshold");
  CHECK(cfg.threshold.q1 == 0.2);
  CHECK(cfg.threshold.single);
  REQUIRE(cfg.overrides.K.has_value());
  CHECK(*cfg.overrides.K == 9);
  REQUIRE(cfg.overrides.noise_scale.has_value());
  CHECK(*cfg.overrides.noise_scale == 0.0);
  CHECK_FALSE(cfg.overrides.T.has_value());
}

TEST_CASE("topology builder covers the named families") {
  harness::TopologySpec complete;
  complete.name = "complete";
  complete.n = 6;
  CHECK(harness::build_topology(complete).n == 6);
  harness::TopologySpec path;
  path.name = "path";
  path.n = 3;
  CHECK(harness::build_topology(path).slem_lazy ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-12));
  harness::TopologySpec er;
  er.name = "erdos-renyi";
  er.n = 8;
  er.p = 0.4;
  er.seed = 3;
  const auto a = harness::build_topology(er);
  const auto b = harness::build_topology(er);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);

  harness::TopologySpec edges;
  edges.name = "edges";
  edges.n = 3;
  edges.edges = {{0, 1}, {1, 2}};
  CHECK(harness::build_topology(edges).slem_lazy ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-12));

  harness::TopologySpec bad;
  bad.name = "torus";
  CHECK_THROWS_AS(harness::build_topology(bad), ConfigError);
}

TEST_CASE("model bundle exposes one instance per agent") {
  harness::ModelSpec spec;
  spec.type = "bernoulli";
  spec.states = {0.3, 0.7};
  const auto bundle = harness::make_models(spec, 5);
  REQUIRE(bundle.agents.size() == 5);
  CHECK(bundle.space.states == std::vector<double>{0.3, 0.7});
  for (const auto* m : bundle.agents) CHECK(m == bundle.agents[0]);

  harness::ModelSpec cox;
  cox.type = "cox";
  cox.theta_true = 0.5;
  const auto cb = harness::make_models(cox, 3);
  CHECK(cb.space.states == std::vector<double>{0.0, 0.5});

  harness::ModelSpec bad;
  bad.type = "poisson";
  CHECK_THROWS_AS(harness::make_models(bad, 3), ConfigError);
}

TEST_CASE("synthetic data is deterministic in (seed, rep) and agent-specific") {
  harness::ModelSpec spec;
  spec.type = "bernoulli";
  spec.states = {0.3, 0.7};
  spec.true_state = 1;
  spec.signals_per_agent = 25;
  const auto a = harness::synth_data(spec, 3, 11, 0);
  const auto b = harness::synth_data(spec, 3, 11, 0);
  const auto c = harness::synth_data(spec, 3, 11, 1);
  REQUIRE(a.size() == 3);
  auto bits = [](const models::AgentData& d) {
    return std::get<models::BitData>(d);
  };
  for (int i = 0; i < 3; ++i) CHECK(bits(a[i]) == bits(b[i]));
  CHECK(bits(a[0]) != bits(c[0]));
  CHECK(models::data_size(a[0]) == 25);
  CHECK(bits(a[0]) != bits(a[1]));
}

TEST_CASE("survival csv: write/load round-trip with a center column") {
  TempDir tmp;
  harness::ModelSpec spec;
  spec.type = "cox";
  spec.records_per_center = 12;
  spec.censor_rate = 0.3;
  const auto centers = harness::synth_survival(spec, 3, 5);
  REQUIRE(centers.size() == 3);
  CHECK(centers[0].size() == 12);

  const auto path = tmp.file("surv.csv");
  harness::write_survival_csv(path, centers);
  const auto loaded = harness::load_survival_csv(path, 3, 1);
  REQUIRE(loaded.size() == 3);
  for (int i = 0; i < 3; ++i) {
    REQUIRE(loaded[i].size() == centers[i].size());
    for (std::size_t r = 0; r < centers[i].size(); ++r) {
      CHECK(loaded[i][r].time == centers[i][r].time);  // full precision
      CHECK(loaded[i][r].event == centers[i][r].event);
      CHECK(loaded[i][r].covariate == centers[i][r].covariate);
    }
  }
}

TEST_CASE("survival csv: center-free files are dealt into equal shares") {
  TempDir tmp;
  const auto path = tmp.file("flat.csv");
  {
    std::ofstream out(path);
    out << "time,event,covariate\n";
    for (int r = 0; r < 12; ++r) {
      out << (1.0 + r) << "," << (r % 2) << "," << (r % 3 == 0 ? 1 : 0) << "\n";
    }
  }
  const auto a = harness::load_survival_csv(path, 3, 42);
  const auto b = harness::load_survival_csv(path, 3, 42);
  const auto c = harness::load_survival_csv(path, 3, 43);
  REQUIRE(a.size() == 3);
  for (const auto& center : a) CHECK(center.size() == 4);
  // Seeded split is reproducible; a different seed deals differently.
  bool same = true, differs = false;
  for (int i = 0; i < 3; ++i) {
    for (std::size_t r = 0; r < 4; ++r) {
      same = same && a[i][r].time == b[i][r].time;
      differs = differs || a[i][r].time != c[i][r].time;
    }
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("survival csv: malformed rows carry line numbers") {
  TempDir tmp;
  const auto path = tmp.file("bad.csv");
  {
    std::ofstream out(path);
    out << "time,event,covariate\n1.0,1,0\n-2.0,1,1\n";
  }
  CHECK_THROWS_WITH_AS(harness::load_survival_csv(path, 2, 1),
                       doctest::Contains(":3:"), ConfigError);

  const auto path2 = tmp.file("bad2.csv");
  {
    std::ofstream out(path2);
    out << "time,event\n1.0,1\n";
  }
  CHECK_THROWS_AS(harness::load_survival_csv(path2, 2, 1), ConfigError);
  CHECK_THROWS_AS(harness::load_survival_csv(tmp.file("missing.csv"), 2, 1),
                  ConfigError);
}

TEST_CASE("optimal state set minimizes the weighted divergence") {
  models::BernoulliModel model;
  std::vector<const models::SignalModel*> ms(3, &model);
  models::StateSpace space{{0.3, 0.5, 0.7}};
  const auto star =
      harness::optimal_state_set(ms, {1.0, 1.0, 1.0}, space, 1);
  CHECK(star == std::vector<int>{1});
  // The true state is always optimal (zero divergence), ties included.
  const auto star2 =
      harness::optimal_state_set(ms, {2.0, 1.0, 1.0}, space, 0);
  CHECK(star2 == std::vector<int>{0});
}

TEST_CASE("wilson ci brackets the point estimate") {
  const auto ci = harness::wilson_ci(8, 10);
  CHECK(ci.estimate == doctest::Approx(0.8).epsilon(1e-12));
  // scipy values for the 95% Wilson interval.
  CHECK(ci.lo == doctest::Approx(0.4901624715366418).epsilon(1e-9));
  CHECK(ci.hi == doctest::Approx(0.9433178485456247).epsilon(1e-9));
  const auto zero = harness::wilson_ci(0, 10);
  CHECK(zero.lo == 0.0);
  const auto empty = harness::wilson_ci(0, 0);
  CHECK(empty.trials == 0);
}

TEST_CASE("monte carlo mle: noiseless runs succeed on every replication") {
  auto j = base_config();
  j["overrides"] = {{"noise_scale", 0.0}, {"T", 40}};
  auto cfg = harness::config_from_json(j);
  cfg.record_trajectories = true;
  const auto s = harness::monte_carlo_mle(cfg);
  CHECK(s.replications == 4);
  CHECK(s.aborts == 0);
  CHECK(s.theta_star == std::vector<int>{1});
  CHECK(s.gm_subset.successes == 4);
  CHECK(s.am_superset.successes == 4);
  CHECK(s.sandwich.successes == 4);
  CHECK(s.gm_subset.hi <= 1.0);
  CHECK(s.gm_subset.lo <= s.gm_subset.estimate);
  // Noise-free trajectories never leave the noiseless reference.
  REQUIRE_FALSE(s.tvd_gm.empty());
  for (double d : s.tvd_gm) CHECK(d <= 1e-9);
}

TEST_CASE("monte carlo mle: two-threshold votes are reported") {
  auto j = base_config();
  j["algo"] = "two-threshold";
  j["overrides"] = {{"noise_scale", 0.0}, {"T", 40}};
  const auto cfg = harness::config_from_json(j);
  const auto s = harness::monte_carlo_mle(cfg);
  CHECK(s.thr1_superset.trials == 4);
  CHECK(s.thr2_subset.trials == 4);
  CHECK(s.thr1_superset.successes == 4);
  CHECK(s.thr2_subset.successes == 4);
  CHECK(s.schedule.with_threshold);
}

TEST_CASE("monte carlo online: noiseless learning is always correct") {
  auto j = base_config();
  j["algo"] = "online";
  j["replications"] = 3;
  j["model"]["signals_per_agent"] = 30;
  j["overrides"] = json::object();
  auto cfg = harness::config_from_json(j);
  cfg.epsilon = 1e9;  // effectively noise-free
  const auto s = harness::monte_carlo_online(cfg);
  CHECK(s.replications == 3);
  CHECK(s.all_correct.successes == 3);
  REQUIRE(s.mean_avg_ratio.size() == 2);
  // True-state column is identically zero; wrong state drifts negative.
  CHECK(s.mean_avg_ratio[1] == 0.0);
  CHECK(s.mean_avg_ratio[0] < -1.0);
}

TEST_CASE("reports: identical configs produce identical documents") {
  auto j = base_config();
  j["overrides"] = {{"noise_scale", 0.0}, {"T", 30}};
  const auto cfg = harness::config_from_json(j);
  const auto s1 = harness::monte_carlo_mle(cfg);
  const auto s2 = harness::monte_carlo_mle(cfg);
  const auto r1 = harness::report_mle(cfg, s1);
  const auto r2 = harness::report_mle(cfg, s2);
  CHECK(r1.dump(2) == r2.dump(2));
  CHECK(r1.contains("schedule"));
  CHECK(r1.contains("results"));

  TempDir tmp;
  const auto path = tmp.file("report.json");
  harness::write_json(path, r1);
  std::ifstream in(path);
  json back = json::parse(in);
  CHECK(back["results"]["gm_subset"]["successes"] == 4);
}

TEST_CASE("trajectory csv writers produce well-formed tables") {
  TempDir tmp;
  std::vector<std::vector<Eigen::MatrixXd>> traj(1);
  Eigen::MatrixXd step(2, 2);
  step << -0.1, -2.0, -0.2, -1.7;
  traj[0] = {step, step};
  const auto bpath = tmp.file("beliefs.csv");
  harness::write_beliefs_csv(bpath, traj);
  std::ifstream in(bpath);
  std::string header;
  std::getline(in, header);
  CHECK(header == "round,agent,state,chain,log_belief");
  int rows = 0;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 8);  // 2 steps x 2 agents x 2 states, 1 chain

  const auto tpath = tmp.file("tvd.csv");
  harness::write_tvd_csv(tpath, {0.5, 0.25});
  std::ifstream tin(tpath);
  std::getline(tin, header);
  CHECK(header == "round,tvd");
}
