// Command-line front end: Monte Carlo drivers for the batch and streaming
// estimators, the power analysis, the survival-data hypothesis tests, the
// first-order baseline, and the communication lower bounds.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpi/baselines.hpp"
#include "dpi/errors.hpp"
#include "dpi/harness.hpp"
#include "dpi/htest.hpp"
#include "dpi/mle.hpp"
#include "dpi/online.hpp"
#include "dpi/privacy.hpp"

namespace {

using dpi::harness::ExperimentConfig;

dpi::graph::Network complete_network(int n) {
  dpi::harness::TopologySpec t;
  t.name = "complete";
  t.n = n;
  return dpi::harness::build_topology(t);
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> replications;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out-dir", f.out_dir, "directory for report/CSV output");
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--replications", f.replications,
                  "override the config replication count");
}

ExperimentConfig load_with_overrides(const CommonFlags& f) {
  ExperimentConfig cfg = dpi::harness::load_config(f.config_path);
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.seed) cfg.seed = *f.seed;
  if (f.replications) cfg.replications = *f.replications;
  return cfg;
}

void print_ci(const char* label, const dpi::harness::CiValue& v) {
  std::printf("%-18s %.4f  (wilson 95%%: %.4f..%.4f, %d/%d)\n", label,
              v.estimate, v.lo, v.hi, v.successes, v.trials);
}

int run_mle(const CommonFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const auto sum = dpi::harness::monte_carlo_mle(cfg);
  std::printf("algo=%s  eps=%g  n=%d  |Theta|=%zu  K=%d  T=%d  noise=%.4g\n",
              cfg.algo.c_str(), cfg.epsilon, cfg.topology.n,
              cfg.model.states.size(), sum.schedule.K, sum.schedule.T,
              sum.schedule.noise_scale);
  print_ci("gm_subset", sum.gm_subset);
  print_ci("am_superset", sum.am_superset);
  print_ci("sandwich", sum.sandwich);
  if (sum.schedule.with_threshold) {
    print_ci("thr1_superset", sum.thr1_superset);
    print_ci("thr2_subset", sum.thr2_subset);
  }
  if (sum.aborts > 0) std::printf("aborts: %d\n", sum.aborts);
  if (!cfg.out_dir.empty()) {
    dpi::harness::write_json(cfg.out_dir + "/report.json",
                             dpi::harness::report_mle(cfg, sum));
    if (!sum.tvd_gm.empty()) {
      dpi::harness::write_tvd_csv(cfg.out_dir + "/tvd.csv", sum.tvd_gm);
    }
    std::printf("wrote %s/report.json\n", cfg.out_dir.c_str());
  }
  return 0;
}

int run_online_cmd(const CommonFlags& flags) {
  ExperimentConfig cfg = load_with_overrides(flags);
  cfg.algo = "online";
  const auto sum = dpi::harness::monte_carlo_online(cfg);
  std::printf("algo=online  eps=%g  n=%d  |Theta|=%zu  T=%d  noise=%.4g\n",
              cfg.epsilon, cfg.topology.n, cfg.model.states.size(),
              sum.schedule.T, sum.schedule.noise_scale);
  print_ci("all_correct", sum.all_correct);
  std::printf("mean avg log-ratio per state:");
  for (double r : sum.mean_avg_ratio) std::printf(" %.5f", r);
  std::printf("\n");
  if (sum.aborts > 0) std::printf("aborts: %d\n", sum.aborts);
  if (!cfg.out_dir.empty()) {
    dpi::harness::write_json(cfg.out_dir + "/report.json",
                             dpi::harness::report_online(cfg, sum));
    std::printf("wrote %s/report.json\n", cfg.out_dir.c_str());
  }
  return 0;
}

int run_power(int n, double p, double alpha, std::vector<double> eps, int mc,
              std::uint64_t seed, const std::string& out) {
  if (eps.empty()) eps = {0.25, 0.5, 1.0, 2.0, 4.0};
  const auto curve = dpi::htest::power_curve(n, p, alpha, eps, mc, seed);
  std::printf("individual UMP power: %.6f\n", curve.individual_power);
  std::printf("%10s %12s %14s\n", "eps", "rr_power", "laplace_power");
  for (std::size_t i = 0; i < curve.eps.size(); ++i) {
    std::printf("%10.4f %12.6f %14.6f\n", curve.eps[i], curve.rr_power[i],
                curve.laplace_power[i]);
  }
  const auto edge = [](const dpi::htest::CriticalBudget& b) {
    return b.at_lower_edge ? " (at lower search edge)"
                           : (b.at_upper_edge ? " (beyond upper search edge)" : "");
  };
  std::printf("eps* (randomized response): %.4f%s\n", curve.eps_star_rr.eps_star,
              edge(curve.eps_star_rr));
  std::printf("eps* (laplace sum):         %.4f%s\n",
              curve.eps_star_laplace.eps_star, edge(curve.eps_star_laplace));
  if (!out.empty()) {
    std::filesystem::create_directories(
        std::filesystem::path(out).parent_path().empty()
            ? "."
            : std::filesystem::path(out).parent_path().string());
    std::FILE* f = std::fopen(out.c_str(), "w");
    if (!f) throw dpi::RunError("cannot write " + out);
    std::fprintf(f, "epsilon,rr_power,laplace_power,individual_power\n");
    for (std::size_t i = 0; i < curve.eps.size(); ++i) {
      std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", curve.eps[i],
                   curve.rr_power[i], curve.laplace_power[i],
                   curve.individual_power);
    }
    std::fclose(f);
    std::printf("wrote %s\n", out.c_str());
  }
  return 0;
}

void print_outcome(const char* label, const dpi::htest::TestOutcome& o) {
  std::printf("%s: statistic=%.5f threshold=%.5f -> %s", label, o.statistic,
              o.threshold, o.reject ? "REJECT" : "no rejection");
  if (!std::isnan(o.p_value)) std::printf("  (p=%.4f)", o.p_value);
  std::printf("  [family=%s, K=%d, T=%d]\n", o.family.c_str(), o.K, o.T);
}

int run_simple_test(int n, double p0, double p1, int signals, int true_state,
                    double eps, double alpha, bool bootstrap_distributed,
                    int mc, std::uint64_t seed) {
  dpi::harness::ModelSpec spec;
  spec.type = "bernoulli";
  spec.states = {p0, p1};
  spec.true_state = true_state;
  spec.signals_per_agent = signals;
  const auto net = complete_network(n);
  const auto bundle = dpi::harness::make_models(spec, n);
  const auto data = dpi::harness::synth_data(spec, n, seed, 0);
  const double delta = std::max(std::fabs(std::log(p0 / (1.0 - p0))),
                                std::fabs(std::log(p1 / (1.0 - p1))));
  const int k_est = std::max(1, static_cast<int>(std::ceil(std::log(4.0 / alpha))));
  const double eps_min =
      dpi::htest::min_epsilon_for_test_validity(delta, 2, n, k_est, alpha);
  if (eps < eps_min && !bootstrap_distributed) {
    std::printf("note: eps=%g is below the validity floor %.1f for the "
                "fixed-threshold calibration; use --bootstrap-distributed "
                "for a level-correct test at this budget.\n",
                eps, eps_min);
  }

  dpi::htest::SimpleTestConfig cfg;
  cfg.alpha = alpha;
  cfg.bootstrap_distributed = bootstrap_distributed;
  cfg.bootstrap_mc = mc;
  cfg.seed = seed;
  const auto out = dpi::htest::distributed_simple_test(
      bundle.agents, data, net, bundle.space, eps, cfg);
  print_outcome("distributed simple test", out);
  return 0;
}

std::vector<dpi::models::SurvData> load_or_synth(
    const std::string& csv, int centers, int records, double theta,
    double censor_rate, double b_theta, double b_x, std::uint64_t seed) {
  if (!csv.empty()) {
    return dpi::harness::load_survival_csv(csv, centers, seed);
  }
  dpi::harness::ModelSpec spec;
  spec.type = "cox";
  spec.records_per_center = records;
  spec.theta_true = theta;
  spec.censor_rate = censor_rate;
  spec.b_theta = b_theta;
  spec.b_x = b_x;
  return dpi::harness::synth_survival(spec, centers, seed);
}

int run_htest(const std::string& csv, int centers, int records, double theta,
              double censor_rate, double eps, double alpha, double b_theta,
              double b_x, std::uint64_t seed) {
  const auto data =
      load_or_synth(csv, centers, records, theta, censor_rate, b_theta, b_x, seed);
  const int n = static_cast<int>(data.size());
  const auto net = complete_network(n);

  const double delta = dpi::privacy::cox_sensitivity(b_theta, b_x);
  const int K = std::max(1, static_cast<int>(std::ceil(std::log(4.0 / alpha))));
  const double eps_min =
      dpi::htest::min_epsilon_for_test_validity(delta, 2, n, K, alpha);
  if (eps < eps_min) {
    std::printf("note: eps=%g is below the chi-square validity floor %.1f; "
                "the injected noise dominates the statistic and the nominal "
                "level is not guaranteed.\n",
                eps, eps_min);
  }

  dpi::htest::CompositeTestConfig cfg;
  cfg.alpha = alpha;
  cfg.b_theta = b_theta;
  cfg.b_x = b_x;
  cfg.seed = seed;
  print_outcome("distributed composite test",
                dpi::htest::distributed_composite_test(data, net, eps, cfg));
  print_outcome("centralized composite test",
                dpi::htest::centralized_composite_test(data, alpha, b_theta));
  return 0;
}

int run_baseline(const std::string& csv, int centers, int records, double theta,
                 double censor_rate, double eps, int rounds, double eta_lr,
                 double b_theta, double b_x, std::uint64_t seed) {
  const auto data =
      load_or_synth(csv, centers, records, theta, censor_rate, b_theta, b_x, seed);
  const int n = static_cast<int>(data.size());
  const auto net = complete_network(n);
  dpi::baselines::FirstOrderConfig cfg;
  cfg.eps = eps;
  cfg.T = rounds;
  cfg.eta_lr = eta_lr;
  cfg.b_theta = b_theta;
  cfg.b_x = b_x;
  const auto res = dpi::baselines::run_first_order(data, net, cfg, seed);
  std::printf("first-order baseline: T=%d eta=%g noise_scale=%.4g%s\n", cfg.T,
              cfg.eta_lr, res.noise_scale, res.diverged ? "  [DIVERGED]" : "");
  for (int i = 0; i < n; ++i) {
    std::printf("  agent %d: theta=%.5f  p=%.4f\n", i, res.theta_final(i),
                res.p_values[i]);
  }
  return 0;
}

int run_lower_bound(double gap, double alpha, double beta, int diam, int n,
                    std::vector<double> eps) {
  if (eps.empty()) eps = {0.25, 0.5, 1.0, 2.0, 4.0};
  std::printf("%10s %16s %16s %8s\n", "eps", "KT_exact", "KT_closed_form",
              "T_min");
  for (double e : eps) {
    const double kl = dpi::htest::rr_privatized_kl(gap, e);
    const auto lb = dpi::htest::communication_lower_bound(
        std::vector<double>(n, kl), alpha, beta, diam);
    const double cf =
        dpi::htest::rr_lower_bound_closed_form(gap, alpha, beta, e, diam, n);
    if (lb.unbounded) {
      std::printf("%10.4f %16s %16.4f %8d\n", e, "unbounded", cf, lb.t_min);
    } else {
      std::printf("%10.4f %16.4f %16.4f %8d\n", e, lb.kt, cf, lb.t_min);
    }
  }
  return 0;
}

int run_synth(int centers, int records, double theta, double censor_rate,
              double b_theta, double b_x, std::uint64_t seed,
              const std::string& out) {
  dpi::harness::ModelSpec spec;
  spec.type = "cox";
  spec.records_per_center = records;
  spec.theta_true = theta;
  spec.censor_rate = censor_rate;
  spec.b_theta = b_theta;
  spec.b_x = b_x;
  dpi::harness::write_survival_csv(out,
                                   dpi::harness::synth_survival(spec, centers, seed));
  std::printf("wrote %s (%d centers x %d records)\n", out.c_str(), centers,
              records);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially private distributed inference"};
  app.require_subcommand(1);

  CommonFlags mle_flags;
  auto* mle_cmd = app.add_subcommand(
      "mle", "Monte Carlo run of the batch estimators (am-gm / two-threshold)");
  add_common(mle_cmd, mle_flags);

  CommonFlags online_flags;
  auto* online_cmd =
      app.add_subcommand("online", "Monte Carlo run of the streaming learner");
  add_common(online_cmd, online_flags);

  int pw_n = 20;
  double pw_p = 0.7, pw_alpha = 0.05;
  std::vector<double> pw_eps;
  int pw_mc = 10000;
  std::uint64_t pw_seed = 1;
  std::string pw_out;
  auto* power_cmd = app.add_subcommand(
      "power", "Collective vs individual detection power under local privacy");
  power_cmd->add_option("--n", pw_n, "number of agents");
  power_cmd->add_option("--p", pw_p, "alternative success probability (> 1/2)");
  power_cmd->add_option("--alpha", pw_alpha, "test level");
  power_cmd->add_option("--eps", pw_eps, "privacy budget grid");
  power_cmd->add_option("--mc", pw_mc, "Monte Carlo samples for the Laplace test");
  power_cmd->add_option("--seed", pw_seed, "RNG seed");
  power_cmd->add_option("--out", pw_out, "write power.csv here");

  int st_n = 5, st_signals = 20, st_true = 1, st_mc = 2000;
  double st_p0 = 0.5, st_p1 = 0.7, st_eps = 1.0, st_alpha = 0.05;
  bool st_bd = false;
  std::uint64_t st_seed = 1;
  auto* st_cmd = app.add_subcommand(
      "simple-test", "Distributed simple hypothesis test on binary signals");
  st_cmd->add_option("--n", st_n, "number of agents");
  st_cmd->add_option("--p0", st_p0, "null success probability");
  st_cmd->add_option("--p1", st_p1, "alternative success probability");
  st_cmd->add_option("--signals", st_signals, "signals per agent");
  st_cmd->add_option("--true", st_true, "data-generating state index (0 or 1)");
  st_cmd->add_option("--eps", st_eps, "privacy budget");
  st_cmd->add_option("--alpha", st_alpha, "test level");
  st_cmd->add_flag("--bootstrap-distributed", st_bd,
                   "calibrate by bootstrapping the full private statistic");
  st_cmd->add_option("--mc", st_mc, "bootstrap samples");
  st_cmd->add_option("--seed", st_seed, "RNG seed");

  std::string ht_csv;
  int ht_centers = 5, ht_records = 40;
  double ht_theta = 0.5, ht_censor = 0.0, ht_eps = 1.0, ht_alpha = 0.05;
  double ht_btheta = 1.0, ht_bx = 1.0;
  std::uint64_t ht_seed = 1;
  auto* ht_cmd = app.add_subcommand(
      "htest", "Distributed composite test for a survival treatment effect");
  ht_cmd->add_option("--csv", ht_csv, "survival CSV (time,event,covariate[,center])");
  ht_cmd->add_option("--centers", ht_centers, "centers (synthetic or split)");
  ht_cmd->add_option("--records", ht_records, "records per synthetic center");
  ht_cmd->add_option("--theta", ht_theta, "synthetic true effect");
  ht_cmd->add_option("--censor-rate", ht_censor, "synthetic censoring fraction");
  ht_cmd->add_option("--eps", ht_eps, "privacy budget");
  ht_cmd->add_option("--alpha", ht_alpha, "test level");
  ht_cmd->add_option("--b-theta", ht_btheta, "effect-size clamp");
  ht_cmd->add_option("--b-x", ht_bx, "covariate bound");
  ht_cmd->add_option("--seed", ht_seed, "RNG seed");

  std::string fo_csv;
  int fo_centers = 5, fo_records = 40, fo_rounds = 100;
  double fo_theta = 0.5, fo_censor = 0.0, fo_eps = 1.0, fo_eta = 0.001;
  double fo_btheta = 1.0, fo_bx = 1.0;
  std::uint64_t fo_seed = 1;
  auto* fo_cmd = app.add_subcommand(
      "baseline-fo", "Privatized first-order consensus baseline");
  fo_cmd->add_option("--csv", fo_csv, "survival CSV");
  fo_cmd->add_option("--centers", fo_centers, "centers (synthetic or split)");
  fo_cmd->add_option("--records", fo_records, "records per synthetic center");
  fo_cmd->add_option("--theta", fo_theta, "synthetic true effect");
  fo_cmd->add_option("--censor-rate", fo_censor, "synthetic censoring fraction");
  fo_cmd->add_option("--eps", fo_eps, "privacy budget");
  fo_cmd->add_option("--rounds", fo_rounds, "gradient steps T");
  fo_cmd->add_option("--eta-lr", fo_eta, "learning rate");
  fo_cmd->add_option("--b-theta", fo_btheta, "effect-size clamp");
  fo_cmd->add_option("--b-x", fo_bx, "covariate bound");
  fo_cmd->add_option("--seed", fo_seed, "RNG seed");

  double lb_gap = 0.4, lb_alpha = 0.05, lb_beta = 0.05;
  int lb_diam = 1, lb_n = 5;
  std::vector<double> lb_eps;
  auto* lb_cmd = app.add_subcommand(
      "lower-bound", "Communication lower bounds under local privacy");
  lb_cmd->add_option("--gap", lb_gap, "signal probability gap in (0,1)");
  lb_cmd->add_option("--alpha", lb_alpha, "type-I error");
  lb_cmd->add_option("--beta", lb_beta, "type-II error");
  lb_cmd->add_option("--diam", lb_diam, "network diameter");
  lb_cmd->add_option("--n", lb_n, "number of agents");
  lb_cmd->add_option("--eps", lb_eps, "privacy budget grid");

  int sy_centers = 5, sy_records = 40;
  double sy_theta = 0.5, sy_censor = 0.0, sy_btheta = 1.0, sy_bx = 1.0;
  std::uint64_t sy_seed = 1;
  std::string sy_out = "survival.csv";
  auto* sy_cmd = app.add_subcommand("synth", "Generate a synthetic survival CSV");
  sy_cmd->add_option("--centers", sy_centers, "centers");
  sy_cmd->add_option("--records", sy_records, "records per center");
  sy_cmd->add_option("--theta", sy_theta, "true effect");
  sy_cmd->add_option("--censor-rate", sy_censor, "censoring fraction");
  sy_cmd->add_option("--b-theta", sy_btheta, "effect-size clamp");
  sy_cmd->add_option("--b-x", sy_bx, "covariate bound");
  sy_cmd->add_option("--seed", sy_seed, "RNG seed");
  sy_cmd->add_option("--out", sy_out, "output path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mle_cmd->parsed()) return run_mle(mle_flags);
    if (online_cmd->parsed()) return run_online_cmd(online_flags);
    if (power_cmd->parsed()) {
      return run_power(pw_n, pw_p, pw_alpha, pw_eps, pw_mc, pw_seed, pw_out);
    }
    if (st_cmd->parsed()) {
      return run_simple_test(st_n, st_p0, st_p1, st_signals, st_true, st_eps,
                             st_alpha, st_bd, st_mc, st_seed);
    }
    if (ht_cmd->parsed()) {
      return run_htest(ht_csv, ht_centers, ht_records, ht_theta, ht_censor,
                       ht_eps, ht_alpha, ht_btheta, ht_bx, ht_seed);
    }
    if (fo_cmd->parsed()) {
      return run_baseline(fo_csv, fo_centers, fo_records, fo_theta, fo_censor,
                          fo_eps, fo_rounds, fo_eta, fo_btheta, fo_bx, fo_seed);
    }
    if (lb_cmd->parsed()) {
      return run_lower_bound(lb_gap, lb_alpha, lb_beta, lb_diam, lb_n, lb_eps);
    }
    if (sy_cmd->parsed()) {
      return run_synth(sy_centers, sy_records, sy_theta, sy_censor, sy_btheta,
                       sy_bx, sy_seed, sy_out);
    }
  } catch (const dpi::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const dpi::RunError& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
