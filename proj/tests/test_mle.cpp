#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "dpi/errors.hpp"
#include "dpi/graph.hpp"
#include "dpi/mle.hpp"
#include "dpi/models.hpp"
#include "dpi/rng.hpp"
#include "dpi/stats.hpp"

using namespace dpi;

namespace {

models::Constants ref_constants() {
  models::Constants c;
  c.Gamma = 3.0;
  c.l = 8.0;
  c.Q = 0.5;
  c.Delta = 0.8;
  return c;
}

// Row-normalized log matrix: subtract each row's logsumexp.
Eigen::MatrixXd row_normalize(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(m.cols());
    for (Eigen::Index s = 0; s < m.cols(); ++s) row[s] = m(i, s);
    const double z = stats::logsumexp(row);
    for (Eigen::Index s = 0; s < m.cols(); ++s) m(i, s) -= z;
  }
  return m;
}

// Deterministic pseudo-random likelihood matrix for dynamics tests.
Eigen::MatrixXd fake_log_gamma(int n, int S, std::uint64_t seed) {
  auto g = rng::Rng::substream(seed, {0x7467u});
  Eigen::MatrixXd m(n, S);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < S; ++s) m(i, s) = -10.0 * g.next_double();
  return m;
}

struct BernFixture {
  models::BernoulliModel model;
  std::vector<const models::SignalModel*> models_;
  std::vector<models::AgentData> data;
  models::StateSpace space{{0.2, 0.5, 0.8}};

  explicit BernFixture(int n, int m, double truth, std::uint64_t seed) {
    for (int i = 0; i < n; ++i) {
      auto g = rng::Rng::substream(seed, {0x66697874u, static_cast<std::uint64_t>(i)});
      data.push_back(model.sample(truth, m, g));
      models_.push_back(&model);
    }
  }
};

// Iterations needed for a log-belief gap g to clear the cutoff rho at
// consensus: the per-agent evidence doubles each step while averaging, so
// (2^T / n) * g >= rho suffices once T >= log2(2 rho n / g); +2 for slack.
int settle_T(double rho, int n, double gap) {
  return std::max(3, static_cast<int>(
                         std::ceil(std::log2(2.0 * rho * n / gap))) + 2);
}

}  // namespace

TEST_CASE("mle schedule: pinned reference values") {
  const auto net = graph::topology("complete", 5);
  const auto sched = mle::compute_mle_schedule(2.0, 0.05, 0.95, ref_constants(),
                                               net, 2, 1);
  // Hand-computed: K_gm = ceil(1 * ln(1/0.05)) = 3, K_am symmetric.
  CHECK(sched.K_gm == 3);
  CHECK(sched.K_am == 3);
  CHECK(sched.K == 3);
  // Delta * K * S / eps = 0.8 * 3 * 2 / 2.
  CHECK(sched.noise_scale == doctest::Approx(2.4).epsilon(1e-12));
  // V = n * sqrt(2) * scale.
  CHECK(sched.V == doctest::Approx(16.970562748477143).epsilon(1e-12));
  CHECK(sched.a_star == doctest::Approx(0.5).epsilon(1e-12));
  // Closed-form threshold optimizers (independent recomputation).
  CHECK(sched.rho_gm == doctest::Approx(48.607111261101174).epsilon(1e-12));
  CHECK(sched.rho_am == doctest::Approx(14.31443647876854).epsilon(1e-12));
  CHECK(sched.T == 6);
  // Cutoff identities tau = 1/(1 + e^rho), log_tau = log tau.
  CHECK(sched.tau_gm ==
        doctest::Approx(1.0 / (1.0 + std::exp(sched.rho_gm))).epsilon(1e-12));
  CHECK(sched.log_tau_am ==
        doctest::Approx(-std::log1p(std::exp(sched.rho_am))).epsilon(1e-12));
  CHECK_FALSE(sched.with_threshold);
}

TEST_CASE("mle schedule: unknown optimal-set size uses the |Theta| bound") {
  const auto net = graph::topology("complete", 5);
  for (int unknown : {0, -1}) {
    const auto sched = mle::compute_mle_schedule(
        2.0, 0.05, 0.95, ref_constants(), net, 2, unknown);
    // ceil(S * ln(S / min(alpha, 1 - beta))) = ceil(2 * ln 40) = 8.
    CHECK(sched.K_gm == 8);
    CHECK(sched.K_am == 8);
    CHECK(sched.K == 8);
  }
  // Known size must give fewer rounds here.
  const auto known = mle::compute_mle_schedule(2.0, 0.05, 0.95, ref_constants(),
                                               net, 2, 1);
  CHECK(known.K < 8);
}

TEST_CASE("mle schedule: two-threshold round counts and vote thresholds") {
  const auto net = graph::topology("complete", 5);
  const auto c = ref_constants();

  SUBCASE("tight pi1 margin inflates K1") {
    mle::ThresholdParams tp;
    tp.pi1 = 0.25;  // K1 = ceil(ln(2/0.05) / (2 * 0.25^2)) = 30
    const auto s =
        mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 4, 2, true, tp);
    CHECK(s.K_thr1 == 30);
    CHECK(s.K_thr2 == 8);
    CHECK(s.K_gm == 8);
    CHECK(s.K_am == 8);
    CHECK(s.K == 30);  // max of all four
    CHECK(s.tau_thr1 == doctest::Approx(0.3125).epsilon(1e-12));  // (1+pi1) q1
    CHECK(s.tau_thr2 == doctest::Approx(0.375).epsilon(1e-12));   // (1-pi2) q2
    CHECK(s.with_threshold);
    CHECK_FALSE(s.single_threshold);
  }

  SUBCASE("default margins") {
    const auto s = mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 4, 2,
                                             true, mle::ThresholdParams{});
    CHECK(s.K_thr1 == 8);
    CHECK(s.K_thr2 == 8);
    CHECK(s.tau_thr1 == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(s.tau_thr2 == doctest::Approx(0.375).epsilon(1e-12));
  }

  SUBCASE("single-threshold mode derives pi1 so the cutoffs coincide") {
    mle::ThresholdParams tp;
    tp.single = true;  // pi1 = (1-pi2) q2 / q1 - 1 = 0.5 at the defaults
    const auto s =
        mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 4, 2, true, tp);
    CHECK(s.single_threshold);
    CHECK(s.pi1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.tau_thr1 == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(s.tau_thr1 == doctest::Approx(s.tau_thr2).epsilon(1e-12));
  }

  SUBCASE("single-threshold mode needs q2 > q1") {
    mle::ThresholdParams tp;
    tp.single = true;
    tp.q1 = 0.75;
    tp.q2 = 0.25;
    CHECK_THROWS_AS(
        mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 4, 2, true, tp),
        ConfigError);
  }
}

TEST_CASE("mle schedule: noise scale and iterations respond to the budget") {
  const auto net = graph::topology("complete", 5);
  const auto c = ref_constants();
  const auto s2 = mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 2, 1);
  const auto s1 = mle::compute_mle_schedule(1.0, 0.05, 0.95, c, net, 2, 1);
  const auto s01 = mle::compute_mle_schedule(0.01, 0.05, 0.95, c, net, 2, 1);
  // Same K, so the scale is exactly proportional to 1/eps.
  CHECK(s1.K == s2.K);
  CHECK(s1.noise_scale == doctest::Approx(2.0 * s2.noise_scale).epsilon(1e-12));
  // Smaller budgets mean larger V, hence more consensus iterations.
  CHECK(s01.T >= s1.T);
  CHECK(s1.T >= s2.T);
  CHECK(s01.T > s2.T);
}

TEST_CASE("mle schedule: overrides replace derived values") {
  const auto net = graph::topology("complete", 5);
  const auto c = ref_constants();

  mle::ScheduleOverrides ov;
  ov.K = 7;
  auto s = mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 2, 1, false, {}, ov);
  CHECK(s.K == 7);
  // The privacy split tracks the K actually run: 0.8 * 7 * 2 / 2.
  CHECK(s.noise_scale == doctest::Approx(5.6).epsilon(1e-12));

  ov = {};
  ov.noise_scale = 0.0;
  ov.T = 3;
  ov.rho_gm = 1.0;
  s = mle::compute_mle_schedule(2.0, 0.05, 0.95, c, net, 2, 1, false, {}, ov);
  CHECK(s.noise_scale == 0.0);
  CHECK(s.V == 0.0);
  CHECK(s.T == 3);
  CHECK(s.rho_gm == 1.0);
  CHECK(s.tau_gm == doctest::Approx(1.0 / (1.0 + std::exp(1.0))).epsilon(1e-12));
}

TEST_CASE("mle schedule: rejects bad arguments") {
  const auto net = graph::topology("complete", 3);
  const auto c = ref_constants();
  CHECK_THROWS_AS(mle::compute_mle_schedule(0.0, 0.05, 0.95, c, net, 2, 1),
                  ConfigError);
  CHECK_THROWS_AS(mle::compute_mle_schedule(1.0, 0.0, 0.95, c, net, 2, 1),
                  ConfigError);
  CHECK_THROWS_AS(mle::compute_mle_schedule(1.0, 0.05, 1.0, c, net, 2, 1),
                  ConfigError);
  CHECK_THROWS_AS(mle::compute_mle_schedule(1.0, 0.05, 0.95, c, net, 1, 1),
                  ConfigError);
  models::Constants bad = c;
  bad.l = 0.0;
  CHECK_THROWS_AS(mle::compute_mle_schedule(1.0, 0.05, 0.95, bad, net, 2, 1),
                  ConfigError);
}

TEST_CASE("belief rounds: zero-noise terminal equals the lazy-chain power") {
  const int T = 9;
  for (const char* name : {"complete", "path"}) {
    const auto net = graph::topology(name, 5);
    const auto lg = fake_log_gamma(5, 3, 17);
    const auto res = mle::run_belief_rounds(lg, net, 2, T, 0.0, 11, 0, true);

    // Lazy chain (I + A) applied T times, then row-normalized; the per-step
    // renormalizations only shift rows by constants, so the compositions agree.
    const Eigen::MatrixXd lazy =
        net.weights + Eigen::MatrixXd::Identity(net.n, net.n);
    Eigen::MatrixXd expect = lg;
    for (int t = 0; t < T; ++t) expect = lazy * expect;
    expect = row_normalize(expect);

    REQUIRE(res.terminal.size() == 2);
    for (const auto& term : res.terminal) {
      CHECK((term - expect).cwiseAbs().maxCoeff() < 1e-9);
    }
    // With no noise the rounds are identical chains.
    CHECK((res.terminal[0] - res.terminal[1]).cwiseAbs().maxCoeff() == 0.0);

    REQUIRE(res.traj.size() == 2);
    REQUIRE(res.traj[0].size() == static_cast<std::size_t>(T) + 1);
    CHECK((res.traj[0][0] - row_normalize(lg)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(res.max_lse_dev <= 1e-9);
  }
}

TEST_CASE("belief rounds: noisy chains stay normalized and reproducible") {
  const auto net = graph::topology("complete", 4);
  const auto lg = fake_log_gamma(4, 3, 5);
  const auto a = mle::run_belief_rounds(lg, net, 4, 5, 5.0, 99, 1);
  const auto b = mle::run_belief_rounds(lg, net, 4, 5, 5.0, 99, 1);
  const auto c = mle::run_belief_rounds(lg, net, 4, 5, 5.0, 99, 2);

  CHECK(a.max_lse_dev <= 1e-9);
  for (const auto& term : a.terminal) {
    for (Eigen::Index i = 0; i < term.rows(); ++i) {
      std::vector<double> row(term.cols());
      for (Eigen::Index s = 0; s < term.cols(); ++s) row[s] = term(i, s);
      CHECK(std::fabs(stats::logsumexp(row)) <= 1e-9);
    }
  }
  // Distinct rounds see distinct noise.
  CHECK((a.terminal[0] - a.terminal[1]).cwiseAbs().maxCoeff() > 1e-6);
  // Same (seed, rep) reproduces bit for bit; a new rep does not.
  for (int k = 0; k < 4; ++k) {
    CHECK((a.terminal[k] - b.terminal[k]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK((a.terminal[0] - c.terminal[0]).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("belief rounds: input validation") {
  const auto net = graph::topology("complete", 3);
  CHECK_THROWS_AS(mle::run_belief_rounds(fake_log_gamma(4, 2, 1), net, 1, 1,
                                         0.0, 1, 0),
                  ConfigError);
  CHECK_THROWS_AS(
      mle::run_belief_rounds_from_init({}, net, 1),
      ConfigError);
}

TEST_CASE("mle am/gm: zero noise recovers the centralized estimate") {
  const auto net = graph::topology("complete", 5);
  BernFixture fx(5, 40, 0.5, 2024);

  const auto central = mle::centralized_mle_set(fx.models_, fx.data, fx.space);
  REQUIRE(central.size() == 1);
  const double gap = mle::realized_min_gap(fx.models_, fx.data, fx.space);
  REQUIRE(gap > 0.0);

  const auto consts =
      models::constants_for_mle(fx.models_, fx.data, fx.space, central);
  auto sched = mle::compute_mle_schedule(2.0, 0.05, 0.95, consts, net,
                                         fx.space.size(), 1);
  mle::ScheduleOverrides ov;
  ov.noise_scale = 0.0;
  ov.T = settle_T(std::max(sched.rho_gm, sched.rho_am), net.n, gap);
  sched = mle::compute_mle_schedule(2.0, 0.05, 0.95, consts, net,
                                    fx.space.size(), 1, false, {}, ov);

  const auto res = mle::run_mle_am_gm(fx.models_, fx.data, net, fx.space, sched);
  for (int i = 0; i < net.n; ++i) {
    CHECK(res.am_set[i] == central);
    CHECK(res.gm_set[i] == central);
  }
  CHECK(res.max_lse_dev <= 1e-9);
}

TEST_CASE("mle nonprivate: every agent reaches the centralized argmax") {
  for (const char* name : {"complete", "path", "cycle"}) {
    const auto net = graph::topology(name, 5);
    BernFixture fx(5, 30, 0.8, 7);
    const auto central = mle::centralized_mle_set(fx.models_, fx.data, fx.space);
    const double gap = mle::realized_min_gap(fx.models_, fx.data, fx.space);
    const double rho = std::log(fx.space.size() + 1.0);
    const auto res = mle::run_mle_nonprivate(fx.models_, fx.data, net, fx.space,
                                             settle_T(rho, net.n, gap));
    for (int i = 0; i < net.n; ++i) {
      CHECK(res.am_set[i] == central);
      CHECK(res.gm_set[i] == central);
    }
  }
}

TEST_CASE("mle two-threshold: zero-noise votes are unanimous") {
  const auto net = graph::topology("complete", 5);
  BernFixture fx(5, 40, 0.2, 99);
  const auto central = mle::centralized_mle_set(fx.models_, fx.data, fx.space);
  const double gap = mle::realized_min_gap(fx.models_, fx.data, fx.space);
  const auto consts =
      models::constants_for_mle(fx.models_, fx.data, fx.space, central);

  auto sched = mle::compute_mle_schedule(2.0, 0.05, 0.95, consts, net,
                                         fx.space.size(), 1, true, {});
  mle::ScheduleOverrides ov;
  ov.noise_scale = 0.0;
  const double rho_max = std::max({sched.rho_gm, sched.rho_am, sched.rho_thr1,
                                   sched.rho_thr2});
  ov.T = settle_T(rho_max, net.n, gap);
  sched = mle::compute_mle_schedule(2.0, 0.05, 0.95, consts, net,
                                    fx.space.size(), 1, true, {}, ov);

  const auto res =
      mle::run_mle_two_threshold(fx.models_, fx.data, net, fx.space, sched);
  for (int i = 0; i < net.n; ++i) {
    CHECK(res.thr_set1[i] == central);
    CHECK(res.thr_set2[i] == central);
    for (int s = 0; s < fx.space.size(); ++s) {
      const bool opt =
          std::find(central.begin(), central.end(), s) != central.end();
      CHECK(res.freq1(i, s) == (opt ? 1.0 : 0.0));
      CHECK(res.freq2(i, s) == (opt ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("mle two-threshold: requires a threshold schedule") {
  const auto net = graph::topology("complete", 3);
  BernFixture fx(3, 10, 0.5, 1);
  const auto consts = models::constants_for_mle(fx.models_, fx.data, fx.space,
                                                {1});
  const auto sched = mle::compute_mle_schedule(2.0, 0.05, 0.95, consts, net,
                                               fx.space.size(), 1);
  CHECK_THROWS_AS(
      mle::run_mle_two_threshold(fx.models_, fx.data, net, fx.space, sched),
      ConfigError);
}

TEST_CASE("mle: single agent reduces to its own maximum likelihood") {
  const auto net = graph::build_network({}, 1);
  BernFixture fx(1, 60, 0.8, 31);
  const auto central = mle::centralized_mle_set(fx.models_, fx.data, fx.space);
  const auto res =
      mle::run_mle_nonprivate(fx.models_, fx.data, net, fx.space, 25);
  CHECK(res.am_set[0] == central);
  CHECK(res.gm_set[0] == central);
}

TEST_CASE("centralized mle set: ties within tolerance are kept") {
  // Two agents with mirrored data make 0.2 and 0.8 exactly tied by symmetry.
  models::BernoulliModel model;
  std::vector<const models::SignalModel*> ms{&model, &model};
  std::vector<models::AgentData> data{models::BitData{1, 1, 1, 0},
                                      models::BitData{0, 0, 0, 1}};
  models::StateSpace space{{0.2, 0.5, 0.8}};
  const auto set = mle::centralized_mle_set(ms, data, space);
  // Pooled counts: 4 successes, 4 failures -> 0.2 and 0.8 tie; 0.5 wins alone.
  CHECK(set == std::vector<int>{1});

  // With the midpoint removed the two extremes tie exactly.
  models::StateSpace space2{{0.2, 0.8}};
  const auto tied = mle::centralized_mle_set(ms, data, space2);
  CHECK(tied == std::vector<int>{0, 1});
  // No excluded state remains, so the separating gap is infinite.
  CHECK(std::isinf(mle::realized_min_gap(ms, data, space2)));
  // In the three-state space the gap is the 0.5-vs-extremes difference.
  const double expect_gap = 8.0 * std::log(0.5) -
                            (4.0 * std::log(0.2) + 4.0 * std::log(0.8));
  CHECK(mle::realized_min_gap(ms, data, space) ==
        doctest::Approx(expect_gap).epsilon(1e-9));
}

TEST_CASE("separability: vote threshold exists outside the central band") {
  // Width formula: 0.5 * sqrt((S-4)/S) around 1/2; S <= 4 always separable.
  CHECK(mle::separability_check(2, 0.5));
  CHECK(mle::separability_check(4, 0.5));
  CHECK(mle::separability_check(4, 1.0));
  // S = 100: band is (0.010102051443364402, 0.9898979485566356).
  CHECK(mle::separability_check(100, 0.01));
  CHECK_FALSE(mle::separability_check(100, 0.011));
  CHECK_FALSE(mle::separability_check(100, 0.5));
  CHECK_FALSE(mle::separability_check(100, 0.98));
  CHECK(mle::separability_check(100, 0.99));
  CHECK_THROWS_AS(mle::separability_check(100, 0.0), ConfigError);
  CHECK_THROWS_AS(mle::separability_check(100, 1.5), ConfigError);
  CHECK_THROWS_AS(mle::separability_check(0, 0.5), ConfigError);
}
