#include "dpi/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dpi/errors.hpp"

namespace dpi::privacy {

double LaplaceNoise::stddev() const { return std::sqrt(2.0) * scale; }

LaplaceNoise laplace_for(const PrivacyBudget& budget, double sensitivity) {
  if (budget.epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  if (budget.splits < 1) throw ConfigError("budget splits must be >= 1");
  if (sensitivity < 0.0) throw ConfigError("sensitivity must be nonnegative");
  return {sensitivity * budget.splits / budget.epsilon};
}

double laplace_sample(double scale, rng::Rng& g) { return g.laplace(scale); }

double rr_flip_prob(double eps) {
  if (eps <= 0.0) throw ConfigError("epsilon must be positive");
  return 1.0 / (1.0 + std::exp(eps));
}

int randomized_response(int bit, double eps, rng::Rng& g) {
  if (bit != 0 && bit != 1) throw ConfigError("randomized response needs a bit");
  return g.bernoulli(rr_flip_prob(eps)) ? 1 - bit : bit;
}

RatioCheck dp_ratio_check(const std::function<double(rng::Rng&)>& mech_a,
                          const std::function<double(rng::Rng&)>& mech_b,
                          double eps, int trials, int bins, double lo,
                          double hi, std::uint64_t seed) {
  if (bins < 1 || trials < 1 || !(hi > lo)) {
    throw ConfigError("dp_ratio_check: bad histogram parameters");
  }
  std::vector<long> ha(bins, 0), hb(bins, 0);
  auto ga = rng::Rng::substream(seed, {0xA});
  auto gb = rng::Rng::substream(seed, {0xB});
  auto bin_of = [&](double x) {
    const int b = static_cast<int>((x - lo) / (hi - lo) * bins);
    return std::clamp(b, 0, bins - 1);
  };
  for (int t = 0; t < trials; ++t) {
    ++ha[bin_of(mech_a(ga))];
    ++hb[bin_of(mech_b(gb))];
  }

  constexpr long kMinCount = 25;
  RatioCheck out;
  out.pass = true;
  out.inconclusive = true;
  for (int b = 0; b < bins; ++b) {
    if (std::max(ha[b], hb[b]) < kMinCount) continue;
    out.inconclusive = false;
    if (std::min(ha[b], hb[b]) == 0) {
      out.pass = false;
      out.worst_log_ratio = std::numeric_limits<double>::infinity();
      out.worst_bin = b;
      return out;
    }
    const double log_ratio = std::fabs(std::log(static_cast<double>(ha[b]) /
                                                static_cast<double>(hb[b])));
    // 3-sigma allowance for the log of a ratio of multinomial counts.
    const double slack = 3.0 * std::sqrt(1.0 / ha[b] + 1.0 / hb[b]);
    if (log_ratio > out.worst_log_ratio) {
      out.worst_log_ratio = log_ratio;
      out.worst_bin = b;
    }
    if (log_ratio > eps + slack) out.pass = false;
  }
  return out;
}

RatioCheck rr_ratio_check(double eps) {
  const double p = rr_flip_prob(eps);
  // P(out = 1 | in = 1) / P(out = 1 | in = 0) = (1 - p)/p = e^eps exactly.
  const double ratio = std::log((1.0 - p) / p);
  RatioCheck out;
  out.worst_log_ratio = ratio;
  out.worst_bin = 1;
  out.pass = ratio <= eps + 1e-12;
  out.inconclusive = false;
  return out;
}

double cox_sensitivity(double b_theta, double b_x) {
  if (b_theta < 0.0 || b_x < 0.0) throw ConfigError("bounds must be nonnegative");
  return 2.0 * b_theta * b_x;
}

namespace {

struct Perturber {
  const models::SignalModel& model;
  double theta;
  rng::Rng& g;

  void operator()(models::BitData& bits) {
    const std::size_t j = g.next_below(bits.size());
    bits[j] = 1 - bits[j];  // bit flip is the whole adjacency space
  }

  void operator()(models::RealData& vals) {
    const std::size_t j = g.next_below(vals.size());
    const auto draw = model.sample(theta, 1, g);
    vals[j] = std::get<models::RealData>(draw)[0];
  }

  void operator()(models::SurvData& records) {
    const std::size_t j = g.next_below(records.size());
    auto& r = records[j];
    switch (g.next_below(4)) {
      case 0:  // covariate flip (binary covariates) / sign flip otherwise
        r.covariate = (r.covariate == 0.0 || r.covariate == 1.0)
                          ? 1.0 - r.covariate
                          : -r.covariate;
        break;
      case 1:  // censoring toggle
        r.event = 1 - r.event;
        break;
      case 2:  // time redraw (moves the record across risk sets)
        r.time = g.exponential(1.0);
        break;
      default:  // full replacement
        r = {g.exponential(1.0), g.bernoulli(0.5) ? 1 : 0,
             g.bernoulli(0.5) ? 1.0 : 0.0};
        break;
    }
  }
};

}  // namespace

double empirical_sensitivity(const models::SignalModel& model,
                             const models::AgentData& data, double theta,
                             int perturbations, rng::Rng& g) {
  if (models::data_size(data) == 0) return 0.0;
  const double base = model.log_likelihood(data, theta);
  double worst = 0.0;
  for (int p = 0; p < perturbations; ++p) {
    models::AgentData copy = data;
    std::visit(Perturber{model, theta, g}, copy);
    worst = std::max(worst, std::fabs(model.log_likelihood(copy, theta) - base));
  }
  return worst;
}

}  // namespace dpi::privacy
