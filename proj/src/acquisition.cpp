#include "safebo/acquisition.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace safebo {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

BetaSchedule fixed_beta(double value) {
  if (!(value > 0.0)) throw std::invalid_argument("fixed_beta: value must be > 0");
  return FixedBeta{value};
}

BetaSchedule theoretical_beta(double rkhs_bound, double noise, double delta) {
  if (!(rkhs_bound > 0.0)) throw std::invalid_argument("theoretical_beta: B must be > 0");
  if (!(noise > 0.0)) throw std::invalid_argument("theoretical_beta: noise must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("theoretical_beta: delta must lie in (0, 1)");
  }
  return TheoreticalBeta{rkhs_bound, noise, delta};
}

double beta_value(const BetaSchedule& s, int n, double info_gain) {
  if (n < 1) throw std::invalid_argument("beta_value: iteration index must be >= 1");
  if (info_gain < 0.0) throw std::invalid_argument("beta_value: information gain must be >= 0");
  return std::visit(
      [&](const auto& mode) -> double {
        using T = std::decay_t<decltype(mode)>;
        if constexpr (std::is_same_v<T, FixedBeta>) {
          return mode.value;
        } else {
          const double root = mode.rkhs_bound +
                              mode.noise * std::sqrt(2.0 * (info_gain + 1.0 + std::log(1.0 / mode.delta)));
          return root * root;
        }
      },
      s);
}

void validate(const AcquisitionSpec& spec) {
  if (spec.safety == SafetyMode::Barrier && !(spec.tau > 0.0)) {
    throw std::invalid_argument("acquisition: barrier mode requires tau > 0");
  }
  if (!(spec.tau_decay > 0.0 && spec.tau_decay <= 1.0)) {
    throw std::invalid_argument("acquisition: tau_decay must lie in (0, 1]");
  }
  if (spec.safety == SafetyMode::Pf && spec.base == BaseAcquisition::Lcb) {
    throw std::invalid_argument(
        "acquisition: probability-of-feasibility scaling needs an improvement-based base (ei or pi)");
  }
}

double lcb(const Posterior& cost, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("lcb: beta must be > 0");
  return cost.mean - std::sqrt(beta) * std::sqrt(cost.variance);
}

double expected_improvement(const Posterior& cost, double best) {
  const double sigma = std::sqrt(cost.variance);
  if (sigma == 0.0) return std::max(best - cost.mean, 0.0);
  const double z = (best - cost.mean) / sigma;
  // round-off can leave a tiny negative value for very unpromising points
  return std::max((best - cost.mean) * normal_cdf(z) + sigma * normal_pdf(z), 0.0);
}

double probability_of_improvement(const Posterior& cost, double best) {
  const double sigma = std::sqrt(cost.variance);
  if (sigma == 0.0) return cost.mean < best ? 1.0 : 0.0;
  return normal_cdf((best - cost.mean) / sigma);
}

double barrier_term(const Posterior& constraint, double beta) {
  const double bound = lcb(constraint, beta);
  return bound > 0.0 ? std::log(bound) : kNegInf;
}

double barrier_acquisition(double base_value, const std::vector<double>& barrier_terms, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("barrier_acquisition: tau must be > 0");
  double total = 0.0;
  for (double b : barrier_terms) {
    if (b == kNegInf) return kPosInf;
    total += b;
  }
  return base_value - tau * total;
}

double pf_acquisition(double base_ei, const std::vector<Posterior>& constraints) {
  if (base_ei < 0.0) throw std::invalid_argument("pf_acquisition: base must be >= 0");
  double prob = 1.0;
  for (const auto& c : constraints) {
    const double sigma = std::sqrt(c.variance);
    if (sigma == 0.0) {
      prob *= (c.mean >= 0.0) ? 1.0 : 0.0;
    } else {
      prob *= normal_cdf(c.mean / sigma);
    }
  }
  return base_ei * prob;
}

double pourmohamad_acquisition(const Posterior& cost, const std::vector<Posterior>& constraints) {
  double penalty = 0.0;
  for (const auto& c : constraints) {
    if (!(c.mean > 0.0)) return kPosInf;
    penalty += std::log(c.mean) - c.variance / (2.0 * c.mean * c.mean);
  }
  return cost.mean - cost.variance * penalty;
}

double safeopt_rule_score(const std::vector<Posterior>& posteriors, const std::vector<double>& betas) {
  if (posteriors.size() != betas.size()) {
    throw std::invalid_argument("safeopt_rule_score: one beta per posterior required");
  }
  double widest = 0.0;
  for (std::size_t j = 0; j < posteriors.size(); ++j) {
    widest = std::max(widest, 2.0 * std::sqrt(betas[j]) * std::sqrt(posteriors[j].variance));
  }
  return widest;
}

}  // namespace safebo
