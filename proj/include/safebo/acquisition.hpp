#pragma once

#include <limits>
#include <variant>
#include <vector>

#include "safebo/gp.hpp"

namespace safebo {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

/// Standard normal CDF and PDF.
double normal_cdf(double z);
double normal_pdf(double z);

/// Confidence scaling. Fixed mode pins beta; Theoretical mode computes
/// sqrt(beta) = B + v * sqrt(2 (gamma + 1 + ln(1/delta))) from an RKHS
/// norm bound B, a noise level v and a failure probability delta.
struct FixedBeta {
  double value = 4.0;
};
struct TheoreticalBeta {
  double rkhs_bound = 1.0;  // B
  double noise = 0.1;       // v
  double delta = 0.05;
};
using BetaSchedule = std::variant<FixedBeta, TheoreticalBeta>;

BetaSchedule fixed_beta(double value);
BetaSchedule theoretical_beta(double rkhs_bound, double noise, double delta);

/// Beta at iteration n given the information gain accumulated so far.
/// Returns beta itself (the square of the confidence multiplier).
double beta_value(const BetaSchedule& s, int n, double info_gain);

enum class BaseAcquisition { Lcb, Ei, Pi };
enum class SafetyMode { None, Barrier, Pf, Pourmohamad, SafeOptRule };

struct AcquisitionSpec {
  BaseAcquisition base = BaseAcquisition::Lcb;
  SafetyMode safety = SafetyMode::Barrier;
  BetaSchedule beta_cost = FixedBeta{4.0};
  BetaSchedule beta_constraint = FixedBeta{4.0};
  double tau = 1e-3;        // barrier weight, > 0
  double tau_decay = 1.0;   // multiplicative per-iteration decay in (0, 1]
};

void validate(const AcquisitionSpec& spec);

/// mu - sqrt(beta) sigma, minimized.
double lcb(const Posterior& cost, double beta);

/// Expected improvement over `best` for minimization; >= 0.
double expected_improvement(const Posterior& cost, double best);

/// Probability of improving over `best` for minimization.
double probability_of_improvement(const Posterior& cost, double best);

/// ln of the constraint LCB, or -inf when the LCB is not positive.
/// Infeasibility is a value here, not an error.
double barrier_term(const Posterior& constraint, double beta);

/// base - tau * sum(barriers). Any -inf barrier turns the result into
/// +inf so minimization never selects the point.
double barrier_acquisition(double base_value, const std::vector<double>& barrier_terms, double tau);

/// EI scaled by the product of per-constraint feasibility probabilities
/// Phi(mu/sigma); maximized. Phi(mu/0) is 1 for mu >= 0 and 0 otherwise.
double pf_acquisition(double base_ei, const std::vector<Posterior>& constraints);

/// mu0 - sigma0^2 * sum(ln(mu_i) - sigma_i^2 / (2 mu_i^2)); minimized.
/// Any nonpositive constraint mean yields +inf.
double pourmohamad_acquisition(const Posterior& cost, const std::vector<Posterior>& constraints);

/// Widest confidence interval across all functions: max_j 2 sqrt(beta_j)
/// sigma_j. The baseline picks the safe point maximizing this.
double safeopt_rule_score(const std::vector<Posterior>& posteriors, const std::vector<double>& betas);

}  // namespace safebo
