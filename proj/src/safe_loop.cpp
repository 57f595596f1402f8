#include "safebo/safe_loop.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace safebo {

namespace {

struct BetaSet {
  double cost = 4.0;
  std::vector<double> constraints;
};

// Beta values for proposal n. Information gain is only evaluated for
// theoretical schedules, which require a positive noise level.
BetaSet betas_for(const SafeBoState& state) {
  BetaSet out;
  const int n = std::max(state.n, 1);
  const bool cost_theoretical = std::holds_alternative<TheoreticalBeta>(state.acq.beta_cost);
  out.cost = beta_value(state.acq.beta_cost, n,
                        cost_theoretical ? state.cost_gp.information_gain() : 0.0);
  out.constraints.reserve(state.constraint_gps.size());
  const bool con_theoretical = std::holds_alternative<TheoreticalBeta>(state.acq.beta_constraint);
  for (const auto& gp : state.constraint_gps) {
    out.constraints.push_back(
        beta_value(state.acq.beta_constraint, n, con_theoretical ? gp.information_gain() : 0.0));
  }
  return out;
}

struct GridEval {
  Eigen::VectorXd cost_mean, cost_var;
  std::vector<Eigen::VectorXd> con_mean, con_var;
};

GridEval evaluate_gps(const SafeBoState& state, const Eigen::MatrixXd& points) {
  GridEval ev;
  state.cost_gp.posterior_batch(points, ev.cost_mean, ev.cost_var);
  ev.con_mean.resize(state.constraint_gps.size());
  ev.con_var.resize(state.constraint_gps.size());
  for (std::size_t i = 0; i < state.constraint_gps.size(); ++i) {
    state.constraint_gps[i].posterior_batch(points, ev.con_mean[i], ev.con_var[i]);
  }
  return ev;
}

// Smallest constraint LCB across constraints at grid row i.
double min_constraint_lcb_at(const GridEval& ev, const BetaSet& betas, Eigen::Index i) {
  double lo = kPosInf;
  for (std::size_t c = 0; c < ev.con_mean.size(); ++c) {
    const double b = ev.con_mean[c][i] - std::sqrt(betas.constraints[c]) * std::sqrt(ev.con_var[c][i]);
    lo = std::min(lo, b);
  }
  return lo;
}

// Score to minimize at grid row i under the configured acquisition.
double score_at(const SafeBoState& state, const GridEval& ev, const BetaSet& betas, double best,
                Eigen::Index i) {
  const Posterior cost{ev.cost_mean[i], ev.cost_var[i]};
  const auto base_value = [&]() -> double {
    switch (state.acq.base) {
      case BaseAcquisition::Lcb:
        return lcb(cost, betas.cost);
      case BaseAcquisition::Ei:
        return -expected_improvement(cost, best);
      case BaseAcquisition::Pi:
        return -probability_of_improvement(cost, best);
    }
    return 0.0;
  };

  const std::size_t m = ev.con_mean.size();
  std::vector<Posterior> cons(m);
  for (std::size_t c = 0; c < m; ++c) cons[c] = Posterior{ev.con_mean[c][i], ev.con_var[c][i]};

  switch (state.acq.safety) {
    case SafetyMode::None:
      return base_value();
    case SafetyMode::Barrier: {
      std::vector<double> terms(m);
      for (std::size_t c = 0; c < m; ++c) terms[c] = barrier_term(cons[c], betas.constraints[c]);
      return barrier_acquisition(base_value(), terms, state.tau_current);
    }
    case SafetyMode::Pf: {
      const double ei = state.acq.base == BaseAcquisition::Pi
                            ? probability_of_improvement(cost, best)
                            : expected_improvement(cost, best);
      return -pf_acquisition(ei, cons);
    }
    case SafetyMode::Pourmohamad:
      return pourmohamad_acquisition(cost, cons);
    case SafetyMode::SafeOptRule: {
      if (!(min_constraint_lcb_at(ev, betas, i) > 0.0)) return kPosInf;
      std::vector<Posterior> all(m + 1);
      std::vector<double> all_betas(m + 1);
      all[0] = cost;
      all_betas[0] = betas.cost;
      for (std::size_t c = 0; c < m; ++c) {
        all[c + 1] = cons[c];
        all_betas[c + 1] = betas.constraints[c];
      }
      return -safeopt_rule_score(all, all_betas);
    }
  }
  return kPosInf;
}

// Argmin with ties broken toward the lowest index. NaN never wins.
std::pair<Eigen::Index, double> grid_argmin(const SafeBoState& state, const GridEval& ev,
                                            const BetaSet& betas, double best,
                                            const Eigen::MatrixXd& points) {
  Eigen::Index best_idx = -1;
  double best_score = kPosInf;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double s = score_at(state, ev, betas, best, i);
    if (std::isnan(s)) continue;
    if (s < best_score) {
      best_score = s;
      best_idx = i;
    }
  }
  return {best_idx, best_score};
}

ExperimentRecord make_record(const SafeBoState& state, const Eigen::VectorXd& x,
                             const std::vector<double>& observed, Oracle& oracle, int iteration,
                             const Proposal* proposal) {
  ExperimentRecord rec;
  rec.run_id = state.run_id;
  rec.seed = state.rng_seed;
  rec.iteration = iteration;
  rec.x = x;
  rec.observed = observed;
  if (auto t = oracle.truth(x)) {
    rec.truth = *t;
    for (std::size_t c = 1; c < rec.truth.size(); ++c) {
      if (rec.truth[c] < 0.0) rec.violation = true;
    }
  }
  if (proposal != nullptr) {
    rec.min_constraint_lcb = proposal->min_constraint_lcb;
    rec.fallback = proposal->fallback;
  }
  return rec;
}

}  // namespace

double cost_model_target(bool log_transform, double observed_cost) {
  if (!log_transform) return observed_cost;
  if (observed_cost < 0.0) {
    throw std::invalid_argument("cost_model_target: log transform needs a nonnegative cost");
  }
  return std::log1p(observed_cost);
}

double best_feasible_observation(const std::vector<ExperimentRecord>& history) {
  double best_feasible = kPosInf;
  double best_any = kPosInf;
  for (const auto& rec : history) {
    if (rec.observed.empty()) continue;
    best_any = std::min(best_any, rec.observed[0]);
    bool feasible = true;
    for (std::size_t c = 1; c < rec.observed.size(); ++c) {
      if (rec.observed[c] < 0.0) feasible = false;
    }
    if (feasible) best_feasible = std::min(best_feasible, rec.observed[0]);
  }
  return std::isfinite(best_feasible) ? best_feasible : best_any;
}

SafeBoState init(Oracle& oracle, const LoopConfig& config) {
  config.domain.validate();
  validate(config.acq);
  const int m = oracle.num_constraints();
  if (static_cast<int>(config.constraint_kernels.size()) != m) {
    throw std::invalid_argument("init: one constraint kernel per oracle constraint required");
  }
  if (!config.constraint_noise_std.empty() &&
      static_cast<int>(config.constraint_noise_std.size()) != m) {
    throw std::invalid_argument("init: constraint_noise_std must match the constraint count");
  }
  if (config.x0.size() != config.domain.dim() || oracle.input_dim() != config.domain.dim()) {
    throw std::invalid_argument("init: domain, oracle and x0 dimensions must agree");
  }
  if (!config.domain.contains(config.x0)) {
    throw std::invalid_argument("init: x0 lies outside the domain bounds");
  }

  SafeBoState state{
      GpModel(config.cost_kernel, config.cost_prior_mean, config.cost_noise_std,
              config.domain.dim()),
      {},
      config.domain,
      config.acq,
      config.acq.tau,
      0,
      {},
      config.seed,
      config.run_id,
      {}};
  for (int c = 0; c < m; ++c) {
    const double noise =
        config.constraint_noise_std.empty() ? config.cost_noise_std : config.constraint_noise_std[c];
    state.constraint_gps.emplace_back(config.constraint_kernels[c], config.constraint_prior_mean,
                                      noise, config.domain.dim());
  }

  const std::vector<double> obs = oracle.query(config.x0);
  if (static_cast<int>(obs.size()) != m + 1) {
    throw std::runtime_error("init: oracle returned the wrong number of outputs");
  }
  state.cost_log_transform = config.cost_log_transform;
  state.cost_gp =
      state.cost_gp
          .with_observation(config.x0, cost_model_target(config.cost_log_transform, obs[0]))
          .conditioned();
  for (int c = 0; c < m; ++c) {
    state.constraint_gps[c] =
        state.constraint_gps[c].with_observation(config.x0, obs[c + 1]).conditioned();
  }
  state.n = 1;

  double min_obs_constraint = kPosInf;
  for (int c = 0; c < m; ++c) min_obs_constraint = std::min(min_obs_constraint, obs[c + 1]);
  if (m > 0 && min_obs_constraint <= 0.0) {
    std::ostringstream w;
    w << "initial point observed unsafe (min constraint " << min_obs_constraint
      << "); proceeding anyway";
    state.warnings.push_back(w.str());
  }

  ExperimentRecord rec = make_record(state, config.x0, obs, oracle, 0, nullptr);
  rec.safe_set_fraction = safe_set(state).fraction_safe;
  state.history.push_back(std::move(rec));
  return state;
}

SafeSetReport safe_set(const SafeBoState& state) {
  const Grid grid = make_grid(state.domain);
  const BetaSet betas = betas_for(state);
  const GridEval ev = evaluate_gps(state, grid.points);

  SafeSetReport report;
  report.member_mask.resize(grid.size(), false);
  Eigen::Index members = 0;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (state.num_constraints() == 0) continue;
    if (min_constraint_lcb_at(ev, betas, i) > 0.0) {
      report.member_mask[i] = true;
      ++members;
    }
  }
  report.fraction_safe = grid.size() > 0 ? static_cast<double>(members) / grid.size() : 0.0;
  return report;
}

Proposal propose(const SafeBoState& state) {
  const Grid grid = make_grid(state.domain);
  const BetaSet betas = betas_for(state);
  const double best =
      cost_model_target(state.cost_log_transform, best_feasible_observation(state.history));

  GridEval ev = evaluate_gps(state, grid.points);
  auto [idx, score] = grid_argmin(state, ev, betas, best, grid.points);

  Proposal prop;
  if (idx < 0 || score == kPosInf) {
    // No candidate admissible anywhere: fall back to the safest point.
    Eigen::Index safest = 0;
    double safest_lcb = -kPosInf;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double lo = min_constraint_lcb_at(ev, betas, i);
      if (lo > safest_lcb) {
        safest_lcb = lo;
        safest = i;
      }
    }
    prop.x = grid.points.row(safest);
    prop.score = kPosInf;
    prop.min_constraint_lcb = safest_lcb;
    prop.fallback = true;
    return prop;
  }

  Eigen::VectorXd incumbent = grid.points.row(idx);
  double incumbent_score = score;
  double incumbent_lcb = min_constraint_lcb_at(ev, betas, idx);

  std::vector<double> half_width(state.domain.dim());
  for (int d = 0; d < state.domain.dim(); ++d) {
    half_width[d] = (state.domain.bounds[d].hi - state.domain.bounds[d].lo) /
                    static_cast<double>(state.domain.grid_points_per_dim - 1);
  }
  for (int round = 0; round < state.domain.refinement_iters; ++round) {
    const Grid fine = make_refined_grid(state.domain, incumbent, half_width);
    GridEval fine_ev = evaluate_gps(state, fine.points);
    auto [fidx, fscore] = grid_argmin(state, fine_ev, betas, best, fine.points);
    if (fidx >= 0 && fscore < incumbent_score) {
      incumbent = fine.points.row(fidx);
      incumbent_score = fscore;
      incumbent_lcb = min_constraint_lcb_at(fine_ev, betas, fidx);
    }
    for (double& hw : half_width) hw /= 10.0;
  }

  prop.x = incumbent;
  prop.score = incumbent_score;
  prop.min_constraint_lcb = incumbent_lcb;
  prop.fallback = false;

  // Any non-fallback proposal under an interior-point rule must sit
  // strictly inside the revealed safe set.
  if ((state.acq.safety == SafetyMode::Barrier || state.acq.safety == SafetyMode::SafeOptRule) &&
      state.num_constraints() > 0 && !(prop.min_constraint_lcb > 0.0)) {
    throw std::logic_error("propose: interior-point proposal left the revealed safe set");
  }
  return prop;
}

std::pair<SafeBoState, ExperimentRecord> step(const SafeBoState& state, Oracle& oracle) {
  const auto t0 = std::chrono::steady_clock::now();
  const Proposal prop = propose(state);
  const std::vector<double> obs = oracle.query(prop.x);

  SafeBoState next = state;
  next.cost_gp =
      next.cost_gp.with_observation(prop.x, cost_model_target(state.cost_log_transform, obs[0]))
          .conditioned();
  for (int c = 0; c < next.num_constraints(); ++c) {
    next.constraint_gps[c] =
        next.constraint_gps[c].with_observation(prop.x, obs[c + 1]).conditioned();
  }
  ExperimentRecord rec = make_record(next, prop.x, obs, oracle, state.n, &prop);
  next.n = state.n + 1;
  next.tau_current = state.tau_current * state.acq.tau_decay;
  rec.safe_set_fraction = safe_set(next).fraction_safe;
  rec.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  next.history.push_back(rec);
  return {std::move(next), std::move(rec)};
}

std::pair<std::vector<ExperimentRecord>, SafeBoState> run_loop_with_state(Oracle& oracle,
                                                                          const LoopConfig& config) {
  if (config.budget < 0) throw std::invalid_argument("run_loop: budget must be >= 0");
  SafeBoState state = init(oracle, config);
  for (int k = 0; k < config.budget; ++k) {
    state = step(state, oracle).first;
  }
  std::vector<ExperimentRecord> records = state.history;
  return {std::move(records), std::move(state)};
}

std::vector<ExperimentRecord> run_loop(Oracle& oracle, const LoopConfig& config) {
  return run_loop_with_state(oracle, config).first;
}

}  // namespace safebo
