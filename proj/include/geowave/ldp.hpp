#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "geowave/solver.hpp"

namespace geowave::ldp {

/// sum_m dt |coeffs_m|^2, the squared L^2(0, T; H_mu) norm.
double control_norm(const solver::Control& h);

struct RateOptions {
  std::vector<double> lambdas{1e1, 1e2, 1e3, 1e4};
  double gap_tol = 5e-3;
  /// Budget M on 1/2 ||h||^2.
  double budget = std::numeric_limits<double>::infinity();
  int blocks = 4;
  int max_iterations = 30;  // per penalty level
  double fd_step = 1e-5;
  int spsa_threshold = 500;
  int spsa_iterations = 400;
  uint64_t spsa_seed = 1;
  int threads = 1;
};

struct RateResult {
  /// 1/2 int |hdot|^2 at the optimum, or +inf when the target is out of reach.
  double value = std::numeric_limits<double>::infinity();
  solver::Control argmin;
  /// sup over the observation cone of the H^1 x L^2 distance to the target.
  double terminal_gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  double final_lambda = 0.0;
};

/// Least control energy steering the skeleton map from z0 onto the recorded
/// target path: minimises 1/2 ||h||^2 + lambda D(h)^2 over piecewise-constant
/// controls, D^2 the time-averaged squared H^1 x L^2 cone distance, with
/// Levenberg-Marquardt on finite-difference Jacobians (SPSA above
/// spsa_threshold coefficients) and warm-started lambda continuation.
/// Target states must share the lattice and record times of a skeleton run
/// with `solver_opts`. Throws OptimizerDiverged on non-finite iterates.
RateResult rate_function(const solver::Model& model, const State& z0, const solver::Trajectory& target,
                         const solver::SolverOptions& solver_opts, const RateOptions& opts);

/// Skeleton run of a candidate under rate-function bookkeeping; used to
/// re-verify a RateResult.
double path_gap(const solver::Model& model, const State& z0, const solver::Control& h,
                const solver::Trajectory& target, const solver::SolverOptions& solver_opts);

struct ConvergenceReport {
  std::string name;
  std::vector<double> params;
  std::vector<double> metrics;
  std::vector<double> stderrs;
  double slope = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
};

/// Least-squares slope of log(metric) against log(param); NaN with fewer
/// than three points or a nonpositive metric.
double loglog_slope(const std::vector<double>& params, const std::vector<double>& metrics);

/// h + amplitude sin(2 pi n t / T) on the first noise mode, sampled at block
/// midpoints.
solver::Control oscillating_control(const solver::Control& h, double amplitude, int n, double horizon);

struct Statement1Options {
  std::vector<int> n_list{4, 8, 16, 32, 64};
  double amplitude = 1.0;
  double tol = 1e-2;
  /// Fixed strong perturbation instead of the oscillation (negative control).
  bool strong = false;
  int threads = 1;
};

/// d_n = sup_t ||J(h_n) - J(h)||_{H(B(c, R - t))}. Pass iff the trend
/// decreases and the last d_n < tol (for the negative control: iff d_n
/// stays above tol).
ConvergenceReport statement1_probe(const solver::Model& model, const State& z0, const solver::Control& h,
                                   const solver::SolverOptions& solver_opts, const Statement1Options& opts);

struct Statement2Options {
  std::vector<double> eps_list{1e-2, 1e-3, 1e-4};
  int trials = 50;
  /// Stopping level N; 0 selects ceil(2 ||z0||_{H(B(0, T))}) + 1.
  double level = 0.0;
  uint64_t seed = 1;
  int threads = 1;
  double slope_lo = 0.7;
  double slope_hi = 1.3;
};

struct Statement2Report {
  ConvergenceReport report;
  double level = 0.0;
  /// Fraction of trials with tau_n < T, per epsilon.
  std::vector<double> stopped_fraction;
};

/// Mean over trials of sup_{t <= T/2} e(t ^ tau_n, Z_eps - z_h) on B(0, T - t),
/// common random numbers keyed by (seed, trial). Throws InsufficientTrials
/// below 30 trials.
Statement2Report statement2_probe(const solver::Model& model, const State& z0, const solver::Control* h,
                                  const solver::SolverOptions& solver_opts, const Statement2Options& opts);

struct TailRow {
  double eps = 0.0;
  int count = 0;
  int trials = 0;
  double p_hat = 0.0;
  double eps_log_p = 0.0;  // -inf when count = 0
};

/// Fraction of uncontrolled paths whose sup-cone distance from the
/// uncontrolled skeleton exceeds delta. Throws AllZeroCounts when no epsilon
/// produces an exceedance.
std::vector<TailRow> tail_estimate(const solver::Model& model, const State& z0, double delta,
                                   const std::vector<double>& eps_list, int trials,
                                   const solver::SolverOptions& solver_opts, uint64_t seed, int threads);

/// Regression exponent of E ||Z(t + s) - Z(t)||_{H^1 x L^2(B(c, R - t - s))} in s,
/// over recorded states of the given paths.
double time_holder_exponent(const std::vector<solver::Trajectory>& paths, const std::vector<int>& lags);

void write_report_csv(const std::string& path, const ConvergenceReport& report);
void write_tail_csv(const std::string& path, const std::vector<TailRow>& rows);
std::string rate_result_json(const RateResult& r);

}  // namespace geowave::ldp
