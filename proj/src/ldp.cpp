#include "geowave/ldp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Dense>

#include "json.hpp"

#include "geowave/energy.hpp"
#include "geowave/errors.hpp"
#include "geowave/noise.hpp"
#include "geowave/parallel.hpp"

namespace geowave::ldp {

using solver::Control;
using solver::Trajectory;

double control_norm(const Control& h) {
  double s = 0.0;
  for (double c : h.coeffs) s += c * c;
  return h.dt * s;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Weighted pointwise (u, u_x, v) differences on the observation cone at every
// recorded time; the squared norm approximates the time-averaged squared
// H^1 x L^2 cone distance.
Eigen::VectorXd observation(const Trajectory& a, const Trajectory& target) {
  const double R = target.options.cone_radius, c = target.options.cone_center;
  const size_t n = std::min(a.states.size(), target.states.size());
  int times = 0;
  for (size_t j = 0; j < n; ++j) times += target.times[j] < R ? 1 : 0;
  std::vector<double> out;
  for (size_t j = 0; j < n; ++j) {
    const double t = target.times[j];
    if (!(t < R)) continue;
    const State d = a.states[j] - target.states[j];
    const double w = std::sqrt(d.u.spacing() / std::max(times, 1));
    for (int i = 0; i < d.u.size(); ++i) {
      if (std::abs(d.u.x(i) - c) > R - t) continue;
      for (int k = 0; k < d.u.dim(); ++k) {
        out.push_back(w * d.u.at(i, k));
        out.push_back(w * derivative_at(d.u, i, k, 1));
        out.push_back(w * d.v.at(i, k));
      }
    }
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

struct Evaluator {
  const solver::Model& model;
  const State& z0;
  const Trajectory& target;
  const solver::SolverOptions& opts;

  Trajectory run(const Control& h) const { return solver::solve_skeleton(model, z0, &h, opts); }
  Eigen::VectorXd obs(const Control& h) const { return observation(run(h), target); }
  double objective(const Control& h, const Eigen::VectorXd& o, double lambda) const {
    return 0.5 * control_norm(h) + lambda * o.squaredNorm();
  }
};

Control with_coeffs(const Control& like, const Eigen::VectorXd& x) {
  Control h = like;
  std::copy(x.data(), x.data() + x.size(), h.coeffs.begin());
  return h;
}

Eigen::VectorXd coeffs_of(const Control& h) {
  return Eigen::Map<const Eigen::VectorXd>(h.coeffs.data(), static_cast<Eigen::Index>(h.coeffs.size()));
}

void check_finite(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::OptimizerDiverged, "objective became non-finite");
}

// Levenberg-Marquardt at fixed lambda; returns iterations used.
int levenberg_marquardt(const Evaluator& ev, Control& h, double lambda, const RateOptions& opts) {
  const int P = static_cast<int>(h.coeffs.size());
  Eigen::VectorXd x = coeffs_of(h);
  Eigen::VectorXd o = ev.obs(h);
  double phi = ev.objective(h, o, lambda);
  check_finite(phi);
  double mu = 1e-3;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    Eigen::MatrixXd J(o.size(), P);
    parallel_for(P, opts.threads, [&](int p) {
      Eigen::VectorXd xp = x;
      xp[p] += opts.fd_step;
      const Eigen::VectorXd op = ev.obs(with_coeffs(h, xp));
      J.col(p) = (op - o) / opts.fd_step;
    });
    const Eigen::VectorXd g = h.dt * x + 2.0 * lambda * J.transpose() * o;
    Eigen::MatrixXd H = 2.0 * lambda * J.transpose() * J;
    H.diagonal().array() += h.dt;
    bool accepted = false;
    for (int tries = 0; tries < 12 && !accepted; ++tries) {
      Eigen::MatrixXd A = H;
      A.diagonal() += mu * H.diagonal();
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      const Eigen::VectorXd xn = x + step;
      const Control hn = with_coeffs(h, xn);
      const Eigen::VectorXd on = ev.obs(hn);
      const double phin = ev.objective(hn, on, lambda);
      check_finite(phin);
      if (phin < phi) {
        const double decrease = phi - phin;
        x = xn;
        h = hn;
        o = on;
        phi = phin;
        mu = std::max(mu / 3.0, 1e-12);
        accepted = true;
        if (decrease <= 1e-13 * (1.0 + phi) || step.norm() <= 1e-10) return it + 1;
      } else {
        mu *= 4.0;
      }
    }
    if (!accepted) return it + 1;
  }
  return it;
}

// Simultaneous-perturbation gradient descent at fixed lambda.
int spsa(const Evaluator& ev, Control& h, double lambda, const RateOptions& opts, int level) {
  const int P = static_cast<int>(h.coeffs.size());
  Eigen::VectorXd x = coeffs_of(h);
  const double A = 0.1 * opts.spsa_iterations;
  auto estimate = [&](int k, uint64_t stream) {
    noise::RngStream rng(opts.spsa_seed, stream, static_cast<uint64_t>(k));
    Eigen::VectorXd delta(P);
    for (int p = 0; p < P; ++p) delta[p] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const double ck = 1e-3 / std::pow(k + 1.0, 0.101);
    const Control hp = with_coeffs(h, x + ck * delta), hm = with_coeffs(h, x - ck * delta);
    const double fp = ev.objective(hp, ev.obs(hp), lambda), fm = ev.objective(hm, ev.obs(hm), lambda);
    check_finite(fp);
    check_finite(fm);
    return Eigen::VectorXd((fp - fm) / (2.0 * ck) * delta);
  };
  // Gain calibrated so the first steps move each coefficient by about 0.05.
  double g0 = 0.0;
  for (int k = 0; k < 4; ++k) g0 += estimate(k, 2 * level + 1).cwiseAbs().mean() / 4.0;
  if (g0 == 0.0) return 0;
  const double a = 0.05 * std::pow(A + 1.0, 0.602) / g0;
  for (int k = 0; k < opts.spsa_iterations; ++k)
    x -= a / std::pow(k + 1.0 + A, 0.602) * estimate(k, 2 * level);
  h = with_coeffs(h, x);
  return opts.spsa_iterations;
}

bool target_on_manifold(const solver::Model& model, const Trajectory& target) {
  const double R = target.options.cone_radius, c = target.options.cone_center;
  for (size_t j = 0; j < target.states.size(); ++j) {
    const double t = target.times[j];
    if (!(t < R)) continue;
    const GridFunction& u = target.states[j].u;
    for (int i = 0; i < u.size(); ++i)
      if (std::abs(u.x(i) - c) <= R - t && !(model.manifold->distance(u.point(i)) < 1e-6)) return false;
  }
  return true;
}

}  // namespace

double path_gap(const solver::Model& model, const State& z0, const Control& h, const Trajectory& target,
                const solver::SolverOptions& solver_opts) {
  const Trajectory tr = solver::solve_skeleton(model, z0, &h, solver_opts);
  return solver::sup_cone_distance(tr, target, 0);
}

RateResult rate_function(const solver::Model& model, const State& z0, const Trajectory& target,
                         const solver::SolverOptions& solver_opts, const RateOptions& opts) {
  if (opts.blocks < 1) throw Error(ErrorCode::InvalidArgument, "need at least one control block");
  if (opts.lambdas.empty()) throw Error(ErrorCode::InvalidArgument, "empty penalty schedule");
  solver::SolverOptions so = solver_opts;
  so.observer = nullptr;
  so.record_slopes = false;
  Control h(so.horizon / opts.blocks, opts.blocks, model.basis.dim());
  RateResult res;
  res.argmin = h;
  if (!target_on_manifold(model, target)) return res;

  const Evaluator ev{model, z0, target, so};
  const bool use_spsa = static_cast<int>(h.coeffs.size()) > opts.spsa_threshold;
  for (size_t level = 0; level < opts.lambdas.size(); ++level) {
    const double lambda = opts.lambdas[level];
    res.iterations += use_spsa ? spsa(ev, h, lambda, opts, static_cast<int>(level))
                               : levenberg_marquardt(ev, h, lambda, opts);
    res.final_lambda = lambda;
    res.terminal_gap = path_gap(model, z0, h, target, so);
    if (res.terminal_gap <= opts.gap_tol) break;
  }
  res.argmin = h;
  const double value = 0.5 * control_norm(h);
  res.converged = res.terminal_gap <= opts.gap_tol && value <= opts.budget;
  res.value = res.converged ? value : kInf;
  return res;
}

double loglog_slope(const std::vector<double>& params, const std::vector<double>& metrics) {
  const size_t n = std::min(params.size(), metrics.size());
  if (n < 3) return std::numeric_limits<double>::quiet_NaN();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!(params[i] > 0.0) || !(metrics[i] > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    const double x = std::log(params[i]), y = std::log(metrics[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Control oscillating_control(const Control& h, double amplitude, int n, double horizon) {
  Control out = h;
  for (int b = 0; b < out.blocks(); ++b) {
    const double t = (b + 0.5) * out.dt;
    out.at(b, 0) += amplitude * std::sin(2.0 * M_PI * n * t / horizon);
  }
  return out;
}

ConvergenceReport statement1_probe(const solver::Model& model, const State& z0, const Control& h,
                                   const solver::SolverOptions& solver_opts, const Statement1Options& opts) {
  solver::SolverOptions so = solver_opts;
  so.observer = nullptr;
  const Trajectory base = solver::solve_skeleton(model, z0, &h, so);
  ConvergenceReport rep;
  rep.name = opts.strong ? "statement1-strong" : "statement1";
  const int count = static_cast<int>(opts.n_list.size());
  rep.params.resize(count);
  rep.metrics.resize(count);
  rep.stderrs.assign(count, 0.0);
  parallel_for(count, opts.threads, [&](int j) {
    const int n = opts.n_list[j];
    Control hn = h;
    if (opts.strong) {
      for (int b = 0; b < hn.blocks(); ++b) hn.at(b, 0) += opts.amplitude;
    } else {
      hn = oscillating_control(h, opts.amplitude, n, so.horizon);
    }
    const Trajectory tn = solver::solve_skeleton(model, z0, &hn, so);
    rep.params[j] = n;
    rep.metrics[j] = solver::sup_cone_distance(tn, base, 1);
  });
  rep.slope = loglog_slope(rep.params, rep.metrics);
  if (count == 0) return rep;
  if (opts.strong) {
    rep.pass = *std::min_element(rep.metrics.begin(), rep.metrics.end()) > opts.tol;
  } else {
    const bool trend = count < 3 ? rep.metrics.back() <= rep.metrics.front() : rep.slope < 0.0;
    rep.pass = trend && rep.metrics.back() <= rep.metrics.front() && rep.metrics.back() < opts.tol;
  }
  return rep;
}

Statement2Report statement2_probe(const solver::Model& model, const State& z0, const Control* h,
                                  const solver::SolverOptions& solver_opts, const Statement2Options& opts) {
  if (opts.trials < 30) throw Error(ErrorCode::InsufficientTrials, "statement-2 probe needs at least 30 trials");
  for (size_t i = 1; i < opts.eps_list.size(); ++i)
    if (!(opts.eps_list[i] < opts.eps_list[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "epsilon list must be decreasing");
  solver::SolverOptions so = solver_opts;
  so.observer = nullptr;
  so.record_stride = 1;
  so.record_slopes = false;
  const double T = so.horizon;
  const LightCone cone{0.0, T};

  Statement2Report out;
  out.level = opts.level > 0.0
                  ? opts.level
                  : std::ceil(2.0 * std::sqrt(state_norm_squared(z0, -T, T, 1))) + 1.0;
  so.stopping_level = out.level;
  so.stopping_cone = cone;
  const Trajectory zh = solver::solve_skeleton(model, z0, h, so);

  ConvergenceReport& rep = out.report;
  rep.name = "statement2";
  for (double eps : opts.eps_list) {
    std::vector<double> metric(opts.trials, 0.0);
    std::vector<int> stopped(opts.trials, 0);
    parallel_for(opts.trials, opts.threads, [&](int trial) {
      const Trajectory z = solver::solve_stochastic(model, z0, eps, h, so, opts.seed, static_cast<uint64_t>(trial));
      stopped[trial] = z.tau_n < T - 0.5 * z.dx ? 1 : 0;
      double sup = 0.0;
      for (size_t j = 0; j < z.states.size(); ++j) {
        const double t = z.times[j];
        if (t > 0.5 * T + 1e-12) break;
        const double ts = std::min(t, z.tau_n);
        const size_t js = static_cast<size_t>(std::lround(ts / z.dx));
        sup = std::max(sup, energy::energy(ts, z.states[js] - zh.states[js], cone, 1));
      }
      metric[trial] = sup;
    });
    double mean = 0.0, sq = 0.0;
    int nstop = 0;
    for (int i = 0; i < opts.trials; ++i) {
      mean += metric[i];
      sq += metric[i] * metric[i];
      nstop += stopped[i];
    }
    mean /= opts.trials;
    const double var = std::max(0.0, sq / opts.trials - mean * mean) * opts.trials / (opts.trials - 1.0);
    rep.params.push_back(eps);
    rep.metrics.push_back(mean);
    rep.stderrs.push_back(std::sqrt(var / opts.trials));
    out.stopped_fraction.push_back(static_cast<double>(nstop) / opts.trials);
  }
  rep.slope = loglog_slope(rep.params, rep.metrics);
  bool decreasing = true;
  for (size_t i = 1; i < rep.metrics.size(); ++i) decreasing = decreasing && rep.metrics[i] < rep.metrics[i - 1];
  rep.pass = decreasing && rep.slope >= opts.slope_lo && rep.slope <= opts.slope_hi;
  return out;
}

std::vector<TailRow> tail_estimate(const solver::Model& model, const State& z0, double delta,
                                   const std::vector<double>& eps_list, int trials,
                                   const solver::SolverOptions& solver_opts, uint64_t seed, int threads) {
  if (delta < 0.0) throw Error(ErrorCode::InvalidArgument, "delta must be nonnegative");
  if (trials < 1) throw Error(ErrorCode::InsufficientTrials, "need at least one trial");
  solver::SolverOptions so = solver_opts;
  so.observer = nullptr;
  const Trajectory ref = solver::solve_skeleton(model, z0, nullptr, so);
  std::vector<TailRow> rows;
  int total = 0;
  for (double eps : eps_list) {
    std::vector<int> hit(trials, 0);
    parallel_for(trials, threads, [&](int trial) {
      const Trajectory z = solver::solve_stochastic(model, z0, eps, nullptr, so, seed, static_cast<uint64_t>(trial));
      hit[trial] = solver::sup_cone_distance(z, ref, 0) > delta ? 1 : 0;
    });
    TailRow row;
    row.eps = eps;
    row.trials = trials;
    for (int x : hit) row.count += x;
    row.p_hat = static_cast<double>(row.count) / trials;
    row.eps_log_p = row.count > 0 ? eps * std::log(row.p_hat) : -kInf;
    total += row.count;
    rows.push_back(row);
  }
  if (total == 0) throw Error(ErrorCode::AllZeroCounts, "no exceedance for any epsilon; reduce delta");
  return rows;
}

double time_holder_exponent(const std::vector<Trajectory>& paths, const std::vector<int>& lags) {
  std::vector<double> s, m;
  for (int lag : lags) {
    double sum = 0.0;
    int count = 0;
    for (const Trajectory& z : paths) {
      const double R = z.options.cone_radius, c = z.options.cone_center;
      for (size_t j = 0; j + lag < z.states.size(); ++j) {
        const double t1 = z.times[j + lag];
        if (!(t1 < R)) break;
        const State d = z.states[j + lag] - z.states[j];
        sum += std::sqrt(state_norm_squared(d, c - (R - t1), c + (R - t1), 0));
        ++count;
      }
    }
    if (count == 0) continue;
    s.push_back(lag * (paths[0].times[1] - paths[0].times[0]));
    m.push_back(sum / count);
  }
  return loglog_slope(s, m);
}

void write_report_csv(const std::string& path, const ConvergenceReport& report) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "param,metric,stderr\n" << std::setprecision(17);
  for (size_t i = 0; i < report.params.size(); ++i)
    out << report.params[i] << ',' << report.metrics[i] << ',' << report.stderrs[i] << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

void write_tail_csv(const std::string& path, const std::vector<TailRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << "param,metric,stderr\n" << std::setprecision(17);
  for (const TailRow& r : rows)
    out << r.eps << ',' << r.p_hat << ',' << std::sqrt(r.p_hat * (1.0 - r.p_hat) / r.trials) << '\n';
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string rate_result_json(const RateResult& r) {
  nlohmann::ordered_json j;
  j["value"] = std::isfinite(r.value) ? nlohmann::ordered_json(r.value) : nlohmann::ordered_json("inf");
  j["terminal_gap"] = r.terminal_gap;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["final_lambda"] = r.final_lambda;
  j["control_dt"] = r.argmin.dt;
  j["control_dim"] = r.argmin.dim;
  j["argmin"] = r.argmin.coeffs;
  return j.dump(2);
}

}  // namespace geowave::ldp
