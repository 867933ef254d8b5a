#include "geowave/solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "geowave/errors.hpp"
#include "geowave/wave_group.hpp"

namespace geowave::solver {

using geometry::Manifold;

int Control::block_at(double t) const {
  const int b = static_cast<int>(std::floor(t / dt));
  return std::clamp(b, 0, blocks() - 1);
}

Model Model::standard(const std::string& manifold_kind, const noise::SpectralMeasure& mu) {
  auto m = geometry::make_manifold(manifold_kind);
  auto field = geometry::DiffusionField::standard_for(*m);
  return Model{m, field, noise::build_basis(mu)};
}

double cutoff(double x, double r) { return 1.0 - geometry::smooth_ramp((std::abs(x) - r) / r); }

double taper(double norm, double k) {
  if (norm <= k) return 1.0;
  if (norm >= 2.0 * k) return 0.0;
  return 2.0 - norm / k;
}

double localization_norm(const State& z, double t, const LocalizationParams& loc) {
  const double rho = loc.r - t;
  if (!(rho > 0.0)) {
    std::ostringstream os;
    os << "t = " << t << " reached the cone base radius " << loc.r;
    throw Error(ErrorCode::ConeExhausted, os.str());
  }
  return std::sqrt(state_norm_squared(z, -rho, rho, 1));
}

namespace {

// Same node set as the core of extend(., rho, .).
bool in_core(const GridFunction& f, int i, double rho) {
  return std::abs(f.x(i)) <= rho + 1e-9 * f.spacing();
}

Vec drift_at(const Manifold& m, const Vec& u, const Vec& v, const Vec& p) {
  return m.extended_sff_A(u, v, v) - m.extended_sff_A(u, p, p);
}

// Second-order u_x from nodes no farther from `center` than x_i, so the
// initial slope does not widen the numerical domain of dependence.
GridFunction inward_slope(const GridFunction& u, double center) {
  GridFunction p = u.zeros_like();
  const double h = u.spacing();
  const int n = u.size();
  for (int i = 0; i < n; ++i) {
    const double d = u.x(i) - center;
    const int s = std::abs(d) < 0.5 * h ? 0 : (d > 0 ? -1 : 1);
    for (int c = 0; c < u.dim(); ++c) {
      if (s == 0 || i + 2 * s < 0 || i + 2 * s >= n) {
        p.at(i, c) = derivative_at(u, i, c, 1);
      } else {
        p.at(i, c) = -s * (3.0 * u.at(i, c) - 4.0 * u.at(i + s, c) + u.at(i + 2 * s, c)) / (2.0 * h);
      }
    }
  }
  return p;
}

// Y(u) on core nodes of radius rho, extended by E^1.
GridFunction extended_field(const Model& model, const GridFunction& u, double rho) {
  GridFunction y = u.zeros_like();
  if (!model.field.is_zero())
    for (int i = 0; i < u.size(); ++i)
      if (in_core(u, i, rho)) y.set_point(i, model.field(u.point(i)));
  return extend(y, rho, 1);
}

}  // namespace

State localized_drift(const Model& model, double t, const State& z, const LocalizationParams& loc) {
  const double rho = loc.r - t;
  const double tp = taper(localization_norm(z, t, loc), loc.k);
  const GridFunction p = derivative(z.u, 1);
  GridFunction a = z.u.zeros_like();
  for (int i = 0; i < a.size(); ++i)
    if (in_core(a, i, rho))
      a.set_point(i, drift_at(*model.manifold, z.u.point(i), z.v.point(i), p.point(i)));
  return {z.u.zeros_like(), tp * extend(a, rho, 1)};
}

std::vector<State> localized_diffusion(const Model& model, double t, const State& z,
                                       const LocalizationParams& loc) {
  const double rho = loc.r - t;
  const double tp = taper(localization_norm(z, t, loc), loc.k);
  const GridFunction y = extended_field(model, z.u, rho);
  std::vector<State> out;
  for (const noise::Mode& mode : model.basis.modes()) {
    GridFunction g = y.zeros_like();
    for (int i = 0; i < g.size(); ++i) {
      const double e = tp * mode(g.x(i));
      for (int c = 0; c < g.dim(); ++c) g.at(i, c) = e * y.at(i, c);
    }
    out.push_back({z.u.zeros_like(), std::move(g)});
  }
  return out;
}

State q_transform(const Model& model, const State& z, const LocalizationParams& loc) {
  State out{z.u.zeros_like(), z.v.zeros_like()};
  const Manifold& m = *model.manifold;
  for (int i = 0; i < z.u.size(); ++i) {
    const double phi = cutoff(z.u.x(i), loc.r);
    if (phi == 0.0) continue;
    const Vec u = z.u.point(i);
    out.u.set_point(i, phi * m.involution(u));
    out.v.set_point(i, phi * m.involution_derivative(u, z.v.point(i)));
  }
  return out;
}

State q_transform_derivative(const Model& model, const State& z, const State& w,
                             const LocalizationParams& loc) {
  State out{z.u.zeros_like(), z.v.zeros_like()};
  const Manifold& m = *model.manifold;
  for (int i = 0; i < z.u.size(); ++i) {
    const double phi = cutoff(z.u.x(i), loc.r);
    if (phi == 0.0) continue;
    const Vec u = z.u.point(i), wu = w.u.point(i);
    out.u.set_point(i, phi * m.involution_derivative(u, wu));
    out.v.set_point(i, phi * (m.involution_hessian(u, wu, z.v.point(i)) +
                              m.involution_derivative(u, w.v.point(i))));
  }
  return out;
}

namespace {

Trajectory integrate(const Model& model, const State& z0, double epsilon, const Control* h,
                     const SolverOptions& opts, uint64_t seed, uint64_t trajectory_id) {
  z0.validate();
  const Manifold& man = *model.manifold;
  const int dim = man.ambient_dim();
  if (z0.u.dim() != dim) throw Error(ErrorCode::DimensionMismatch, "state dimension differs from the manifold");
  if (epsilon < 0.0) throw Error(ErrorCode::InvalidArgument, "epsilon must be nonnegative");
  const double dx = z0.u.spacing();
  const int steps = wave::lattice_step(opts.horizon, dx).shift_count;
  if (steps < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be positive");
  const double T = steps * dx;
  const double R = opts.cone_radius;
  const double r = opts.base_radius > 0.0 ? opts.base_radius : R + T + dx;
  if (!(T < r - R)) throw Error(ErrorCode::InvalidArgument, "need horizon < r - R");
  const double L = std::min(-z0.u.origin(), z0.u.last_x());
  if (r > L + 1e-9) {
    std::ostringstream os;
    os << "cone base radius " << r << " exceeds the lattice half-width " << L;
    throw Error(ErrorCode::InvalidArgument, os.str());
  }
  if (h && h->dim != model.basis.dim())
    throw Error(ErrorCode::DimensionMismatch, "control width differs from the noise basis dimension");
  if (h && h->blocks() * h->dt < T - 1e-12)
    throw Error(ErrorCode::InvalidArgument, "control does not cover the horizon");

  const int N = z0.u.size();
  for (int i = 0; i < N; ++i) {
    if (!in_core(z0.u, i, r)) continue;
    const Vec u = z0.u.point(i), v = z0.v.point(i);
    const double res = man.distance(u);
    if (!(res < Manifold::kOnManifoldTol)) {
      std::ostringstream os;
      os << "constraint residual " << res << " at x = " << z0.u.x(i);
      throw Error(ErrorCode::OffManifoldInitialData, os.str());
    }
    const double normal = (v - man.tangent_part(man.nearest_point(u), v)).norm();
    if (!(normal < Manifold::kOnManifoldTol * (1.0 + v.norm()))) {
      std::ostringstream os;
      os << "velocity normal component " << normal << " at x = " << z0.u.x(i);
      throw Error(ErrorCode::OffManifoldInitialData, os.str());
    }
  }

  Trajectory traj;
  traj.seed = seed;
  traj.trajectory_id = trajectory_id;
  traj.epsilon = epsilon;
  traj.dx = dx;
  traj.options = opts;
  traj.options.observer = nullptr;

  State z{extend(z0.u, r, 2), extend(z0.v, r, 1)};
  GridFunction p = inward_slope(z.u, opts.cone_center);
  for (int i = 0; i < N; ++i)
    if (in_core(z.u, i, r)) {
      const Vec u = z.u.point(i);
      p.set_point(i, man.tangent_part(u, p.point(i)));
    }

  LocalizationParams loc{r, opts.k_initial};
  const double norm0 = localization_norm(z, 0.0, loc);
  if (!(loc.k > 0.0)) loc.k = std::max(1.0, std::ceil(2.0 * norm0));

  // Mode values at nodes.
  const int nb = model.basis.dim();
  std::vector<double> modes(static_cast<size_t>(nb) * N);
  for (int k = 0; k < nb; ++k)
    for (int i = 0; i < N; ++i) modes[static_cast<size_t>(k) * N + i] = model.basis.mode(k)(z.u.x(i));

  const LightCone obs{opts.cone_center, R};
  const bool stopping = std::isfinite(opts.stopping_level);
  traj.tau_n = T;
  bool tau_found = false;

  auto observe = [&](int m, double t, double norm) {
    traj.step_times.push_back(t);
    traj.norm_trace.push_back(norm);
    traj.energy_trace.push_back(t < R ? light_cone_norm(z, obs, t) : std::nan(""));
    if (t < R) {
      const double rho = R - t;
      for (int i = 0; i < N; ++i)
        if (std::abs(z.u.x(i) - opts.cone_center) <= rho)
          traj.max_constraint_residual = std::max(traj.max_constraint_residual, man.distance(z.u.point(i)));
    }
    if (stopping && !tau_found && t < opts.stopping_cone.horizon) {
      const double rho = opts.stopping_cone.horizon - t;
      const double nz = std::sqrt(state_norm_squared(z, opts.stopping_cone.center - rho,
                                                     opts.stopping_cone.center + rho, 1));
      if (nz >= opts.stopping_level) {
        traj.tau_n = t;
        tau_found = true;
      }
    }
    const bool record = m == 0 || m == steps || (opts.record_stride > 0 && m % opts.record_stride == 0);
    if (record) {
      traj.times.push_back(t);
      traj.states.push_back(z);
      if (opts.record_slopes) traj.slopes.push_back(p);
    }
    if (opts.observer) opts.observer(StepView{m, t, &z, &p});
  };

  double norm = norm0;
  observe(0, 0.0, norm);

  GridFunction fa = z.u.zeros_like(), fy = z.u.zeros_like();
  std::vector<double> hd(N, 0.0), dw(N, 0.0);
  GridFunction us = z.u.zeros_like(), vs = z.u.zeros_like(), pn = z.u.zeros_like();
  GridFunction fnew = z.u.zeros_like();

  for (int m = 0; m < steps; ++m) {
    const double t = m * dx;
    const double rho = r - t, rho1 = r - t - dx;

    while (norm >= loc.k) {
      traj.k_hits.emplace_back(loc.k, t);
      if (!opts.escalate) break;
      loc.k *= 2.0;
      if (loc.k > opts.k_max) {
        std::ostringstream os;
        os << "cut-off level exceeded k_max = " << opts.k_max << " at t = " << t;
        throw Error(ErrorCode::BlowupDetected, os.str());
      }
    }
    const double tp = taper(norm, loc.k);
    traj.taper_trace.push_back(tp);

    // Control field at the step midpoint.
    std::vector<double> row;
    if (h) {
      const int b = h->block_at(t + 0.5 * dx);
      row.assign(h->coeffs.begin() + static_cast<size_t>(b) * nb,
                 h->coeffs.begin() + static_cast<size_t>(b + 1) * nb);
      for (int i = 0; i < N; ++i) {
        double s = 0.0;
        for (int k = 0; k < nb; ++k) s += row[k] * modes[static_cast<size_t>(k) * N + i];
        hd[i] = s;
      }
    }
    traj.control_rows.push_back(row);

    auto forcing = [&](const Vec& u, const Vec& v, const Vec& pp, double hdot) -> Vec {
      Vec f = drift_at(man, u, v, pp);
      if (h && hdot != 0.0) {
        if (opts.general_diffusion) f += hdot * opts.general_diffusion(u, v, pp);
        else if (!model.field.is_zero()) f += hdot * model.field(u);
      }
      return tp * f;
    };

    // Forcing at time m on the core, extended.
    fa = z.u.zeros_like();
    for (int i = 0; i < N; ++i)
      if (in_core(z.u, i, rho)) fa.set_point(i, forcing(z.u.point(i), z.v.point(i), p.point(i), hd[i]));
    const GridFunction f = extend(fa, rho, 1);

    // Explicit characteristic predictors.
    const double dx2 = dx * dx;
    for (int i = 0; i < N; ++i) {
      const int im = std::max(i - 1, 0), ip = std::min(i + 1, N - 1);
      for (int c = 0; c < dim; ++c) {
        const double wp = z.v.at(ip, c) + p.at(ip, c) + 0.5 * dx * f.at(ip, c);
        const double wm = z.v.at(im, c) - p.at(im, c) + 0.5 * dx * f.at(im, c);
        pn.at(i, c) = 0.5 * (wp - wm);
        vs.at(i, c) = 0.5 * (wp + wm);
        us.at(i, c) = 0.5 * (z.u.at(ip, c) + z.u.at(im, c)) +
                      0.25 * dx * (z.v.at(im, c) + 2.0 * z.v.at(i, c) + z.v.at(ip, c)) +
                      dx2 / 6.0 * (f.at(im, c) + f.at(ip, c));
      }
    }

    // Noise: S_dx (0, g) with g = sqrt(eps) taper E^1[Y(u_m)] dW.
    std::vector<double> xi;
    if (epsilon > 0.0) {
      noise::RngStream rng(seed, trajectory_id, static_cast<uint64_t>(m));
      xi = noise::sample_increment(model.basis, dx, rng).coeffs;
      if (!model.field.is_zero()) {
        fy = extended_field(model, z.u, rho);
        const double s = std::sqrt(epsilon) * tp;
        for (int i = 0; i < N; ++i) {
          double w = 0.0;
          for (int k = 0; k < nb; ++k) w += xi[k] * modes[static_cast<size_t>(k) * N + i];
          dw[i] = s * w;
        }
        for (int i = 0; i < N; ++i) {
          const int im = std::max(i - 1, 0), ip = std::min(i + 1, N - 1);
          for (int c = 0; c < dim; ++c) {
            const double gm = fy.at(im, c) * dw[im], g0 = fy.at(i, c) * dw[i], gp = fy.at(ip, c) * dw[ip];
            us.at(i, c) += 0.25 * dx * (gm + 2.0 * g0 + gp);
            vs.at(i, c) += 0.5 * (gp + gm);
            pn.at(i, c) += 0.5 * (gp - gm);
          }
        }
      }
    }
    traj.increments.push_back(std::move(xi));

    // Trapezoid closure: pointwise fixed point for the new forcing on the new core.
    fnew = z.u.zeros_like();
    for (int i = 0; i < N; ++i) {
      if (!in_core(z.u, i, rho1)) continue;
      const Vec u0 = us.point(i), v0 = vs.point(i), pp = pn.point(i);
      Vec fi = f.point(i);
      for (int it = 0; it < 60; ++it) {
        const Vec next = forcing(u0 + (dx2 / 6.0) * fi, v0 + (0.5 * dx) * fi, pp, hd[i]);
        const double change = (next - fi).norm();
        fi = next;
        if (change <= 1e-15 * (1.0 + fi.norm())) break;
      }
      if (!std::isfinite(fi.norm())) throw Error(ErrorCode::BlowupDetected, "non-finite forcing");
      fnew.set_point(i, fi);
    }
    fnew = extend(fnew, rho1, 1);

    for (int i = 0; i < N; ++i)
      for (int c = 0; c < dim; ++c) {
        z.u.at(i, c) = us.at(i, c) + dx2 / 6.0 * fnew.at(i, c);
        z.v.at(i, c) = vs.at(i, c) + 0.5 * dx * fnew.at(i, c);
        p.at(i, c) = pn.at(i, c);
      }

    if (opts.renormalize) {
      for (int i = 0; i < N; ++i) {
        if (!in_core(z.u, i, rho1)) continue;
        const Vec u = z.u.point(i);
        if (man.distance(u) <= 1e-12) continue;
        const Vec q = man.nearest_point(u);
        z.u.set_point(i, q);
        z.v.set_point(i, man.tangent_part(q, z.v.point(i)));
        p.set_point(i, man.tangent_part(q, p.point(i)));
        ++traj.renormalizations;
      }
    }

    const double t1 = (m + 1) * dx;
    norm = localization_norm(z, t1, loc);
    if (!std::isfinite(norm)) throw Error(ErrorCode::BlowupDetected, "non-finite state");
    observe(m + 1, t1, norm);
  }
  traj.k_final = loc.k;
  traj.loc = loc;
  return traj;
}

}  // namespace

Trajectory solve_skeleton(const Model& model, const State& z0, const Control* h,
                          const SolverOptions& opts) {
  return integrate(model, z0, 0.0, h, opts, 0, 0);
}

Trajectory solve_stochastic(const Model& model, const State& z0, double epsilon, const Control* h,
                            const SolverOptions& opts, uint64_t seed, uint64_t trajectory_id) {
  return integrate(model, z0, epsilon, h, opts, seed, trajectory_id);
}

std::vector<std::pair<double, double>> blowup_times(const Trajectory& traj,
                                                    const std::vector<double>& levels) {
  const double T = traj.step_times.empty() ? 0.0 : traj.step_times.back();
  std::vector<std::pair<double, double>> out;
  for (double k : levels) {
    double tau = T;
    for (size_t m = 0; m < traj.norm_trace.size(); ++m)
      if (traj.norm_trace[m] >= k) {
        tau = traj.step_times[m];
        break;
      }
    out.emplace_back(k, tau);
  }
  return out;
}

double sup_cone_distance(const Trajectory& a, const Trajectory& b, int k) {
  const double R = a.options.cone_radius, c = a.options.cone_center;
  const size_t n = std::min(a.states.size(), b.states.size());
  double sup = 0.0;
  for (size_t j = 0; j < n; ++j) {
    const double t = a.times[j];
    if (!(t < R)) continue;
    const State d = a.states[j] - b.states[j];
    sup = std::max(sup, std::sqrt(state_norm_squared(d, c - (R - t), c + (R - t), k)));
  }
  return sup;
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj, const Manifold& manifold) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  const int dim = traj.states.empty() ? 0 : traj.states[0].u.dim();
  out << "t,x";
  for (int c = 0; c < dim; ++c) out << ",u_" << c + 1;
  for (int c = 0; c < dim; ++c) out << ",v_" << c + 1;
  out << ",residual\n" << std::setprecision(17);
  const double R = traj.options.cone_radius, c0 = traj.options.cone_center;
  for (size_t j = 0; j < traj.states.size(); ++j) {
    const State& z = traj.states[j];
    for (int i = 0; i < z.u.size(); ++i) {
      if (std::abs(z.u.x(i) - c0) > R - traj.times[j]) continue;
      out << traj.times[j] << ',' << z.u.x(i);
      for (int c = 0; c < dim; ++c) out << ',' << z.u.at(i, c);
      for (int c = 0; c < dim; ++c) out << ',' << z.v.at(i, c);
      out << ',' << manifold.distance(z.u.point(i)) << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

std::string trajectory_summary_json(const Trajectory& traj) {
  nlohmann::ordered_json j;
  j["epsilon"] = traj.epsilon;
  j["seed"] = traj.seed;
  j["trajectory_id"] = traj.trajectory_id;
  j["control_id"] = traj.control_id;
  j["dx"] = traj.dx;
  j["base_radius"] = traj.loc.r;
  j["k_final"] = traj.k_final;
  j["tau_n"] = traj.tau_n;
  j["max_constraint_residual"] = traj.max_constraint_residual;
  j["renormalizations"] = traj.renormalizations;
  auto hits = nlohmann::ordered_json::array();
  for (const auto& [k, tau] : traj.k_hits) hits.push_back({{"k", k}, {"tau", tau}});
  j["k_hits"] = hits;
  auto energy = nlohmann::ordered_json::array();
  for (size_t m = 0; m < traj.step_times.size(); ++m)
    energy.push_back({{"t", traj.step_times[m]},
                      {"e", std::isfinite(traj.energy_trace[m]) ? nlohmann::ordered_json(traj.energy_trace[m])
                                                                : nlohmann::ordered_json(nullptr)},
                      {"norm", traj.norm_trace[m]}});
  j["energy_trace"] = energy;
  return j.dump(2);
}

}  // namespace geowave::solver
